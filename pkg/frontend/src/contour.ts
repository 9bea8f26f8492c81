/**
 * Side-by-side filled-contour panels of a scalar over the (z, t) lattice:
 * left the deterministic reference, right the sampled grid, on one shared
 * symmetric color scale.
 */

import { writeFileSync } from 'fs';
import { Grid, assertSameShape, scalarField } from './csv';
import { encodePng } from './png';
import { BLACK, Canvas, GRAY, bandedDiverging } from './raster';

export interface ContourJob {
  reference: Grid;
  sampled: Grid;
  components: number[];
  out: string;
  /** optional |z-offset| clip in sites */
  region?: number;
  cellPx?: number;
  bands?: number;
}

const MARGIN_LEFT = 34;
const MARGIN_BOTTOM = 22;
const MARGIN_TOP = 16;
const GAP = 18;

export function renderContour(job: ContourJob): void {
  assertSameShape(job.reference, job.sampled);
  const renormalized = job.reference.meta.mode === 'renormalized';
  const ref = scalarField(job.reference, job.components, false);
  const smp = scalarField(job.sampled, job.components, renormalized);
  const nSlices = Math.min(ref.length, smp.length);
  const origin = (job.reference.nSites - 1) / 2;

  let z0 = 0;
  let z1 = job.reference.nSites;
  if (job.region !== undefined) {
    z0 = Math.max(0, Math.floor(origin - job.region));
    z1 = Math.min(job.reference.nSites, Math.ceil(origin + job.region) + 1);
  }
  const nZ = z1 - z0;

  let vmax = 0;
  for (let t = 0; t < nSlices; t++) {
    for (let z = z0; z < z1; z++) {
      vmax = Math.max(vmax, Math.abs(ref[t][z]));
    }
  }
  if (vmax === 0) vmax = 1; // all-zero grids render as the middle band

  const cell = job.cellPx ?? Math.max(2, Math.floor(420 / Math.max(nZ, nSlices)));
  const bands = job.bands ?? 6;
  const panelW = nZ * cell;
  const panelH = nSlices * cell;
  const width = MARGIN_LEFT + panelW + GAP + panelW + 8;
  const height = MARGIN_TOP + panelH + MARGIN_BOTTOM;
  const canvas = new Canvas(width, height);

  const panels: Array<[number[][], string, number]> = [
    [ref, 'REFERENCE', MARGIN_LEFT],
    [smp, 'SAMPLED', MARGIN_LEFT + panelW + GAP],
  ];
  for (const [field, label, xOff] of panels) {
    for (let t = 0; t < nSlices; t++) {
      const y = MARGIN_TOP + panelH - (t + 1) * cell; // t increases upward
      for (let zi = 0; zi < nZ; zi++) {
        const v = field[t][z0 + zi] / vmax;
        canvas.fillRect(xOff + zi * cell, y, cell, cell,
          bandedDiverging(v, bands));
      }
    }
    // frame and label
    canvas.line(xOff, MARGIN_TOP, xOff + panelW - 1, MARGIN_TOP, BLACK);
    canvas.line(xOff, MARGIN_TOP + panelH, xOff + panelW - 1,
      MARGIN_TOP + panelH, BLACK);
    canvas.line(xOff, MARGIN_TOP, xOff, MARGIN_TOP + panelH, BLACK);
    canvas.line(xOff + panelW - 1, MARGIN_TOP, xOff + panelW - 1,
      MARGIN_TOP + panelH, BLACK);
    canvas.text(xOff + Math.max(0, Math.floor((panelW - Canvas.textWidth(label)) / 2)),
      4, label);
    // z ticks at origin and edges
    const ticks = [z0, Math.round(origin), z1 - 1];
    for (const zt of ticks) {
      const x = xOff + (zt - z0) * cell + Math.floor(cell / 2);
      canvas.line(x, MARGIN_TOP + panelH, x, MARGIN_TOP + panelH + 3, BLACK);
      const labelText = String(Math.round(zt - origin));
      canvas.text(x - Math.floor(Canvas.textWidth(labelText) / 2),
        MARGIN_TOP + panelH + 6, labelText, GRAY);
    }
  }
  // t axis labels on the left
  for (const ts of [0, Math.floor((nSlices - 1) / 2), nSlices - 1]) {
    const y = MARGIN_TOP + panelH - (ts + 1) * cell + Math.floor(cell / 2);
    canvas.text(2, y - 3, `T=${ts}`, GRAY);
  }

  writeFileSync(job.out, encodePng(width, height, canvas.pixels));
}
