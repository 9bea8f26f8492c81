/**
 * Time-slice overlay: reference profile as a curve, sampled values as dots,
 * with optional +/- k standard-error bands around the reference.
 */

import { writeFileSync } from 'fs';
import { Grid, SliceProfile, assertSameShape, scalarField } from './csv';
import { encodePng } from './png';
import { BLACK, Canvas, GRAY, LIGHT_GRAY, WHITE } from './raster';

export interface SliceJob {
  /** either a precomputed profile ... */
  profile?: SliceProfile;
  /** ... or two grids plus a slice time */
  reference?: Grid;
  sampled?: Grid;
  t?: number;
  components: number[];
  out: string;
  bandScale?: number;
  width?: number;
  height?: number;
}

interface Series {
  zOffsets: number[];
  sampled: number[];
  reference?: number[];
  se?: number[];
}

function seriesFromGrids(job: SliceJob): Series {
  const ref = job.reference!;
  const smp = job.sampled!;
  assertSameShape(ref, smp);
  const t = job.t!;
  if (t < 0 || t >= Math.min(ref.nSlices, smp.nSlices)) {
    throw new Error(`slice t=${t} out of range`);
  }
  const renormalized = ref.meta.mode === 'renormalized';
  const refField = scalarField(ref, job.components, false);
  const smpField = scalarField(smp, job.components, renormalized);
  const origin = (ref.nSites - 1) / 2;
  return {
    zOffsets: refField[t].map((_, i) => i - origin),
    sampled: smpField[t],
    reference: refField[t],
  };
}

export function renderSlice(job: SliceJob): void {
  let s: Series;
  if (job.profile) {
    const cols = job.profile.columns;
    const sampled = cols['sampled'] ?? cols['value'];
    if (!sampled) throw new Error('profile has no sampled/value column');
    s = {
      zOffsets: job.profile.zOffsets,
      sampled,
      reference: cols['reference'],
      se: cols['se'],
    };
  } else if (job.reference && job.sampled && job.t !== undefined) {
    s = seriesFromGrids(job);
  } else {
    throw new Error('slice job needs either a profile CSV or two grids and --t');
  }

  const width = job.width ?? 560;
  const height = job.height ?? 360;
  const mL = 46;
  const mR = 12;
  const mT = 14;
  const mB = 30;
  const plotW = width - mL - mR;
  const plotH = height - mT - mB;

  const all = [...s.sampled, ...(s.reference ?? [])];
  const bandScale = job.bandScale ?? 5;
  if (s.se && s.reference) {
    s.se.forEach((e, i) => {
      all.push(s.reference![i] + bandScale * e, s.reference![i] - bandScale * e);
    });
  }
  let lo = Math.min(...all);
  let hi = Math.max(...all);
  if (lo === hi) { lo -= 1; hi += 1; }
  const pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;

  const zLo = Math.min(...s.zOffsets);
  const zHi = Math.max(...s.zOffsets);
  const px = (z: number) => mL + ((z - zLo) / (zHi - zLo || 1)) * plotW;
  const py = (v: number) => mT + (1 - (v - lo) / (hi - lo)) * plotH;

  const canvas = new Canvas(width, height, WHITE);

  // standard-error band around the reference
  if (s.se && s.reference) {
    for (let i = 0; i + 1 < s.zOffsets.length; i++) {
      const x0 = Math.round(px(s.zOffsets[i]));
      const x1 = Math.round(px(s.zOffsets[i + 1]));
      for (let x = x0; x <= x1; x++) {
        const u = x1 === x0 ? 0 : (x - x0) / (x1 - x0);
        const mid = s.reference[i] + u * (s.reference[i + 1] - s.reference[i]);
        const err = (s.se[i] + u * (s.se[i + 1] - s.se[i])) * bandScale;
        const yTop = Math.round(py(mid + err));
        const yBot = Math.round(py(mid - err));
        for (let y = yTop; y <= yBot; y++) canvas.set(x, y, LIGHT_GRAY);
      }
    }
  }

  // axes
  canvas.line(mL, mT, mL, mT + plotH, BLACK);
  canvas.line(mL, mT + plotH, mL + plotW, mT + plotH, BLACK);
  if (lo < 0 && hi > 0) {
    const y0 = Math.round(py(0));
    canvas.line(mL, y0, mL + plotW, y0, GRAY);
  }
  for (const frac of [0, 0.5, 1]) {
    const v = lo + frac * (hi - lo);
    const y = Math.round(py(v));
    canvas.line(mL - 3, y, mL, y, BLACK);
    canvas.text(2, y - 3, v.toPrecision(2), GRAY);
    const z = zLo + frac * (zHi - zLo);
    const x = Math.round(px(z));
    canvas.line(x, mT + plotH, x, mT + plotH + 3, BLACK);
    const zl = String(Math.round(z));
    canvas.text(x - Math.floor(Canvas.textWidth(zl) / 2), mT + plotH + 6, zl, GRAY);
  }
  canvas.text(mL + Math.floor(plotW / 2) - 3, height - 9, 'Z', BLACK);

  // reference curve
  if (s.reference) {
    for (let i = 0; i + 1 < s.zOffsets.length; i++) {
      canvas.line(px(s.zOffsets[i]), py(s.reference[i]),
        px(s.zOffsets[i + 1]), py(s.reference[i + 1]), BLACK);
    }
  }
  // sampled dots
  for (let i = 0; i < s.zOffsets.length; i++) {
    canvas.disc(Math.round(px(s.zOffsets[i])), Math.round(py(s.sampled[i])), 2,
      BLACK);
  }
  // legend
  canvas.line(mL + 8, mT + 6, mL + 26, mT + 6, BLACK);
  canvas.text(mL + 30, mT + 3, 'REFERENCE');
  canvas.disc(mL + 17, mT + 18, 2, BLACK);
  canvas.text(mL + 30, mT + 15, 'SAMPLED');

  writeFileSync(job.out, encodePng(width, height, canvas.pixels));
}
