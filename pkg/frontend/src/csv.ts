/**
 * Readers for the simulator's grid CSV files and their JSON sidecars.
 *
 * Grid CSVs are t-major rows of `t,z,ch1,ch2,ch3,ch4` (four-channel
 * histories and charge grids) or `t,z,fplus,fminus`; each file has a
 * `<path>.meta.json` sidecar describing kind, lattice and run parameters.
 */

import { readFileSync } from 'fs';

export interface LatticeMeta {
  dz: number;
  dt: number;
  c: number;
  a: number;
  z_extent: number;
  n_steps: number;
}

export interface GridMeta {
  kind: string;
  spec: LatticeMeta;
  mode?: string;
  n_pairs?: number;
  n_rejected?: number;
  n_slices?: number;
  config?: Record<string, unknown>;
  [key: string]: unknown;
}

export interface Grid {
  /** values[ch][t][zIndex], ch = 0..3 */
  values: number[][][];
  zCoords: number[];
  nSlices: number;
  nSites: number;
  meta: GridMeta;
}

export function readSidecar(path: string): GridMeta {
  const meta = JSON.parse(readFileSync(path + '.meta.json', 'utf8'));
  if (typeof meta.kind !== 'string' || typeof meta.spec !== 'object') {
    throw new Error(`${path}.meta.json: missing kind or spec`);
  }
  return meta as GridMeta;
}

export function readGrid(path: string): Grid {
  const meta = readSidecar(path);
  const text = readFileSync(path, 'utf8');
  const lines = text.split('\n').filter((l) => l.length > 0);
  const header = lines[0];
  const nChannels = header === 't,z,ch1,ch2,ch3,ch4' ? 4
    : header === 't,z,fplus,fminus' ? 2 : 0;
  if (nChannels === 0) {
    throw new Error(`${path}: unrecognized header '${header}'`);
  }
  const rows = lines.slice(1).map((l) => l.split(',').map(Number));
  for (const r of rows) {
    if (r.length !== 2 + nChannels || r.some((v) => Number.isNaN(v))) {
      throw new Error(`${path}: malformed data row`);
    }
  }
  const nSlices = Math.max(...rows.map((r) => r[0])) + 1;
  const nSites = rows.filter((r) => r[0] === 0).length;
  if (nSlices * nSites !== rows.length) {
    throw new Error(`${path}: rows do not fill the (t, z) lattice`);
  }
  const values: number[][][] = [];
  for (let ch = 0; ch < 4; ch++) {
    values.push(Array.from({ length: nSlices }, () => new Array(nSites).fill(0)));
  }
  const zCoords = rows.slice(0, nSites).map((r) => r[1]);
  rows.forEach((r, i) => {
    const t = r[0];
    const zi = i % nSites;
    for (let ch = 0; ch < nChannels; ch++) {
      values[ch][t][zi] = r[2 + ch];
    }
  });
  return { values, zCoords, nSlices, nSites, meta };
}

/**
 * Component-sum scalar field S[t][z], normalized when the grid is a charge
 * grid (counts / n_pairs, with the (1-p)^-t rescaling if the partner
 * history is renormalized).
 */
export function scalarField(
  grid: Grid,
  components: number[],
  renormalized: boolean,
): number[][] {
  const isCounts = grid.meta.kind === 'charge_grid';
  const nPairs = grid.meta.n_pairs ?? 1;
  if (isCounts && (!Number.isFinite(nPairs) || nPairs < 1)) {
    throw new Error('charge grid sidecar lacks a usable n_pairs');
  }
  const p = grid.meta.spec.a * grid.meta.spec.dt;
  const out: number[][] = [];
  for (let t = 0; t < grid.nSlices; t++) {
    const row = new Array(grid.nSites).fill(0);
    for (const c of components) {
      const comp = grid.values[c - 1][t];
      for (let z = 0; z < grid.nSites; z++) row[z] += comp[z];
    }
    let scale = isCounts ? 1 / nPairs : 1;
    if (isCounts && renormalized && p > 0) scale *= Math.pow(1 - p, -t);
    out.push(row.map((v) => v * scale));
  }
  return out;
}

export interface SliceProfile {
  zOffsets: number[];
  columns: Record<string, number[]>;
}

/** Profile CSV from the `slice` subcommand: z_offset plus named series. */
export function readSliceCsv(path: string): SliceProfile {
  const text = readFileSync(path, 'utf8');
  const lines = text.split('\n').filter((l) => l.length > 0);
  const names = lines[0].split(',');
  if (names[0] !== 'z_offset' || names.length < 2) {
    throw new Error(`${path}: not a slice profile file`);
  }
  const zOffsets: number[] = [];
  const columns: Record<string, number[]> = {};
  for (const n of names.slice(1)) columns[n] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split(',').map(Number);
    if (parts.length !== names.length || parts.some((v) => Number.isNaN(v))) {
      throw new Error(`${path}: malformed data row`);
    }
    zOffsets.push(parts[0]);
    names.slice(1).forEach((n, i) => columns[n].push(parts[1 + i]));
  }
  return { zOffsets, columns };
}

export function assertSameShape(a: Grid, b: Grid): void {
  if (a.nSites !== b.nSites) {
    throw new Error(
      `lattice shape mismatch: ${a.nSites} vs ${b.nSites} sites`,
    );
  }
}
