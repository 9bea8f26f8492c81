/**
 * Figure renderer for simulator output.
 *
 *   node dist/cli.js contour --reference ref.csv --sampled grid.csv --out fig.png
 *                            [--components 1,2] [--region 15] [--cell-px 6]
 *   node dist/cli.js slice   --slice-csv slice.csv --out fig.png
 *                            [--band-scale 5]
 *   node dist/cli.js slice   --reference ref.csv --sampled grid.csv --t 15 --out fig.png
 *
 * Reads only the CSV grids / profiles and their JSON sidecars; all physics
 * lives upstream.  Exit codes: 0 ok, 2 bad arguments, 3 unreadable or
 * malformed input.
 */

import { readGrid, readSliceCsv } from './csv';
import { renderContour } from './contour';
import { renderSlice } from './slice';

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith('--')) throw new UsageError(`unexpected argument ${arg}`);
    const key = arg.slice(2);
    const val = argv[i + 1];
    if (val === undefined || val.startsWith('--')) {
      throw new UsageError(`flag ${arg} needs a value`);
    }
    out[key] = val;
    i++;
  }
  return out;
}

class UsageError extends Error {}

function components(args: Record<string, string>): number[] {
  const text = args['components'] ?? '1,2';
  const comps = text.split(',').map(Number);
  if (comps.length === 0 || comps.some((c) => ![1, 2, 3, 4].includes(c))) {
    throw new UsageError(`bad --components '${text}'`);
  }
  return comps;
}

function need(args: Record<string, string>, key: string): string {
  const v = args[key];
  if (v === undefined) throw new UsageError(`missing --${key}`);
  return v;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    const args = parseArgs(rest);
    if (command === 'contour') {
      renderContour({
        reference: readGrid(need(args, 'reference')),
        sampled: readGrid(need(args, 'sampled')),
        components: components(args),
        region: args['region'] !== undefined ? Number(args['region']) : undefined,
        cellPx: args['cell-px'] !== undefined ? Number(args['cell-px']) : undefined,
        out: need(args, 'out'),
      });
    } else if (command === 'slice') {
      if (args['slice-csv']) {
        renderSlice({
          profile: readSliceCsv(args['slice-csv']),
          components: components(args),
          bandScale: args['band-scale'] !== undefined ? Number(args['band-scale']) : undefined,
          out: need(args, 'out'),
        });
      } else {
        renderSlice({
          reference: readGrid(need(args, 'reference')),
          sampled: readGrid(need(args, 'sampled')),
          t: Number(need(args, 't')),
          components: components(args),
          bandScale: args['band-scale'] !== undefined ? Number(args['band-scale']) : undefined,
          out: need(args, 'out'),
        });
      }
    } else {
      throw new UsageError(`unknown command '${command ?? ''}' (use contour or slice)`);
    }
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 3;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
