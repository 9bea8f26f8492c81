#!/usr/bin/env python3
"""End-to-end run producing the propagator-comparison figure inputs.

Generates, into the output directory:

  reference.csv    discrete four-state propagator from a channel-1 delta
  sampled.csv      signed charge grid from N entwined pairs
  metrics.json     correlation / error-profile comparison of the two
  slice_t15.csv    spatial profile at lattice step 15 with error bars

All four files come from the ``diracwalk`` CLI, so this script is just the
recipe; rerunning it with the same seed reproduces every byte.  The
frontend renderer turns reference+sampled into the contour figure and
slice_t15 into the slice overlay:

  node frontend/dist/cli.js contour --reference out/reference.csv \
      --sampled out/sampled.csv --out out/contour.png
  node frontend/dist/cli.js slice --slice-csv out/slice_t15.csv \
      --out out/slice.png
"""

import argparse
import json
import pathlib
import sys

from diracwalk import cli

T_SLICE = 15


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out")
    ap.add_argument("--pairs", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=99)
    ap.add_argument("--workers", type=int, default=2)
    args = ap.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lattice = ["--dz", "0.25", "--dt", "0.25", "--c", "1", "--a", "1",
               "--extent", "15", "--steps", "60"]
    t_r = str(T_SLICE * 0.25)

    reference = out / "reference.csv"
    sampled = out / "sampled.csv"
    metrics = out / "metrics.json"
    profile = out / "slice_t15.csv"

    steps = [
        ["dirac-evolve", *lattice, "--source-state", "1", "--mode", "raw",
         "--out", str(reference)],
        ["entwined-sample", *lattice, "--seed", str(args.seed),
         "--pairs", str(args.pairs), "--t-reversal", t_r,
         "--stutter-phase", "turn-first", "--workers", str(args.workers),
         "--out", str(sampled)],
        ["compare", "--sampled", str(sampled), "--reference", str(reference),
         "--region", "half-cone", "--components", "1,2",
         "--out", str(metrics)],
        ["slice", "--input", str(sampled), "--t", str(T_SLICE),
         "--components", "1,2", "--reference", str(reference), "--with-se",
         "--out", str(profile)],
    ]
    for argv in steps:
        print("diracwalk", " ".join(argv))
        code = cli.main(argv)
        if code != 0:
            return code

    payload = json.loads(metrics.read_text())
    print(f"\ncorrelation on |z| <= t/2 : {payload['correlation']:.4f}")
    print(f"error-vs-|z| spearman     : {payload['spearman_error_vs_z']:.3f}")
    print(f"outputs in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
