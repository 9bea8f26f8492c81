"""Command-line front end.

Subcommands::

    kac-evolve       two-channel density evolution -> CSV history
    dirac-evolve     four-state scheme / discrete propagator -> CSV history
    entwined-sample  Monte Carlo charge grid -> CSV tallies
    compare          sampled grid vs reference propagator -> metrics JSON
    slice            spatial profile at one time slice -> CSV
    residuals        telegraph / dirac / klein-gordon convergence -> JSON

Configuration comes from a flat key=value file (``--config``) overridden by
command-line flags.  Stochastic commands require an explicit --seed; there
is no wall-clock default, and fixed inputs give byte-identical outputs
regardless of --workers.

Exit codes: 0 success, 2 configuration error, 3 I/O or file-format error,
4 internal consistency failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import gridio
from .analysis import (
    compare_grids,
    mc_standard_error,
    occupancy_history,
    residual_convergence,
    time_slice,
)
from .dirac import EvolutionMode, dirac_propagator, evolve_dirac
from .entwined import (
    DEFAULT_PHASE,
    MARK_FIRST,
    TURN_FIRST,
    NoReversalError,
    reversal_step,
    run_ensemble,
)
from .kac import evolve_kac
from .lattice import (
    InconsistentReturnError,
    LatticeError,
    LatticeSpec,
    delta_init_four,
    delta_init_two,
    make_lattice,
)
from .analysis import gaussian_four_field, gaussian_two_field

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4


class ConfigError(ValueError):
    pass


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _parse_channel_map(text: str | None) -> dict[int, int] | None:
    if not text:
        return None
    out: dict[int, int] = {}
    try:
        for item in text.split(","):
            src, _, dst = item.partition(":")
            out[int(src)] = int(dst)
    except ValueError as exc:
        raise ConfigError(f"bad channel map {text!r}: {exc}") from exc
    return out


def _parse_components(text: str) -> tuple[int, ...]:
    try:
        comps = tuple(int(c) for c in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad components {text!r}") from exc
    if not comps or any(c not in (1, 2, 3, 4) for c in comps):
        raise ConfigError(f"components must be from 1..4, got {text!r}")
    return comps


def _parse_region(text: str):
    if text == "half-cone":
        return text
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"region must be an integer radius or 'half-cone'") from exc


def _spec_from_args(args) -> LatticeSpec:
    return make_lattice(
        dz=args.dz, dt=args.dt, c=args.c, a=args.a,
        z_extent=args.extent, n_steps=args.steps,
    )


def _config_echo(args, spec: LatticeSpec) -> dict:
    echo = {
        "dz": spec.dz, "dt": spec.dt, "c": spec.c, "a": spec.a,
        "extent": spec.z_max, "steps": spec.n_steps,
    }
    for key in ("seed", "pairs", "t_reversal", "stutter_phase", "mode",
                "workers", "source_state", "init", "init_width",
                "initial_direction"):
        if hasattr(args, key) and getattr(args, key) is not None:
            echo[key] = getattr(args, key)
    return echo


def cmd_kac_evolve(args) -> int:
    spec = _spec_from_args(args)
    if args.init == "gaussian":
        width = args.init_width if args.init_width else 8 * spec.dz
        init = gaussian_two_field(spec, width)
    else:
        direction = +1 if args.init == "delta-plus" else -1
        init = delta_init_two(spec, spec.origin_index, direction)
    history = evolve_kac(init, spec, spec.n_steps)
    gridio.write_two_history(args.out, history, spec, {
        "command": "kac-evolve", "config": _config_echo(args, spec),
    })
    return EXIT_OK


def cmd_dirac_evolve(args) -> int:
    spec = _spec_from_args(args)
    mode = EvolutionMode(args.mode)
    if args.init == "gaussian":
        width = args.init_width if args.init_width else 8 * spec.dz
        init = gaussian_four_field(spec, width, args.source_state)
        evo = evolve_dirac(init, spec, spec.n_steps, mode)
    else:
        evo = dirac_propagator(spec, spec.n_steps, args.source_state, mode)
    gridio.write_four_history(args.out, evo, {
        "command": "dirac-evolve", "config": _config_echo(args, spec),
    })
    return EXIT_OK


def cmd_entwined_sample(args) -> int:
    spec = _spec_from_args(args)
    if args.seed is None:
        raise ConfigError("entwined-sample requires an explicit --seed")
    if args.t_reversal is None:
        raise ConfigError("entwined-sample requires --t-reversal")
    grid = run_ensemble(
        seed=args.seed,
        n_pairs=args.pairs,
        spec=spec,
        t_r=args.t_reversal,
        stutter_phase=args.stutter_phase,
        initial_direction=args.initial_direction,
        workers=args.workers,
    )
    gridio.write_charge_grid(args.out, grid, spec, {
        "command": "entwined-sample",
        "config": _config_echo(args, spec),
        "rejection_rate": grid.n_rejected / max(grid.n_pairs + grid.n_rejected, 1),
    })
    return EXIT_OK


def cmd_compare(args) -> int:
    sampled, spec, meta = gridio.read_charge_grid(args.sampled)
    if args.reference:
        reference, _ = gridio.read_four_history(args.reference)
    else:
        t_r = meta.get("config", {}).get("t_reversal")
        if args.ref_steps is not None:
            n_ref = args.ref_steps
        elif t_r is not None:
            n_ref = reversal_step(float(t_r), spec.dt)
        else:
            raise ConfigError("need --ref-steps or a sampled grid with t_reversal")
        reference = dirac_propagator(
            spec, n_ref, args.source_state, EvolutionMode(args.mode)
        )
    report = compare_grids(
        sampled,
        reference,
        region=_parse_region(args.region),
        channel_map=_parse_channel_map(args.channel_map),
        components=_parse_components(args.components),
    )
    payload = gridio.as_json_ready({
        "command": "compare",
        "sampled": args.sampled,
        "reference": args.reference or "computed in-process",
        "region": report.region,
        "components": report.components,
        "channel_map": args.channel_map,
        "correlation": report.correlation,
        "spearman_error_vs_z": report.spearman_error_vs_z,
        "per_slice_l2": report.per_slice_l2,
        "error_profile": report.error_profile,
        "profile_offsets": report.profile_offsets,
        "n_pairs": report.n_pairs,
        "n_slices": report.n_slices,
        "normalization": report.normalization,
    })
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def cmd_slice(args) -> int:
    meta = gridio.read_sidecar(args.input)
    kind = meta.get("kind")
    components = _parse_components(args.components)
    columns: dict[str, np.ndarray] = {}
    if kind == "charge_grid":
        grid, spec, _ = gridio.read_charge_grid(args.input)
        offsets, profile = time_slice(grid, args.t, components)
        columns["sampled"] = profile
        ref_scalar = None
        if args.reference:
            reference, _ = gridio.read_four_history(args.reference)
            r_off, r_prof = time_slice(reference, args.t, components)
            if r_off.shape != offsets.shape:
                raise gridio.GridFormatError("reference grid width mismatch")
            columns["reference"] = r_prof
            ref_scalar = r_prof
        if args.with_se:
            phase = meta.get("config", {}).get("stutter_phase", DEFAULT_PHASE)
            d0 = int(meta.get("config", {}).get("initial_direction", 1))
            occ = occupancy_history(spec, args.t, phase, d0)[args.t]
            occ_scalar = occ[[c - 1 for c in components]].sum(axis=0)
            ref_term = ref_scalar if ref_scalar is not None else np.zeros_like(occ_scalar)
            columns["se"] = mc_standard_error(occ_scalar, ref_term, grid.n_pairs)
    elif kind == "four_history":
        evolution, _ = gridio.read_four_history(args.input)
        offsets, profile = time_slice(evolution, args.t, components)
        columns["value"] = profile
    elif kind == "two_history":
        history, _ = gridio.read_two_history(args.input)
        two_comps = tuple(c for c in components if c in (1, 2))
        offsets, profile = time_slice(history, args.t, two_comps or (1, 2))
        columns["value"] = profile
    else:
        raise gridio.GridFormatError(f"unknown grid kind {kind!r}")
    gridio.write_slice_csv(args.out, offsets, columns, {
        "command": "slice", "t": args.t, "components": list(components),
        "source": args.input,
    })
    return EXIT_OK


def cmd_residuals(args) -> int:
    spec = _spec_from_args(args)
    width = args.init_width if args.init_width else 8 * spec.dz
    kinds = (
        ["telegraph", "dirac", "klein_gordon"]
        if args.which == "all" else [args.which.replace("-", "_")]
    )
    results = {}
    for kind in kinds:
        rep = residual_convergence(kind, spec, args.t_final, width)
        results[kind] = {
            "global_norm": rep.global_norm,
            "convergence_ratio": rep.convergence_ratio,
            "per_slice_norms": rep.norms,
            "dz": rep.dz,
            "dt": rep.dt,
        }
    payload = gridio.as_json_ready({
        "command": "residuals",
        "config": _config_echo(args, spec),
        "t_final": args.t_final,
        "init_width": width,
        "results": results,
    })
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def _add_lattice_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dz", type=float, default=0.25, help="spatial spacing")
    p.add_argument("--dt", type=float, default=0.25, help="time spacing (c*dt must equal dz)")
    p.add_argument("--c", type=float, default=1.0, help="walker speed")
    p.add_argument("--a", type=float, default=1.0, help="scattering rate (mass)")
    p.add_argument("--extent", type=float, default=15.0, help="half-width of the grid")
    p.add_argument("--steps", type=int, default=60, help="lattice time horizon")
    p.add_argument("--config", type=str, default=None,
                   help="flat key=value file; flags override its entries")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diracwalk",
        description="Lattice walks, entwined pairs and the discrete Dirac propagator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kac-evolve", help="two-channel density evolution")
    _add_lattice_args(p)
    p.add_argument("--init", choices=["delta-plus", "delta-minus", "gaussian"],
                   default="delta-plus")
    p.add_argument("--init-width", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kac_evolve)

    p = sub.add_parser("dirac-evolve", help="four-state scheme / propagator")
    _add_lattice_args(p)
    p.add_argument("--source-state", type=int, choices=[1, 2, 3, 4], default=1)
    p.add_argument("--mode", choices=["raw", "renormalized"], default="raw")
    p.add_argument("--init", choices=["delta", "gaussian"], default="delta")
    p.add_argument("--init-width", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dirac_evolve)

    p = sub.add_parser("entwined-sample", help="Monte Carlo charge grid")
    _add_lattice_args(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--pairs", type=int, default=100_000)
    p.add_argument("--t-reversal", type=float, default=None)
    p.add_argument("--stutter-phase", choices=[TURN_FIRST, MARK_FIRST],
                   default=DEFAULT_PHASE)
    p.add_argument("--initial-direction", type=int, choices=[1, -1], default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_entwined_sample)

    p = sub.add_parser("compare", help="sampled grid vs reference propagator")
    p.add_argument("--sampled", required=True)
    p.add_argument("--reference", default=None,
                   help="four-channel history CSV; computed in-process if omitted")
    p.add_argument("--ref-steps", type=int, default=None)
    p.add_argument("--source-state", type=int, choices=[1, 2, 3, 4], default=1)
    p.add_argument("--mode", choices=["raw", "renormalized"], default="raw")
    p.add_argument("--region", default="half-cone",
                   help="integer |z| radius in sites, or 'half-cone'")
    p.add_argument("--channel-map", default=None,
                   help="e.g. '1:1,2:-2,3:3,4:4' (negative flips sign)")
    p.add_argument("--components", default="1,2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("slice", help="spatial profile at one time slice")
    p.add_argument("--input", required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--components", default="1,2")
    p.add_argument("--reference", default=None,
                   help="four-channel history CSV to add a reference column")
    p.add_argument("--with-se", action="store_true",
                   help="add a Monte Carlo standard error column (charge grids)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("residuals", help="continuum-limit convergence checks")
    _add_lattice_args(p)
    p.add_argument("--which",
                   choices=["telegraph", "dirac", "klein-gordon", "all"],
                   default="all")
    p.add_argument("--t-final", type=float, default=2.0)
    p.add_argument("--init-width", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_residuals)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Fold --config file values in as defaults for the chosen subcommand."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ConfigError("--config needs a file path")
    values = _load_config_file(argv[idx + 1])
    # Insert file values right after the subcommand so explicit flags win.
    flags: list[str] = []
    for key, val in values.items():
        flag = "--" + key.replace("_", "-")
        if val.lower() in ("true", "false"):
            if val.lower() == "true":
                flags.append(flag)
        else:
            flags.extend([flag, val])
    return argv[:1] + flags + argv[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except gridio.GridFormatError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, LatticeError, NoReversalError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InconsistentReturnError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
