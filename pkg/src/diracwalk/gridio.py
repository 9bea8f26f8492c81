"""CSV grid files and JSON metadata sidecars.

Grid CSV format: header row, then one row per (t, z) in t-major, z-ascending
order.  Two-channel histories use ``t,z,fplus,fminus``; four-channel
histories and charge grids use ``t,z,ch1,ch2,ch3,ch4``.  Values are written
with 17 significant digits so float64 grids round-trip bit-exactly; charge
grids hold integer tallies.

Every writer also emits ``<path>.meta.json``, a sidecar with the producing
command's full configuration, enough to re-run it.  Sidecars are serialized
with sorted keys and no timestamps, so identical runs produce byte-identical
files.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict

import numpy as np

from .dirac import DiracEvolution, EvolutionMode
from .lattice import ChargeGrid, FourField, LatticeSpec, ShapeMismatchError, TwoField

FOUR_HEADER = "t,z,ch1,ch2,ch3,ch4"
TWO_HEADER = "t,z,fplus,fminus"


class GridFormatError(ValueError):
    """A grid CSV or its sidecar is malformed or of the wrong kind."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def sidecar_path(path: str) -> str:
    return path + ".meta.json"


def write_sidecar(path: str, meta: dict) -> None:
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sidecar(path: str) -> dict:
    with open(sidecar_path(path), encoding="utf-8") as fh:
        return json.load(fh)


def spec_meta(spec: LatticeSpec) -> dict:
    return {
        "dz": spec.dz,
        "dt": spec.dt,
        "c": spec.c,
        "a": spec.a,
        "z_extent": spec.z_max,
        "n_steps": spec.n_steps,
    }


def spec_from_meta(meta: dict) -> LatticeSpec:
    from .lattice import make_lattice

    s = meta["spec"]
    return make_lattice(
        dz=s["dz"], dt=s["dt"], c=s["c"], a=s["a"],
        z_extent=s["z_extent"], n_steps=s["n_steps"],
        enforce_light_cone=False,
    )


def write_two_history(path: str, history: list[TwoField], spec: LatticeSpec,
                      meta: dict) -> None:
    z = spec.z_coords()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TWO_HEADER + "\n")
        for t, frame in enumerate(history):
            for i in range(spec.n_sites):
                fh.write(
                    f"{t},{_fmt(z[i])},{_fmt(frame.f_plus[i])},{_fmt(frame.f_minus[i])}\n"
                )
    write_sidecar(path, {"kind": "two_history", "spec": spec_meta(spec),
                         "n_slices": len(history), **meta})


def write_four_history(path: str, evolution: DiracEvolution, meta: dict) -> None:
    spec = evolution.spec
    z = spec.z_coords()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(FOUR_HEADER + "\n")
        for t, frame in enumerate(evolution.slices):
            stacked = frame.stack()
            for i in range(spec.n_sites):
                vals = ",".join(_fmt(stacked[c, i]) for c in range(4))
                fh.write(f"{t},{_fmt(z[i])},{vals}\n")
    write_sidecar(path, {
        "kind": "four_history",
        "spec": spec_meta(spec),
        "mode": evolution.mode.value,
        "n_slices": len(evolution),
        **meta,
    })


def write_charge_grid(path: str, grid: ChargeGrid, spec: LatticeSpec,
                      meta: dict) -> None:
    z = spec.z_coords()
    n_slices = grid.shape[2]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(FOUR_HEADER + "\n")
        for t in range(n_slices):
            for i in range(spec.n_sites):
                vals = ",".join(str(int(grid.counts[c, i, t])) for c in range(4))
                fh.write(f"{t},{_fmt(z[i])},{vals}\n")
    write_sidecar(path, {
        "kind": "charge_grid",
        "spec": spec_meta(spec),
        "n_pairs": grid.n_pairs,
        "n_rejected": grid.n_rejected,
        "n_slices": n_slices,
        **meta,
    })


def _read_rows(path: str, expected_header: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != expected_header:
            raise GridFormatError(
                f"{path}: expected header {expected_header!r}, found {header!r}"
            )
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise GridFormatError(f"{path}: no data rows")
    t = data[:, 0].astype(np.int64)
    z = data[:, 1]
    return t, z, data[:, 2:]


def _grid_shape(t: np.ndarray, z: np.ndarray) -> tuple[int, int]:
    n_slices = int(t.max()) + 1
    n_sites = np.count_nonzero(t == 0)
    if n_slices * n_sites != t.shape[0]:
        raise GridFormatError("ragged grid file: rows do not fill (t, z) lattice")
    return n_slices, n_sites


def read_two_history(path: str) -> tuple[list[TwoField], dict]:
    t, z, vals = _read_rows(path, TWO_HEADER)
    n_slices, n_sites = _grid_shape(t, z)
    fields = vals.reshape(n_slices, n_sites, 2)
    history = [
        TwoField(f_plus=fields[k, :, 0], f_minus=fields[k, :, 1], t_index=k)
        for k in range(n_slices)
    ]
    return history, read_sidecar(path)


def read_four_history(path: str) -> tuple[DiracEvolution, dict]:
    t, z, vals = _read_rows(path, FOUR_HEADER)
    n_slices, n_sites = _grid_shape(t, z)
    meta = read_sidecar(path)
    if meta.get("kind") != "four_history":
        raise GridFormatError(f"{path}: sidecar kind is not four_history")
    fields = vals.reshape(n_slices, n_sites, 4)
    slices = [
        FourField(fields[k, :, 0], fields[k, :, 1], fields[k, :, 2],
                  fields[k, :, 3], t_index=k)
        for k in range(n_slices)
    ]
    spec = spec_from_meta(meta)
    if spec.n_sites != n_sites:
        raise ShapeMismatchError(f"{path}: sidecar spec does not match grid width")
    evolution = DiracEvolution(
        slices=slices, mode=EvolutionMode(meta["mode"]), spec=spec
    )
    return evolution, meta


def read_charge_grid(path: str) -> tuple[ChargeGrid, LatticeSpec, dict]:
    t, z, vals = _read_rows(path, FOUR_HEADER)
    n_slices, n_sites = _grid_shape(t, z)
    meta = read_sidecar(path)
    if meta.get("kind") != "charge_grid":
        raise GridFormatError(f"{path}: sidecar kind is not charge_grid")
    counts = np.rint(vals).astype(np.int64).reshape(n_slices, n_sites, 4)
    counts = np.moveaxis(counts, (0, 1, 2), (2, 1, 0))
    grid = ChargeGrid(counts=counts, n_pairs=int(meta["n_pairs"]),
                      n_rejected=int(meta.get("n_rejected", 0)))
    spec = spec_from_meta(meta)
    if spec.n_sites != n_sites:
        raise ShapeMismatchError(f"{path}: sidecar spec does not match grid width")
    return grid, spec, meta


def write_slice_csv(path: str, offsets: np.ndarray, columns: dict[str, np.ndarray],
                    meta: dict) -> None:
    """Profile CSV: z_offset plus one column per named series."""
    names = list(columns)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("z_offset," + ",".join(names) + "\n")
        for i, off in enumerate(offsets):
            vals = ",".join(_fmt(float(columns[n][i])) for n in names)
            fh.write(f"{int(off)},{vals}\n")
    write_sidecar(path, {"kind": "slice_profile", "columns": names, **meta})


def as_json_ready(obj):
    """Recursively convert numpy scalars/arrays for json.dump."""
    if isinstance(obj, np.ndarray):
        return [as_json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: as_json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [as_json_ready(v) for v in obj]
    return obj
