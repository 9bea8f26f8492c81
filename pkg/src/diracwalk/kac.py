"""Kac persistent random walk: exact density evolution and path sampling.

The two-channel densities evolve by the conservation difference scheme

    F+_n(z) = (1 - a*dt) * F+_{n-1}(z - c*dt) + a*dt * F-_{n-1}(z)
    F-_n(z) = (1 - a*dt) * F-_{n-1}(z + c*dt) + a*dt * F+_{n-1}(z)

whose continuum limit is the telegraph system (see ``analysis``).  The
microscopic rule behind this scheme is: each step a walker either moves one
site along its heading (probability 1-p) or reverses its heading in place
(probability p).  The path sampler implements exactly that rule, so its
empirical densities converge to the deterministic evolution slice by slice;
a reversing step covers zero distance, which is invisible in the continuum
limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator

from .lattice import LatticeSpec, ShapeMismatchError, TwoField, shift
from .streams import BLOCK_SIZE, KIND_KAC_BLOCK, block_uniforms, coerce_stream


@dataclass(frozen=True)
class KacPath:
    """One sampled walk: per-step headings plus the flip-step indices.

    ``headings[k]`` is the walker's direction during step k (after the
    step's flip decision); on flip steps the walker stays in place, so the
    position change of step k is ``headings[k]`` on move steps and 0 on
    flip steps.
    """

    start_site: int
    initial_direction: int
    headings: np.ndarray
    flip_events: np.ndarray

    def positions(self) -> np.ndarray:
        """Site index at every slice 0..n (length n+1)."""
        moves = self.headings.copy()
        moves[self.flip_events] = 0
        return self.start_site + np.concatenate([[0], np.cumsum(moves)])

    @property
    def n_steps(self) -> int:
        return self.headings.shape[0]


def step_kac(field: TwoField, spec: LatticeSpec) -> TwoField:
    """Advance the two-channel density by one time step."""
    if field.n_sites != spec.n_sites:
        raise ShapeMismatchError(
            f"field has {field.n_sites} sites, lattice expects {spec.n_sites}"
        )
    p = spec.p
    f_plus = (1.0 - p) * shift(field.f_plus, +1) + p * field.f_minus
    f_minus = (1.0 - p) * shift(field.f_minus, -1) + p * field.f_plus
    return TwoField(f_plus=f_plus, f_minus=f_minus, t_index=field.t_index + 1)


def evolve_kac(init: TwoField, spec: LatticeSpec, n: int) -> list[TwoField]:
    """History [init, step(init), ..., step^n(init)] of length n+1."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > spec.n_steps:
        raise ValueError(
            f"n = {n} exceeds the lattice horizon n_steps = {spec.n_steps}; "
            "the light cone would exit the grid"
        )
    history = [init]
    for _ in range(n):
        history.append(step_kac(history[-1], spec))
    return history


def sample_kac_path(
    seed_or_stream: int | Generator,
    spec: LatticeSpec,
    n: int,
    initial_direction: int = +1,
) -> KacPath:
    """Sample one n-step walk; deterministic for a fixed seed or stream."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if initial_direction not in (+1, -1):
        raise ValueError("initial_direction must be +1 or -1")
    gen = coerce_stream(seed_or_stream)
    flips = gen.random(n) < spec.p
    headings = initial_direction * np.where(np.cumsum(flips) % 2 == 0, 1, -1)
    return KacPath(
        start_site=spec.origin_index,
        initial_direction=initial_direction,
        headings=headings.astype(np.int64),
        flip_events=np.flatnonzero(flips),
    )


def _batch_histogram(
    seed: int,
    block_index: int,
    n_rows: int,
    spec: LatticeSpec,
    n_steps: int,
    init_site: int,
    init_direction: int,
) -> np.ndarray:
    """Occupancy tallies (2, n_sites, n_steps+1) for one block of paths."""
    u = block_uniforms(seed, KIND_KAC_BLOCK, block_index, 0, (BLOCK_SIZE, n_steps))
    flips = u[:n_rows] < spec.p
    headings = init_direction * np.where(np.cumsum(flips, axis=1) % 2 == 0, 1, -1)
    moves = np.where(flips, 0, headings)
    sites = init_site + np.concatenate(
        [np.zeros((n_rows, 1), dtype=np.int64), np.cumsum(moves, axis=1)], axis=1
    )
    # Heading AT slice k is the heading of step k (post-flip); slice 0 keeps
    # the initial direction, matching the chain behind the difference scheme.
    slice_headings = np.concatenate(
        [np.full((n_rows, 1), init_direction, dtype=np.int64), headings], axis=1
    )
    counts = np.zeros((2, spec.n_sites, n_steps + 1), dtype=np.int64)
    t_idx = np.broadcast_to(np.arange(n_steps + 1), sites.shape)
    ch_idx = (slice_headings < 0).astype(np.int64)
    np.add.at(counts, (ch_idx.ravel(), sites.ravel(), t_idx.ravel()), 1)
    return counts


def kac_density_estimate(
    seed: int,
    n_paths: int,
    spec: LatticeSpec,
    n_steps: int,
    init_site: int | None = None,
    init_direction: int = +1,
) -> list[TwoField]:
    """Empirical per-slice occupancy frequencies from n_paths sampled walks.

    Each slice is normalised by n_paths, so slice sums are exactly 1 and the
    n_paths -> infinity limit is the ``evolve_kac`` history.  Paths draw from
    per-block keyed streams, so the result depends only on (seed, n_paths)
    and the fixed block size.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if n_steps > spec.n_steps:
        raise ValueError("n_steps exceeds the lattice horizon")
    if init_site is None:
        init_site = spec.origin_index
    if not (0 <= init_site < spec.n_sites):
        raise ValueError(f"init_site {init_site} outside grid")
    if init_site - n_steps < 0 or init_site + n_steps >= spec.n_sites:
        raise ValueError("light cone of the initial site would exit the grid")

    counts = np.zeros((2, spec.n_sites, n_steps + 1), dtype=np.int64)
    n_blocks = (n_paths + BLOCK_SIZE - 1) // BLOCK_SIZE
    for b in range(n_blocks):
        n_rows = min(BLOCK_SIZE, n_paths - b * BLOCK_SIZE)
        counts += _batch_histogram(
            seed, b, n_rows, spec, n_steps, init_site, init_direction
        )
    dens = counts / float(n_paths)
    return [
        TwoField(f_plus=dens[0, :, k], f_minus=dens[1, :, k], t_index=k)
        for k in range(n_steps + 1)
    ]
