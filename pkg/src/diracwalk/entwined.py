"""Entwined-pair sampling and signed charge deposition.

A pair is one forward walk plus its time-reversed return walk.  The forward
leg is a Kac-style walk whose corner events alternate between actually
turning and leaving a marker ("the stutter"); it ends at the first marker at
or after the reversal time t_R.  The return leg descends from that marker
back to the origin: within each loop (the span between consecutive markers)
it is the forward leg's segment sequence traversed in reverse order.  This
makes both legs meet at every marker and close exactly at the origin, and it
makes either outer envelope of the braid an ordinary Kac walk.

Charge is tallied per envelope, not per leg: the two envelopes swap leg
identity at every marker crossing, so each envelope carries +1 where it
covers the forward leg and -1 where it covers the return leg.  Under this
bookkeeping the ensemble mean of the tallies on fully-covered slices equals
the deterministic four-state evolution of ``dirac`` exactly, with envelope
one occupying channels (1, 2) and envelope two channels (3, 4); per slice
the net charge of a pair is always zero (one +1 and one -1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator

from .lattice import (
    ChargeGrid,
    InconsistentReturnError,
    LatticeError,
    LatticeSpec,
)
from .streams import BLOCK_SIZE, KIND_PAIR_BLOCK, block_uniforms, coerce_stream

TURN_FIRST = "turn-first"
MARK_FIRST = "mark-first"
DEFAULT_PHASE = MARK_FIRST

_MAX_ATTEMPTS = 10_000


class NoReversalError(RuntimeError):
    """No marker occurred at or after t_R within the step horizon."""


class PairState(enum.IntEnum):
    """Channel tags for the four (envelope, direction) states of a pair.

    "Forward"/"return" name the envelope by the leg it covers at t = 0; the
    envelopes exchange leg identity at every marker crossing, carrying +1
    while covering the forward leg and -1 while covering the return leg.
    The four resulting sign quadruples over the channels are the four
    states an entwined pair can occupy.
    """

    FORWARD_RIGHT = 1
    FORWARD_LEFT = 2
    RETURN_RIGHT = 3
    RETURN_LEFT = 4


@dataclass(frozen=True)
class EntwinedPath:
    """One accepted pair, in site offsets relative to the origin.

    Leg rows are (z_offset, t_step, direction) where the direction is that
    of the segment arriving at the row's slice (row t = 0 carries the leg's
    initial direction).  ``return_leg`` is ordered from the reversal point
    back down to the origin.
    """

    forward_leg: np.ndarray
    markers: np.ndarray
    reversal: tuple[int, int]
    return_leg: np.ndarray
    stutter_phase: str

    @property
    def n_slices(self) -> int:
        return self.forward_leg.shape[0]


def _phase_parity(stutter_phase: str) -> int:
    if stutter_phase == TURN_FIRST:
        return 1
    if stutter_phase == MARK_FIRST:
        return 0
    raise ValueError(f"unknown stutter_phase {stutter_phase!r}")


def reversal_step(t_r: float, dt: float) -> int:
    """Smallest step index whose time is at or after t_r."""
    return max(0, int(math.ceil(t_r / dt - 1e-9)))


def _construct_batch(
    events: np.ndarray,
    k_r: int,
    stutter_phase: str,
    initial_direction: int,
) -> dict[str, np.ndarray]:
    """Trace forward legs, reversals and reflected return legs for a batch.

    ``events`` is a boolean (rows, n_max) matrix of corner events.  Returns
    per-row arrays; rows without a qualifying marker are flagged rejected
    and carry no other data.
    """
    rows, n_max = events.shape
    ordinal = np.cumsum(events, axis=1)
    turn_parity = _phase_parity(stutter_phase)
    turn_mask = events & (ordinal % 2 == turn_parity)
    mark_mask = events & ~turn_mask

    # Direction of segment s (slice s -> s+1); an event at trial s acts at
    # the slice-s point, before that segment is walked.
    d = np.where(np.cumsum(turn_mask, axis=1) % 2 == 0, 1, -1) * initial_direction
    z = np.concatenate(
        [np.zeros((rows, 1), dtype=np.int64), np.cumsum(d, axis=1)], axis=1
    )

    qualifying = mark_mask.copy()
    qualifying[:, :k_r] = False
    accepted = qualifying.any(axis=1)
    tau = np.where(accepted, np.argmax(qualifying, axis=1), -1)

    return {
        "accepted": accepted,
        "tau": tau,
        "d": d,
        "z": z,
        "mark_mask": mark_mask,
    }


def _return_directions(
    d: np.ndarray, mark_mask: np.ndarray, tau: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reflected return-leg segment directions for accepted rows.

    Returns (e, loop_id, bounds): segment directions of the return leg,
    the loop index of every forward segment, and the padded marker-slice
    boundary table (column 0 is the origin, last used column is tau).
    """
    rows, n_max = d.shape
    seg_idx = np.arange(n_max)
    used_marks = mark_mask & (seg_idx[None, :] <= tau[:, None])
    # loop_id of segment s counts markers at slices <= s.
    loop_id = np.cumsum(used_marks, axis=1)

    n_marks = used_marks.sum(axis=1)
    bounds = np.zeros((rows, int(n_marks.max()) + 1), dtype=np.int64)
    r_idx, s_idx = np.nonzero(used_marks)
    bounds[r_idx, loop_id[r_idx, s_idx]] = s_idx

    valid_seg = seg_idx[None, :] < tau[:, None]
    lid = np.where(valid_seg, loop_id, 0)
    lower = np.take_along_axis(bounds, lid, axis=1)
    upper = np.take_along_axis(bounds, np.minimum(lid + 1, bounds.shape[1] - 1), axis=1)
    sigma = np.where(valid_seg, lower + upper - 1 - seg_idx[None, :], 0)
    e = np.take_along_axis(d, sigma, axis=1)
    return e, loop_id, bounds


def _initial_return_direction(stutter_phase: str, initial_direction: int) -> int:
    # With a leading turn the first loop holds one turn, so the return leg
    # leaves the origin opposite to the forward leg; with a leading marker
    # the first loop is straight and both legs leave together.
    return -initial_direction if stutter_phase == TURN_FIRST else initial_direction


def sample_entwined_pair(
    seed_or_stream: int | Generator,
    spec: LatticeSpec,
    t_r: float,
    n_max: int | None = None,
    stutter_phase: str = DEFAULT_PHASE,
    initial_direction: int = +1,
) -> EntwinedPath:
    """Sample one entwined pair; deterministic given the stream.

    Raises ``NoReversalError`` when no marker occurs at or after t_r within
    n_max steps (callers resample) and ``InconsistentReturnError`` if the
    constructed return leg fails to close on the origin or to pass through
    every marker (a construction bug, never to be resampled away).
    """
    if n_max is None:
        n_max = spec.n_steps
    if not 1 <= n_max <= spec.n_steps:
        raise ValueError("n_max must be in 1..spec.n_steps")
    if not 0 <= t_r < n_max * spec.dt:
        raise ValueError("t_r must satisfy 0 <= t_r < n_max*dt")
    if initial_direction not in (+1, -1):
        raise ValueError("initial_direction must be +1 or -1")
    gen = coerce_stream(seed_or_stream)
    events = (gen.random((1, n_max)) < spec.p)
    k_r = reversal_step(t_r, spec.dt)
    batch = _construct_batch(events, k_r, stutter_phase, initial_direction)
    if not batch["accepted"][0]:
        raise NoReversalError(
            f"no marker at or after step {k_r} within {n_max} steps"
        )
    tau = int(batch["tau"][0])
    d = batch["d"]
    z = batch["z"]
    e, _, _ = _return_directions(d, batch["mark_mask"], batch["tau"])
    y = np.concatenate([[0], np.cumsum(e[0, :tau])]) if tau > 0 else np.zeros(1, dtype=np.int64)

    mark_slices = np.flatnonzero(batch["mark_mask"][0, : tau + 1])
    _verify_return(z[0, : tau + 1], y, mark_slices)

    t_steps = np.arange(tau + 1)
    fwd_dirs = np.concatenate([[initial_direction], d[0, :tau]])
    e_init = _initial_return_direction(stutter_phase, initial_direction)
    ret_dirs = np.concatenate([[e_init], e[0, :tau]])
    forward_leg = np.stack([z[0, : tau + 1], t_steps, fwd_dirs], axis=1)
    return_leg = np.stack([y, t_steps, ret_dirs], axis=1)[::-1]
    markers = np.stack([z[0, mark_slices], mark_slices], axis=1)
    return EntwinedPath(
        forward_leg=forward_leg.astype(np.int64),
        markers=markers.astype(np.int64),
        reversal=(int(z[0, tau]), tau),
        return_leg=return_leg.astype(np.int64),
        stutter_phase=stutter_phase,
    )


def _verify_return(z: np.ndarray, y: np.ndarray, mark_slices: np.ndarray) -> None:
    if y.shape != z.shape or y[0] != 0:
        raise InconsistentReturnError("return leg does not span 0..t_reversal")
    if y[-1] != z[-1]:
        raise InconsistentReturnError("return leg misses the reversal point")
    if not np.array_equal(y[mark_slices], z[mark_slices]):
        raise InconsistentReturnError("return leg does not pass through a marker")


def _channel(block: np.ndarray | int, direction: np.ndarray | int) -> np.ndarray:
    """0-based channel index for envelope block (0/1) and direction (+1/-1)."""
    return 2 * np.asarray(block) + (np.asarray(direction) < 0)


def deposit_charge(path: EntwinedPath, grid: ChargeGrid) -> ChargeGrid:
    """Tally +1 along the forward leg and -1 along the return leg.

    Channels are assigned per envelope: the envelope identity of each leg
    swaps at every marker slice.  The grid is updated in place and returned.
    """
    n_ch, n_sites, n_slices = grid.shape
    origin = (n_sites - 1) // 2
    tau = path.reversal[1]
    if tau + 1 > n_slices:
        raise LatticeError("path extends past the grid's time horizon")

    z_f = path.forward_leg[:, 0] + origin
    z_r = path.return_leg[::-1][:, 0] + origin
    if (z_f < 0).any() or (z_f >= n_sites).any() or (z_r < 0).any() or (z_r >= n_sites).any():
        raise LatticeError("path leaves the spatial grid")

    d_in = path.forward_leg[:, 2]
    e_in = path.return_leg[::-1][:, 2]
    t_idx = np.arange(tau + 1)

    # parity of segment k-1 = number of markers at slices <= k-1, mod 2;
    # slice 0 sits before any marker by construction.
    mark_slices = path.markers[:, 1]
    parity = np.zeros(tau + 1, dtype=np.int64)
    if tau > 0:
        seg = np.arange(tau)
        parity[1:] = (mark_slices[None, :] <= seg[:, None]).sum(axis=1) % 2

    ch_f = _channel(parity, d_in)
    ch_r = _channel(1 - parity, e_in)
    np.add.at(grid.counts, (ch_f, z_f, t_idx), 1)
    np.add.at(grid.counts, (ch_r, z_r, t_idx), -1)
    return grid


def _deposit_batch(
    counts: np.ndarray,
    origin: int,
    batch: dict[str, np.ndarray],
    e: np.ndarray,
    loop_id: np.ndarray,
    e_init: int,
    initial_direction: int,
) -> None:
    """Vectorised envelope deposits for the accepted rows of one batch."""
    tau = batch["tau"]
    d = batch["d"]
    z = batch["z"]
    rows, n_max = d.shape
    if rows == 0:
        return
    max_tau = int(tau.max())

    y = np.concatenate(
        [np.zeros((rows, 1), dtype=np.int64), np.cumsum(e, axis=1)], axis=1
    )
    bad = y[np.arange(rows), tau] != z[np.arange(rows), tau]
    if bad.any():
        raise InconsistentReturnError("return leg misses the reversal point")

    k = np.arange(1, max_tau + 1)
    valid = k[None, :] <= tau[:, None]
    r_idx, k_idx = np.nonzero(valid)
    seg = k_idx  # segment k-1 at 0-based column k-1 of d/e; k starts at 1
    par = loop_id[r_idx, seg]
    d_in = d[r_idx, seg]
    e_in = e[r_idx, seg]
    t_out = k_idx + 1
    np.add.at(
        counts,
        (_channel(par % 2, d_in), z[r_idx, t_out] + origin, t_out),
        1,
    )
    np.add.at(
        counts,
        (_channel(1 - par % 2, e_in), y[r_idx, t_out] + origin, t_out),
        -1,
    )
    # Slice 0: every pair deposits its initial state at the origin.
    counts[_channel(0, initial_direction), origin, 0] += rows
    counts[_channel(1, e_init), origin, 0] -= rows


def _run_blocks(
    seed: int,
    first_block: int,
    n_pairs: int,
    spec: LatticeSpec,
    t_r: float,
    n_max: int,
    stutter_phase: str,
    initial_direction: int,
) -> ChargeGrid:
    """Accumulate ``n_pairs`` pairs drawn from blocks first_block, first_block+1, ..."""
    grid = ChargeGrid.empty(spec)
    origin = spec.origin_index
    k_r = reversal_step(t_r, spec.dt)
    e_init = _initial_return_direction(stutter_phase, initial_direction)

    remaining = n_pairs
    block = first_block
    while remaining > 0:
        rows = min(BLOCK_SIZE, remaining)
        pending = np.ones(rows, dtype=bool)
        attempt = 0
        while pending.any():
            if attempt >= _MAX_ATTEMPTS:
                raise NoReversalError(
                    f"pairs failed to reverse after {_MAX_ATTEMPTS} attempts; "
                    "t_r is too close to the step horizon for this flip rate"
                )
            u = block_uniforms(
                seed, KIND_PAIR_BLOCK, block, attempt, (BLOCK_SIZE, n_max)
            )
            events = u[:rows][pending] < spec.p
            batch = _construct_batch(events, k_r, stutter_phase, initial_direction)
            newly = batch["accepted"]
            grid.n_rejected += int((~newly).sum())
            if newly.any():
                acc = {
                    key: val[newly]
                    for key, val in batch.items()
                    if key != "accepted"
                }
                e, loop_id, _ = _return_directions(
                    acc["d"], acc["mark_mask"], acc["tau"]
                )
                _deposit_batch(
                    grid.counts, origin, acc, e, loop_id, e_init, initial_direction
                )
                still = np.flatnonzero(pending)
                pending[still[newly]] = False
            attempt += 1
        grid.n_pairs += rows
        remaining -= rows
        block += 1
    return grid


def _worker(args) -> ChargeGrid:
    return _run_blocks(*args)


def run_ensemble(
    seed: int,
    n_pairs: int,
    spec: LatticeSpec,
    t_r: float,
    n_max: int | None = None,
    stutter_phase: str = DEFAULT_PHASE,
    initial_direction: int = +1,
    workers: int = 1,
) -> ChargeGrid:
    """Accumulate the signed deposits of ``n_pairs`` accepted pairs.

    Pair i always draws from the keyed stream of its global index, and
    rejected draws resample from that pair's own attempt blocks, so the
    tallies are bit-identical for any worker count or partitioning.
    Rejections are counted on the returned grid's ``n_rejected``.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    if n_max is None:
        n_max = spec.n_steps
    if not 1 <= n_max <= spec.n_steps:
        raise ValueError("n_max must be in 1..spec.n_steps")
    if not 0 <= t_r < n_max * spec.dt:
        raise ValueError("t_r must satisfy 0 <= t_r < n_max*dt")
    if initial_direction not in (+1, -1):
        raise ValueError("initial_direction must be +1 or -1")
    _phase_parity(stutter_phase)

    if workers <= 1 or n_pairs <= BLOCK_SIZE:
        return _run_blocks(
            seed, 0, n_pairs, spec, t_r, n_max, stutter_phase, initial_direction
        )

    import multiprocessing as mp

    n_blocks = (n_pairs + BLOCK_SIZE - 1) // BLOCK_SIZE
    per_worker = (n_blocks + workers - 1) // workers
    tasks = []
    for w in range(workers):
        b0 = w * per_worker
        if b0 >= n_blocks:
            break
        pairs_before = b0 * BLOCK_SIZE
        pairs_here = min(n_pairs - pairs_before, per_worker * BLOCK_SIZE)
        if pairs_here <= 0:
            break
        tasks.append(
            (seed, b0, pairs_here, spec, t_r, n_max, stutter_phase,
             initial_direction)
        )
    ctx = mp.get_context("fork")
    with ctx.Pool(processes=len(tasks)) as pool:
        parts = pool.map(_worker, tasks)
    total = ChargeGrid.empty(spec)
    for part in parts:
        total.counts += part.counts
        total.n_pairs += part.n_pairs
        total.n_rejected += part.n_rejected
    return total
