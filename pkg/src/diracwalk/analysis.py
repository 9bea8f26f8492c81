"""Residual and convergence checks plus sampled-vs-deterministic comparison.

Residual operators insert a discrete history into the centered-difference
form of the continuum equations the schemes approach: the telegraph pair for
the two-channel walk, the real four-component first-order system for the
renormalized four-state scheme, and the second-order form (wave equation
with a mass term) for its individual components.  All three are first-order
accurate, so halving dt (and dz with it) should halve the residual norm.

``compare_grids`` measures how close a sampled charge grid is to the
deterministic propagator: global correlation over a window, per-slice L2
error, and a relative error profile against |z|.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dirac import DiracEvolution, EvolutionMode, dirac_propagator, evolve_dirac
from .entwined import TURN_FIRST, _initial_return_direction
from .kac import evolve_kac
from .lattice import (
    ChargeGrid,
    FourField,
    LatticeSpec,
    ShapeMismatchError,
    TwoField,
    delta_init_four,
    make_lattice,
    shift,
)

MARGIN = 2  # interior excludes this many sites at each spatial edge


@dataclass(frozen=True)
class ResidualReport:
    equation_tag: str
    norms: np.ndarray  # per-slice interior L2 norms (centered slices only)
    dz: float
    dt: float
    global_norm: float
    convergence_ratio: float | None = None


@dataclass(frozen=True)
class ComparisonReport:
    region: object
    components: tuple[int, ...]
    per_slice_l2: np.ndarray
    correlation: float
    error_profile: np.ndarray
    profile_offsets: np.ndarray
    spearman_error_vs_z: float
    n_pairs: int
    n_slices: int
    normalization: str


def _interior(n_sites: int) -> slice:
    return slice(MARGIN, n_sites - MARGIN)


def _centered_ops(stacked: np.ndarray, dz: float, dt: float):
    """Centered D_t and D_z of a (T, C, Z) history on interior points.

    Returns (val, d_t, d_z) arrays of shape (T-2, C, Z_int): the field and
    its centered differences on time slices 1..T-2 and interior sites.
    """
    n = stacked.shape[2]
    inner = _interior(n)
    val = stacked[1:-1, :, inner]
    d_t = (stacked[2:, :, inner] - stacked[:-2, :, inner]) / (2.0 * dt)
    right = stacked[1:-1, :, MARGIN + 1:n - MARGIN + 1]
    left = stacked[1:-1, :, MARGIN - 1:n - MARGIN - 1]
    d_z = (right - left) / (2.0 * dz)
    return val, d_t, d_z


def _norms(res: np.ndarray, dz: float, dt: float) -> tuple[np.ndarray, float]:
    """Per-slice spatial L2 norms and the space-time L2 norm.

    The global norm carries the dz*dt cell measure so values at different
    resolutions of the same physical window are comparable.
    """
    per_slice = np.sqrt((res ** 2).sum(axis=(1, 2)) * dz)
    return per_slice, float(np.sqrt((per_slice ** 2).sum() * dt))


def telegraph_residual(history: list[TwoField], spec: LatticeSpec) -> ResidualReport:
    """Centered residual of the telegraph pair on a two-channel history."""
    if len(history) < 3:
        raise ValueError("need at least 3 time slices for centered differences")
    stacked = np.stack([f.stack() for f in history])
    val, d_t, d_z = _centered_ops(stacked, spec.dz, spec.dt)
    a, c = spec.a, spec.c
    r_plus = d_t[:, 0] + c * d_z[:, 0] + a * val[:, 0] - a * val[:, 1]
    r_minus = d_t[:, 1] - c * d_z[:, 1] - a * val[:, 0] + a * val[:, 1]
    res = np.stack([r_plus, r_minus], axis=1)
    per_slice, total = _norms(res, spec.dz, spec.dt)
    return ResidualReport("telegraph", per_slice, spec.dz, spec.dt, total)


def dirac_residual(evolution: DiracEvolution) -> ResidualReport:
    """Residual of the real four-component first-order system.

    Only renormalized histories are accepted: the raw scheme carries the
    per-step decay that the first-order system has removed.
    """
    if evolution.mode is not EvolutionMode.RENORMALIZED:
        raise ValueError("dirac_residual requires a renormalized history")
    if len(evolution) < 3:
        raise ValueError("need at least 3 time slices for centered differences")
    spec = evolution.spec
    stacked = evolution.stack()
    val, d_t, d_z = _centered_ops(stacked, spec.dz, spec.dt)
    a, c = spec.a, spec.c
    res = np.stack(
        [
            d_t[:, 0] + c * d_z[:, 0] + a * val[:, 1],
            d_t[:, 1] - c * d_z[:, 1] - a * val[:, 0],
            d_t[:, 2] + c * d_z[:, 2] + a * val[:, 3],
            d_t[:, 3] - c * d_z[:, 3] - a * val[:, 2],
        ],
        axis=1,
    )
    per_slice, total = _norms(res, spec.dz, spec.dt)
    return ResidualReport("dirac", per_slice, spec.dz, spec.dt, total)


def klein_gordon_residual(evolution: DiracEvolution) -> ResidualReport:
    """Second-order residual D_tt - c^2 D_zz + a^2, per component."""
    if evolution.mode is not EvolutionMode.RENORMALIZED:
        raise ValueError("klein_gordon_residual requires a renormalized history")
    if len(evolution) < 3:
        raise ValueError("need at least 3 time slices for centered differences")
    spec = evolution.spec
    stacked = evolution.stack()
    n = stacked.shape[2]
    inner = _interior(n)
    val = stacked[1:-1, :, inner]
    d_tt = (stacked[2:, :, inner] - 2.0 * stacked[1:-1, :, inner]
            + stacked[:-2, :, inner]) / spec.dt ** 2
    right = stacked[1:-1, :, MARGIN + 1:n - MARGIN + 1]
    left = stacked[1:-1, :, MARGIN - 1:n - MARGIN - 1]
    d_zz = (right - 2.0 * val + left) / spec.dz ** 2
    res = d_tt - spec.c ** 2 * d_zz + spec.a ** 2 * val
    per_slice, total = _norms(res, spec.dz, spec.dt)
    return ResidualReport("klein_gordon", per_slice, spec.dz, spec.dt, total)


def gaussian_two_field(spec: LatticeSpec, width: float, direction: int = +1) -> TwoField:
    """Smooth single-channel Gaussian profile for convergence studies."""
    prof = np.exp(-0.5 * (spec.z_coords() / width) ** 2)
    zero = np.zeros_like(prof)
    if direction == +1:
        return TwoField(f_plus=prof, f_minus=zero)
    return TwoField(f_plus=zero, f_minus=prof)


def gaussian_four_field(spec: LatticeSpec, width: float, state: int = 1) -> FourField:
    prof = np.exp(-0.5 * (spec.z_coords() / width) ** 2)
    comps = [np.zeros_like(prof) for _ in range(4)]
    comps[state - 1] = prof
    return FourField(*comps)


def residual_convergence(
    kind: str,
    spec: LatticeSpec,
    t_final: float,
    init_width: float,
) -> ResidualReport:
    """Residual report at the given resolution with a dt-halving ratio.

    Runs the relevant evolution from a Gaussian profile of physical width
    ``init_width`` up to time ``t_final`` at the spec's resolution and at a
    dt- and dz-halved copy, and reports coarse/fine residual norm.  A ratio
    near 2 confirms first-order convergence to the continuum equation.
    """
    reports = []
    for refine in (1, 2):
        sub = make_lattice(
            dz=spec.dz / refine,
            dt=spec.dt / refine,
            c=spec.c,
            a=spec.a,
            z_extent=spec.z_max,
            n_steps=int(round(t_final / (spec.dt / refine))),
        )
        n = sub.n_steps
        if kind == "telegraph":
            history = evolve_kac(gaussian_two_field(sub, init_width), sub, n)
            reports.append(telegraph_residual(history, sub))
        elif kind in ("dirac", "klein_gordon"):
            evo = evolve_dirac(
                gaussian_four_field(sub, init_width), sub, n,
                EvolutionMode.RENORMALIZED,
            )
            op = dirac_residual if kind == "dirac" else klein_gordon_residual
            reports.append(op(evo))
        else:
            raise ValueError(f"unknown residual kind {kind!r}")
    coarse, fine = reports
    return ResidualReport(
        equation_tag=coarse.equation_tag,
        norms=coarse.norms,
        dz=coarse.dz,
        dt=coarse.dt,
        global_norm=coarse.global_norm,
        convergence_ratio=coarse.global_norm / fine.global_norm,
    )


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = x - x.mean()
    y = y - y.mean()
    denom = np.sqrt((x ** 2).sum() * (y ** 2).sum())
    if denom == 0.0:
        return 0.0
    return float((x * y).sum() / denom)


def _ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    raw = np.empty(x.shape[0])
    raw[order] = np.arange(x.shape[0], dtype=np.float64)
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    group_mean = np.bincount(inverse, weights=raw) / counts
    return group_mean[inverse]


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    return _pearson(_ranks(x), _ranks(y))


def normalized_density(sampled: ChargeGrid, reference_mode: EvolutionMode,
                       p: float) -> np.ndarray:
    """Counts scaled to per-pair densities, (4, n_sites, n_slices).

    Renormalized references additionally need the per-slice (1-p)^-t
    rescaling that was applied to them.
    """
    if sampled.n_pairs < 1:
        raise ValueError("sampled grid holds no pairs")
    dens = sampled.counts.astype(np.float64) / float(sampled.n_pairs)
    if reference_mode is EvolutionMode.RENORMALIZED and p > 0:
        t = np.arange(dens.shape[2])
        dens = dens * (1.0 - p) ** (-t)
    return dens


def apply_channel_map(dens: np.ndarray, channel_map: dict[int, int] | None) -> np.ndarray:
    """Reassign sampled channels to reference components, with signs.

    ``channel_map`` sends each sampled channel 1..4 to a signed component:
    {1: 1, 2: -2, ...} adds sampled channel 2, negated, into component 2.
    Identity when None.
    """
    if channel_map is None:
        return dens
    out = np.zeros_like(dens)
    for src, dst in channel_map.items():
        if not 1 <= src <= 4 or not 1 <= abs(dst) <= 4:
            raise ValueError(f"invalid channel map entry {src}: {dst}")
        out[abs(dst) - 1] += np.sign(dst) * dens[src - 1]
    return out


def _window_mask(n_sites: int, n_slices: int, region) -> np.ndarray:
    offsets = np.arange(n_sites) - (n_sites - 1) // 2
    t = np.arange(n_slices)
    if region == "half-cone":
        return 2 * np.abs(offsets)[:, None] <= t[None, :]
    r = int(region)
    if r < 0:
        raise ValueError("region radius must be nonnegative")
    return (np.abs(offsets) <= r)[:, None] & np.ones(n_slices, dtype=bool)[None, :]


def compare_grids(
    sampled: ChargeGrid,
    reference: DiracEvolution,
    region="half-cone",
    channel_map: dict[int, int] | None = None,
    components: tuple[int, ...] = (1, 2),
) -> ComparisonReport:
    """Quantify agreement between a sampled grid and a reference history.

    The sampled counts are normalised per pair (and per-slice rescaled when
    the reference is renormalized), remapped by ``channel_map``, and the
    selected component sum is compared to the reference's over the window:
    Pearson correlation over all window cells, per-slice L2 error, and a
    symmetric relative error profile against |z| with its Spearman rank
    correlation.
    """
    n_slices = min(len(reference), sampled.shape[2])
    ref = reference.stack()[:n_slices]
    if ref.shape[2] != sampled.shape[1]:
        raise ShapeMismatchError(
            f"reference has {ref.shape[2]} sites, sampled grid {sampled.shape[1]}"
        )
    spec = reference.spec
    dens = normalized_density(sampled, reference.mode, spec.p)[:, :, :n_slices]
    dens = apply_channel_map(dens, channel_map)

    comp_idx = [c - 1 for c in components]
    s_scalar = dens[comp_idx].sum(axis=0)  # (n_sites, n_slices)
    r_scalar = ref[:, comp_idx, :].sum(axis=1).T  # (n_sites, n_slices)

    mask = _window_mask(sampled.shape[1], n_slices, region)
    diff = np.where(mask, s_scalar - r_scalar, 0.0)

    per_slice_l2 = np.sqrt((diff ** 2).sum(axis=0) * spec.dz)
    correlation = _pearson(s_scalar[mask], r_scalar[mask])

    offsets = np.arange(sampled.shape[1]) - (sampled.shape[1] - 1) // 2
    abs_off = np.abs(offsets)
    max_off = int(abs_off[mask.any(axis=1)].max()) if mask.any() else 0
    profile = np.zeros(max_off + 1)
    prof_offsets = np.arange(max_off + 1)
    for k in prof_offsets:
        cells = mask & (abs_off == k)[:, None]
        if not cells.any():
            profile[k] = np.nan
            continue
        err = np.sqrt(np.mean((s_scalar[cells] - r_scalar[cells]) ** 2))
        scale = np.sqrt(
            0.5 * (np.mean(s_scalar[cells] ** 2) + np.mean(r_scalar[cells] ** 2))
        )
        profile[k] = err / scale if scale > 0 else np.nan
    good = ~np.isnan(profile)
    rho = spearman(prof_offsets[good].astype(float), profile[good]) if good.sum() > 1 else 0.0

    return ComparisonReport(
        region=region,
        components=tuple(components),
        per_slice_l2=per_slice_l2,
        correlation=correlation,
        error_profile=profile,
        profile_offsets=prof_offsets,
        spearman_error_vs_z=rho,
        n_pairs=sampled.n_pairs,
        n_slices=n_slices,
        normalization=reference.mode.value,
    )


def time_slice(obj, t: int, components: tuple[int, ...] = (1, 2)) -> tuple[np.ndarray, np.ndarray]:
    """Spatial profile of a component combination at slice ``t``.

    Accepts a two-channel history, a four-channel history (DiracEvolution or
    a list of FourField), or a ChargeGrid (profiles are per-pair densities).
    Returns (site offsets from the origin, profile).
    """
    if isinstance(obj, ChargeGrid):
        if not 0 <= t < obj.shape[2]:
            raise IndexError(f"slice {t} out of range 0..{obj.shape[2] - 1}")
        dens = obj.counts[:, :, t].astype(np.float64) / max(obj.n_pairs, 1)
        profile = dens[[c - 1 for c in components]].sum(axis=0)
        n_sites = obj.shape[1]
    else:
        slices = obj.slices if isinstance(obj, DiracEvolution) else obj
        if not 0 <= t < len(slices):
            raise IndexError(f"slice {t} out of range 0..{len(slices) - 1}")
        frame = slices[t]
        stacked = frame.stack()
        profile = stacked[[c - 1 for c in components]].sum(axis=0)
        n_sites = frame.n_sites
    offsets = np.arange(n_sites) - (n_sites - 1) // 2
    return offsets, profile


def occupancy_history(
    spec: LatticeSpec,
    n: int,
    stutter_phase: str = TURN_FIRST,
    initial_direction: int = +1,
) -> np.ndarray:
    """Exact per-cell visit probabilities of the two envelopes, (n+1, 4, Z).

    Channels follow the deposit convention: (1, 2) hold the envelope that
    starts as the forward leg, (3, 4) the one starting as the return leg.
    These are the unsigned counterparts of the four signed channels and give
    per-cell binomial variances for Monte Carlo error bars.

    The leading envelope corners at every trial with probability p, so its
    block obeys the plain two-channel flow.  The trailing envelope's first
    corner is delayed: its first loop borrows the leading one's pattern
    reversed, so mass whose first loop is direction-degenerate (a leading
    trial-0 turn, probability p, or every pair under a leading marker) must
    first cross a non-turning marker before its delayed first turn.  A small
    phase machine tracks this; after the first corner the envelope corners
    like a plain rate-p walk.
    """
    p = spec.p

    def mix_stream(g_right: np.ndarray, g_left: np.ndarray):
        new_right = (1.0 - p) * shift(g_right, +1) + p * shift(g_left, +1)
        new_left = (1.0 - p) * shift(g_left, -1) + p * shift(g_right, -1)
        return new_right, new_left

    def stream2(g: np.ndarray) -> np.ndarray:
        return np.stack([shift(g[0], +1), shift(g[1], -1)])

    e_init = _initial_return_direction(stutter_phase, initial_direction)
    out = np.zeros((n + 1, 4, spec.n_sites))
    origin = spec.origin_index
    out[0, 0 if initial_direction > 0 else 1, origin] = 1.0
    out[0, 2 if e_init > 0 else 3, origin] = 1.0

    # Trailing-envelope phase masses, one (2, n_sites) block per phase:
    # "single" turns at its next corner event; "silent" still has to cross
    # the non-turning marker of its degenerate first loop, feeding
    # "pending" whose next event is the delayed first turn; "norm" corners
    # at every event like the leading envelope.
    single = np.zeros((2, spec.n_sites))
    silent = np.zeros((2, spec.n_sites))
    pending = np.zeros((2, spec.n_sites))
    norm = np.zeros((2, spec.n_sites))
    ch0 = 0 if e_init > 0 else 1
    if stutter_phase == TURN_FIRST:
        single[ch0, origin] = 1.0 - p
        silent[ch0, origin] = p
    else:
        silent[ch0, origin] = 1.0

    for k in range(1, n + 1):
        out[k, 0], out[k, 1] = mix_stream(out[k - 1, 0], out[k - 1, 1])
        if k == 1:
            # The first corner sits at slice >= 1: nothing turns on the
            # first step.  Only a leading trial-0 marker can already move
            # silent mass to pending (direction preserved).
            if stutter_phase != TURN_FIRST:
                pending = stream2(p * silent)
                silent = stream2((1.0 - p) * silent)
            else:
                single = stream2(single)
                silent = stream2(silent)
        else:
            turned = p * (single[::-1] + pending[::-1])
            new_norm = np.empty_like(norm)
            new_norm[0] = ((1.0 - p) * shift(norm[0], +1) + p * shift(norm[1], +1)
                           + shift(turned[0], +1))
            new_norm[1] = ((1.0 - p) * shift(norm[1], -1) + p * shift(norm[0], -1)
                           + shift(turned[1], -1))
            pending = stream2((1.0 - p) * pending + p * silent)
            silent = stream2((1.0 - p) * silent)
            single = stream2((1.0 - p) * single)
            norm = new_norm
        out[k, 2] = single[0] + silent[0] + pending[0] + norm[0]
        out[k, 3] = single[1] + silent[1] + pending[1] + norm[1]
    return out


def mc_standard_error(
    occupancy_scalar: np.ndarray,
    reference_scalar: np.ndarray,
    n_pairs: int,
) -> np.ndarray:
    """Per-cell standard error of a mean signed deposit.

    A pair deposits -1, 0 or +1 per cell and channel combination, so the
    per-pair variance is occupancy - mean^2.
    """
    var = np.maximum(occupancy_scalar - reference_scalar ** 2, 0.0)
    return np.sqrt(var / max(n_pairs, 1))
