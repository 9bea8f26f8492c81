"""Space-time lattice, field containers, and shared indexing.

The lattice is a uniform 1+1D grid: sites z_min + i*dz for i = 0..n_sites-1,
advanced in steps of dt.  One site per step (c*dt == dz) is enforced so that
every walker segment is light-like.  All evolution operators and samplers in
this package share these containers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REL_TOL = 1e-12


class LatticeError(ValueError):
    """Invalid lattice parameters (CFL violation, p >= 1, narrow grid, ...)."""


class ShapeMismatchError(ValueError):
    """Two lattice objects with incompatible grid shapes were combined."""


class InconsistentReturnError(RuntimeError):
    """A return leg failed to close on the origin; signals a construction bug."""


@dataclass(frozen=True)
class LatticeSpec:
    """Validated lattice geometry plus walk parameters.

    dz, dt are the spatial/temporal spacings, c the fixed walker speed and
    a the scattering rate (interpreted as the mass when c = 1, a = m).
    The derived per-step flip probability is p = a*dt.
    """

    dz: float
    dt: float
    c: float
    a: float
    z_min: float
    z_max: float
    n_steps: int

    @property
    def p(self) -> float:
        return self.a * self.dt

    @property
    def n_sites(self) -> int:
        return int(round((self.z_max - self.z_min) / self.dz)) + 1

    @property
    def origin_index(self) -> int:
        return int(round(-self.z_min / self.dz))

    def z_of(self, site: int | np.ndarray) -> float | np.ndarray:
        return self.z_min + np.asarray(site) * self.dz if isinstance(site, np.ndarray) \
            else self.z_min + site * self.dz

    def site_of(self, z: float) -> int:
        site = int(round((z - self.z_min) / self.dz))
        if not (0 <= site < self.n_sites) or abs(self.z_of(site) - z) > REL_TOL * max(1.0, abs(z)):
            raise LatticeError(f"z = {z} is not a grid site")
        return site

    def z_coords(self) -> np.ndarray:
        return self.z_min + np.arange(self.n_sites) * self.dz

    def site_offsets(self) -> np.ndarray:
        """Integer site offsets from the origin site, one per grid site."""
        return np.arange(self.n_sites) - self.origin_index


def make_lattice(
    dz: float,
    dt: float,
    c: float,
    a: float,
    z_extent: float,
    n_steps: int,
    enforce_light_cone: bool = True,
) -> LatticeSpec:
    """Build a validated symmetric lattice on [-z_extent, z_extent].

    Requires c*dt == dz (one site per step), p = a*dt in [0, 1) and an
    integral number of sites.  With ``enforce_light_cone`` the grid must be
    wide enough that a walker started at the origin cannot reach the boundary
    within n_steps; long runs on deliberately narrow grids (e.g. conservation
    stress tests, which rely on the wrap-around streaming being exact) may
    opt out.
    """
    if dz <= 0 or dt <= 0 or c <= 0:
        raise LatticeError("dz, dt and c must be positive")
    if a < 0:
        raise LatticeError("scattering rate a must be nonnegative")
    if n_steps < 1:
        raise LatticeError("n_steps must be at least 1")
    if abs(c * dt - dz) > REL_TOL * dz:
        raise LatticeError(f"CFL violation: c*dt = {c * dt} must equal dz = {dz}")
    p = a * dt
    if p >= 1.0:
        raise LatticeError(f"flip probability p = a*dt = {p} must be < 1")
    n_half = z_extent / dz
    if z_extent <= 0 or abs(n_half - round(n_half)) > REL_TOL * max(1.0, n_half):
        raise LatticeError(f"z_extent = {z_extent} must be a positive multiple of dz")
    if enforce_light_cone and z_extent + REL_TOL * z_extent < c * dt * n_steps:
        raise LatticeError(
            f"grid too narrow: light cone reaches |z| = {c * dt * n_steps}, "
            f"extent is {z_extent}"
        )
    return LatticeSpec(dz=dz, dt=dt, c=c, a=a, z_min=-z_extent, z_max=z_extent,
                       n_steps=int(n_steps))


def _check_component(name: str, arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 1:
        raise ShapeMismatchError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    return out


@dataclass(frozen=True)
class TwoField:
    """Right/left-mover densities F+, F- on the grid at one time step."""

    f_plus: np.ndarray
    f_minus: np.ndarray
    t_index: int = 0

    def __post_init__(self) -> None:
        fp = _check_component("f_plus", self.f_plus)
        fm = _check_component("f_minus", self.f_minus)
        if fp.shape != fm.shape:
            raise ShapeMismatchError("f_plus and f_minus must have identical length")
        object.__setattr__(self, "f_plus", fp)
        object.__setattr__(self, "f_minus", fm)

    @property
    def n_sites(self) -> int:
        return self.f_plus.shape[0]

    def total_mass(self) -> float:
        return float(self.f_plus.sum() + self.f_minus.sum())

    def stack(self) -> np.ndarray:
        return np.stack([self.f_plus, self.f_minus])


@dataclass(frozen=True)
class FourField:
    """Signed four-channel charge densities phi1..phi4 at one time step.

    Values may be negative: these are net charge densities, not
    probabilities.  Channels (1, 2) and (3, 4) form the two decoupled
    blocks of the four-state scheme; odd channels move right, even move
    left.
    """

    phi1: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray
    phi4: np.ndarray
    t_index: int = 0

    def __post_init__(self) -> None:
        comps = []
        for name in ("phi1", "phi2", "phi3", "phi4"):
            comps.append(_check_component(name, getattr(self, name)))
        if len({c.shape for c in comps}) != 1:
            raise ShapeMismatchError("all four components must have identical length")
        for name, c in zip(("phi1", "phi2", "phi3", "phi4"), comps):
            object.__setattr__(self, name, c)

    @property
    def n_sites(self) -> int:
        return self.phi1.shape[0]

    def stack(self) -> np.ndarray:
        """(4, n_sites) view of the components in channel order."""
        return np.stack([self.phi1, self.phi2, self.phi3, self.phi4])

    @classmethod
    def from_stack(cls, arr: np.ndarray, t_index: int = 0) -> "FourField":
        if arr.shape[0] != 4:
            raise ShapeMismatchError("stacked field must have 4 rows")
        return cls(arr[0], arr[1], arr[2], arr[3], t_index=t_index)


@dataclass
class ChargeGrid:
    """Exact integer charge tallies indexed by (channel 1..4, z-site, t-step).

    Counts stay integers through any number of merges; normalisation to
    densities happens only in analysis.  ``n_rejected`` carries the
    no-reversal resample count so run metadata survives merging.
    """

    counts: np.ndarray
    n_pairs: int = 0
    n_rejected: int = 0

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 3 or self.counts.shape[0] != 4:
            raise ShapeMismatchError("counts must have shape (4, n_sites, n_slices)")

    @classmethod
    def empty(cls, spec: LatticeSpec) -> "ChargeGrid":
        return cls(np.zeros((4, spec.n_sites, spec.n_steps + 1), dtype=np.int64))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.counts.shape


def merge(grid_a: ChargeGrid, grid_b: ChargeGrid) -> ChargeGrid:
    """Elementwise sum of two tallies accumulated on identical lattices."""
    if grid_a.shape != grid_b.shape:
        raise ShapeMismatchError(
            f"cannot merge grids of shapes {grid_a.shape} and {grid_b.shape}"
        )
    return ChargeGrid(
        counts=grid_a.counts + grid_b.counts,
        n_pairs=grid_a.n_pairs + grid_b.n_pairs,
        n_rejected=grid_a.n_rejected + grid_b.n_rejected,
    )


def shift(arr: np.ndarray, sites: int) -> np.ndarray:
    """Translate a per-site array by ``sites`` (positive = toward larger z).

    Implemented as a periodic roll.  Every validated configuration keeps the
    light cone strictly inside the grid, where wrap-around and zero-neighbor
    streaming coincide; the wrap keeps per-slice sums exactly conserved for
    full-support data as well.
    """
    if sites == 0:
        return arr.copy()
    return np.roll(arr, sites, axis=-1)


def _delta(spec: LatticeSpec, site: int) -> np.ndarray:
    if not (0 <= site < spec.n_sites):
        raise LatticeError(f"site {site} outside grid of {spec.n_sites} sites")
    arr = np.zeros(spec.n_sites)
    arr[site] = 1.0
    return arr


def delta_init_two(spec: LatticeSpec, site: int, direction: int) -> TwoField:
    """Unit mass at ``site`` in the +/- component, zero elsewhere."""
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 or -1")
    bump = _delta(spec, site)
    zero = np.zeros(spec.n_sites)
    if direction == +1:
        return TwoField(f_plus=bump, f_minus=zero, t_index=0)
    return TwoField(f_plus=zero, f_minus=bump, t_index=0)


def delta_init_four(spec: LatticeSpec, site: int, state: int) -> FourField:
    """Unit charge at ``site`` in channel ``state`` (1..4), zero elsewhere."""
    if state not in (1, 2, 3, 4):
        raise ValueError("state must be in 1..4")
    comps = [np.zeros(spec.n_sites) for _ in range(4)]
    comps[state - 1] = _delta(spec, site)
    return FourField(*comps, t_index=0)
