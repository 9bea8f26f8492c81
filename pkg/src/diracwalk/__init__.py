"""Persistent random walks and entwined pairs on a light-cone lattice.

Builds the discrete 1+1D Dirac propagator two ways: deterministically, by
iterating the four-state difference scheme, and stochastically, by sampling
entwined pairs and tallying signed charge; ``analysis`` quantifies how well
the two agree and how fast both schemes approach their continuum equations.
"""

from .lattice import (
    ChargeGrid,
    FourField,
    InconsistentReturnError,
    LatticeError,
    LatticeSpec,
    ShapeMismatchError,
    TwoField,
    delta_init_four,
    delta_init_two,
    make_lattice,
    merge,
)
from .kac import KacPath, evolve_kac, kac_density_estimate, sample_kac_path, step_kac
from .dirac import (
    DiracAlgebra,
    DiracEvolution,
    EvolutionMode,
    dirac_propagator,
    evolve_dirac,
    step_entwined,
)
from .entwined import (
    EntwinedPath,
    NoReversalError,
    PairState,
    deposit_charge,
    run_ensemble,
    sample_entwined_pair,
)
from .analysis import (
    ComparisonReport,
    ResidualReport,
    compare_grids,
    dirac_residual,
    klein_gordon_residual,
    residual_convergence,
    telegraph_residual,
    time_slice,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
