"""Multilevel Monte Carlo estimation of ``e^{beta A} u`` over Markov chain paths."""

import warnings as _warnings

# numba probes for TBB when a parallel kernel first runs; the fallback layer is fine
_warnings.filterwarnings("ignore", message=".*TBB.*")

from .errors import (  # noqa: E402
    ConfigurationError,
    DegenerateScaleError,
    DimensionError,
    FormatError,
    InvalidValueError,
    MlmcExpError,
    NonConvergenceError,
    UnsupportedInputError,
)
from .sparse import ChainDecomposition, SparseMatrix, decompose, reconstruct, spectral_scale, transpose  # noqa: E402
from .rng import RngStream, stream_for  # noqa: E402
from .paths import (  # noqa: E402
    Target,
    configure_threads,
    coupled_functional,
    coupled_functional_fem,
    evolve_interval,
    forward_scalar_functional,
    sample_batch,
    simpson_weights,
    single_functional,
)
from .mc import McResult, mc_auto, mc_forward_scalar, mc_single_entry  # noqa: E402
from .mlmc import LevelStats, MlmcResult, initial_level, mlmc, mlmc_driver, optimal_allocation  # noqa: E402
from .oracle import dense_expmv, strang_reference  # noqa: E402
from .netgen import GraphSpec, pref, smallw  # noqa: E402
from .applications import (  # noqa: E402
    FemSystem,
    Grid3D,
    build_heat3d,
    load_fem_system,
    node_communicability,
    solve_convdiff_point,
    solve_heat_point,
    total_communicability,
)

__version__ = "0.1.0"
