"""American chooser option via forward obstacle problems in log-price."""

from ._kernels import BACKEND
from .errors import (
    ChooserError,
    IncommensurableGrids,
    IncommensurableHorizons,
    InvalidLattice,
    MultipleCrossings,
    NoCrossing,
    NonConvergence,
    OverlapDetected,
    RejectedParams,
    SingularSystem,
)
from .grid import PayoffKind, SolveGrid, build_grid, payoff
from .params import MarketParams, NumericsConfig, ValidatedConfig, load_config, validate

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChooserError",
    "IncommensurableGrids",
    "IncommensurableHorizons",
    "InvalidLattice",
    "MarketParams",
    "MultipleCrossings",
    "NoCrossing",
    "NonConvergence",
    "NumericsConfig",
    "OverlapDetected",
    "PayoffKind",
    "RejectedParams",
    "SingularSystem",
    "SolveGrid",
    "ValidatedConfig",
    "build_grid",
    "load_config",
    "payoff",
    "validate",
]
