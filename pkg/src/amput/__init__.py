"""Free boundary of the American put in the canonical heat-equation frame.

Modules: ``canonical`` (parameter and coordinate reductions), ``obstacle``
(finite-difference solver and boundary extraction), ``lattice`` (binomial
tree oracle), ``balayage`` (integral identities on a computed boundary),
``asymptotics`` (large-time constants and closed forms) and ``cli``.
"""

from .canonical import (
    BoundaryConstants,
    CanonicalParams,
    MarketParams,
    boundary_constants,
    from_market,
    to_market,
)
from .exceptions import (
    AmputError,
    DegenerateLevelError,
    DomainError,
    InvalidParamsError,
    NoConvergenceError,
    PoleError,
)
from .obstacle import BoundaryCurve, GridSpec, ObstacleSolution, extract_boundary, solve

__all__ = [
    "AmputError", "BoundaryConstants", "BoundaryCurve", "CanonicalParams", "DegenerateLevelError",
    "DomainError", "GridSpec", "InvalidParamsError", "MarketParams", "NoConvergenceError",
    "ObstacleSolution", "PoleError", "boundary_constants", "extract_boundary", "from_market",
    "solve", "to_market",
]

__version__ = "0.1.0"
