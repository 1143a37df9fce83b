"""Parameter and coordinate reductions between market inputs and the canonical frame.

The canonical frame is the heat-equation picture: time ``t`` runs backwards
from expiry, ``x`` is a standard Wiener coordinate, and the put reward is
replaced by the affinely shifted, theta-scaled reward ``V_{rho,theta}``
defined on the quadrant ``t > 0, x > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidParamsError

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MarketParams:
    """Raw financial inputs: interest rate ``r`` and volatility ``sigma``."""

    r: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0.0):
            raise InvalidParamsError(f"interest rate must be positive, got r={self.r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise InvalidParamsError(f"volatility must be positive, got sigma={self.sigma}")


@dataclass(frozen=True)
class CanonicalParams:
    """Reduced parameters ``(rho, theta)`` and the optional scale ``alpha``."""

    rho: float
    theta: float = 1.0
    alpha: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.rho) and -1.0 < self.rho < 1.0):
            raise InvalidParamsError(f"rho must lie in (-1, 1), got {self.rho}")
        if not (np.isfinite(self.theta) and self.theta >= 0.0):
            raise InvalidParamsError(f"theta must be nonnegative, got {self.theta}")
        if self.alpha is not None and not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise InvalidParamsError(f"alpha must be positive, got {self.alpha}")

    @property
    def mu(self) -> float:
        return mu(self)

    @property
    def eta(self) -> float:
        return eta(self)


@dataclass(frozen=True)
class BoundaryConstants:
    mu: float
    eta: float


def from_market(m: MarketParams) -> CanonicalParams:
    """Reduce ``(r, sigma)`` to the put problem ``(rho, theta=1)`` with scale ``alpha``."""
    if not isinstance(m, MarketParams):
        m = MarketParams(*m)
    s2 = m.sigma * m.sigma
    alpha = (s2 + 2.0 * m.r) / (2.0 * SQRT2 * m.sigma)
    rho = (s2 - 2.0 * m.r) / (s2 + 2.0 * m.r)
    return CanonicalParams(rho=rho, theta=1.0, alpha=alpha)


def to_market(p: CanonicalParams) -> MarketParams:
    """Market parameters reproducing the unscaled (alpha = 1) canonical problem."""
    return MarketParams(r=1.0 - p.rho ** 2, sigma=SQRT2 * (1.0 + p.rho))


def reward_original(t, s, r):
    """Put payoff ``max(0, e^{rt} - s)`` in money discounted to the deadline."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    out = np.maximum(0.0, np.exp(r * t) - s)
    return out[()] if out.ndim == 0 else out


def market_x(t, s, m: MarketParams):
    """Wiener coordinate ``x = (sigma/sqrt2) t - (sqrt2/sigma) log s``."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise InvalidParamsError("stock price must be positive")
    return (m.sigma / SQRT2) * np.asarray(t, dtype=float) - (SQRT2 / m.sigma) * np.log(s)


def market_s(t, x, m: MarketParams):
    """Inverse of :func:`market_x`: discounted stock price at ``(t, x)``."""
    return np.exp((m.sigma / SQRT2) * ((m.sigma / SQRT2) * np.asarray(t, dtype=float) - np.asarray(x, dtype=float)))


def to_canonical_point(t, s, m: MarketParams):
    """Map a market point ``(t, s)`` to the scaled, unshifted frame ``(alpha^2 t, alpha x)``."""
    alpha = from_market(m).alpha
    x = market_x(t, s, m)
    return alpha * alpha * np.asarray(t, dtype=float), alpha * x


def from_canonical_point(tc, xc, m: MarketParams):
    """Inverse of :func:`to_canonical_point`, returning ``(t, s)``."""
    alpha = from_market(m).alpha
    t = np.asarray(tc, dtype=float) / (alpha * alpha)
    return t, market_s(t, np.asarray(xc, dtype=float) / alpha, m)


def reward_market(t, x, m: MarketParams):
    """Reward ``V_{r,sigma}(t, x)`` in Wiener coordinates."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.maximum(0.0, np.exp(m.r * t) - np.exp(0.5 * m.sigma ** 2 * t - m.sigma * x / SQRT2))


def reward_unshifted(t, x, rho: float):
    """Reward ``V_rho(t, x)`` with ``r = 1 - rho^2`` and ``sigma = sqrt2 (1 + rho)``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.maximum(0.0, np.exp((1.0 - rho ** 2) * t) - np.exp((1.0 + rho) ** 2 * t - (1.0 + rho) * x))


def reward_canonical(t, x, p: CanonicalParams):
    """Theta-scaled reward ``V_{rho,theta}``; zero off the open quadrant ``t > 0, x > 0``.

    Inside the quadrant the formula value is returned as is, negative or not.
    At ``t = 0`` the quadrant is approached from above, so ``t >= 0`` is accepted.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    rho, theta = p.rho, p.theta
    c_minus = 0.5 * (1.0 + theta - rho + theta * rho)
    c_plus = 0.5 * (1.0 - theta) * (1.0 + rho)
    with np.errstate(over="ignore"):
        val = np.exp(t) * (np.exp(rho * x) - c_minus * np.exp(-x) - c_plus * np.exp(x))
    out = np.where((x > 0.0) & (t >= 0.0), val, 0.0)
    return out[()] if out.ndim == 0 else out


def mu(p: CanonicalParams) -> float:
    """Asymptote of the free boundary, ``log(1 + theta (1+rho)/(1-rho)) / (1+rho)``."""
    return math.log1p(p.theta * (1.0 + p.rho) / (1.0 - p.rho)) / (1.0 + p.rho)


def eta(p: CanonicalParams) -> float:
    """Coefficient of the perpetual majorant ``eta e^{t+x}``."""
    m = mu(p)
    return 0.5 * (1.0 + p.rho) * (math.expm1((p.rho - 1.0) * m) + p.theta)


def boundary_constants(p: CanonicalParams) -> BoundaryConstants:
    return BoundaryConstants(mu=mu(p), eta=eta(p))


def unshift_boundary(t, x, rho: float):
    """Boundary positions in the pre-shift ``V_rho`` frame: ``x + 2 rho t``."""
    return np.asarray(x, dtype=float) + 2.0 * rho * np.asarray(t, dtype=float)


def shift_boundary(t, x, rho: float):
    """Inverse of :func:`unshift_boundary`."""
    return np.asarray(x, dtype=float) - 2.0 * rho * np.asarray(t, dtype=float)


def unshift_weight(t, y, rho: float):
    """Factor ``w`` with ``V_rho(t, y) = w * V'_rho(t, y - 2 rho t)``.

    The same factor relates the envelopes of the two frames.
    """
    return np.exp(rho * rho * np.asarray(t, dtype=float) - rho * np.asarray(y, dtype=float))
