"""Cox-Ross-Rubinstein binomial tree for the American put, used as an independent oracle.

The tree works in nominal money with strike 1.  Boundaries are mapped into
the canonical frame through the same coordinate chain as the PDE solver:
discounted price ``s = S e^{rt}``, Wiener coordinate, scaling by ``alpha``
and the affine shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.isotonic import isotonic_regression

from .canonical import CanonicalParams, MarketParams, from_market, market_s, market_x
from .exceptions import InvalidParamsError
from .obstacle import BoundaryCurve


@dataclass(frozen=True)
class LatticeSpec:
    steps: int
    T: float
    market: MarketParams

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidParamsError(f"steps must be a positive integer, got {self.steps}")
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise InvalidParamsError(f"T must be positive, got {self.T}")
        if not isinstance(self.market, MarketParams):
            raise InvalidParamsError("market must be a MarketParams instance")

    @property
    def dt(self) -> float:
        return self.T / self.steps

    def factors(self):
        """``(u, d, p, disc)`` of the CRR parameterisation."""
        dt = self.dt
        u = math.exp(self.market.sigma * math.sqrt(dt))
        d = 1.0 / u
        p = (math.exp(self.market.r * dt) - d) / (u - d)
        if not 0.0 < p < 1.0:
            raise InvalidParamsError("risk-neutral probability outside (0, 1); increase steps")
        return u, d, p, math.exp(-self.market.r * dt)


@dataclass(frozen=True, eq=False)
class LatticeBoundary:
    """Critical nominal prices: exercise iff ``S <= s_star`` at time to expiry ``t``."""

    t: np.ndarray
    s_star: np.ndarray
    price_at_root: float


def _rollback(spec: LatticeSpec, s0: float, american: bool, record: bool = False, refine: str = "smooth_fit"):
    u, _, p, disc = spec.factors()
    n = spec.steps
    j = np.arange(n + 1)
    S = s0 * u ** (2 * j - n)
    V = np.maximum(1.0 - S, 0.0)
    ts, stars = [0.0], [1.0]
    log_h = 2.0 * math.log(u)
    for i in range(n - 1, -1, -1):
        S = s0 * u ** (2.0 * np.arange(i + 1) - i)
        cont = disc * (p * V[1:i + 2] + (1.0 - p) * V[:i + 1])
        if not american:
            V = cont
            continue
        pay = 1.0 - S
        ex = (pay >= cont) & (pay > 0.0)
        V = np.where(ex, pay, cont)
        if record and ex.any() and not ex.all():
            k = int(np.nonzero(ex)[0][-1])
            if k + 1 > i:
                continue
            log_e = math.log(S[k])
            star = log_e + 0.5 * log_h
            if refine == "smooth_fit" and k + 2 <= i:
                w1 = V[k + 1] - pay[k + 1]
                w2 = V[k + 2] - pay[k + 2]
                den = math.sqrt(max(w2, 0.0)) - math.sqrt(max(w1, 0.0))
                if den > 0.0:
                    cand = log_e + log_h - log_h * math.sqrt(max(w1, 0.0)) / den
                    if log_e - log_h <= cand <= log_e + log_h:
                        star = cand
            ts.append(spec.T - i * spec.dt)
            stars.append(math.exp(star))
    return float(V[0]), np.array(ts), np.array(stars)


def price_american_put(spec: LatticeSpec, s0: float = 1.0) -> float:
    """CRR value of the American put with nominal strike 1."""
    if not (math.isfinite(s0) and s0 > 0.0):
        raise InvalidParamsError("s0 must be positive")
    return _rollback(spec, s0, american=True)[0]


def price_european_put(spec: LatticeSpec, s0: float = 1.0) -> float:
    """European put on the same tree."""
    if not (math.isfinite(s0) and s0 > 0.0):
        raise InvalidParamsError("s0 must be positive")
    return _rollback(spec, s0, american=False)[0]


def extract_lattice_boundary(spec: LatticeSpec, refine: str = "smooth_fit", monotone: bool = True) -> LatticeBoundary:
    """Exercise boundary at every tree level that has both exercise and continuation nodes.

    ``refine='midpoint'`` reports the geometric midpoint between the last
    exercise node and the first continuation node.  ``'smooth_fit'`` places
    the boundary where ``sqrt`` of the continuation premium, extrapolated
    linearly in ``log S`` from the two nearest continuation nodes, reaches
    zero; this removes most of the half-cell ambiguity.  The extrapolated
    point may fall up to one cell below the last exercise node, since the
    discrete exercise set lags the continuous one.  With ``monotone``
    the result is projected onto nonincreasing sequences in ``t``.
    """
    if refine not in ("smooth_fit", "midpoint"):
        raise InvalidParamsError(f"unknown refinement {refine!r}")
    price, t, s_star = _rollback(spec, 1.0, american=True, record=True, refine=refine)
    order = np.argsort(t)
    t, s_star = t[order], s_star[order]
    if monotone and t.size > 1:
        s_star = np.exp(isotonic_regression(np.log(s_star), increasing=False))
        s_star[0] = 1.0
    return LatticeBoundary(t=t, s_star=np.minimum(s_star, 1.0), price_at_root=price)


def lattice_boundary_to_canonical(lb: LatticeBoundary, market: MarketParams) -> BoundaryCurve:
    """Map ``(t, s_star)`` into the shifted canonical frame of ``from_market(market)``."""
    q = from_market(market)
    s = lb.s_star * np.exp(market.r * lb.t)
    x = market_x(lb.t, s, market)
    tc = q.alpha ** 2 * lb.t
    phi = q.alpha * x - 2.0 * q.rho * tc
    return BoundaryCurve.from_phi(tc, phi, CanonicalParams(rho=q.rho, theta=1.0, alpha=q.alpha))


def canonical_to_lattice_boundary(curve: BoundaryCurve, market: MarketParams, price_at_root: float = float("nan")) -> LatticeBoundary:
    """Inverse of :func:`lattice_boundary_to_canonical`."""
    q = from_market(market)
    t = curve.t / q.alpha ** 2
    x = (curve.phi + 2.0 * q.rho * curve.t) / q.alpha
    s = market_s(t, x, market)
    return LatticeBoundary(t=t, s_star=s * np.exp(-market.r * t), price_at_root=price_at_root)
