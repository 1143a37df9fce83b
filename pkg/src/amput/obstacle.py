"""Finite-difference solver for the canonical obstacle problem.

The unknown is ``U = V_hat - V`` on the shifted canonical frame.  Writing
``U = e^t W`` removes the exponential growth, and ``W`` solves

    W_t - W_xx + W = g(x),   W >= 0,   complementarity,

with ``g`` a lumped Dirac mass ``theta (1 + rho) / h`` at the origin plus the
cell-averaged bulk term ``-(1 - rho^2) e^{rho x}`` on ``x > 0``.  Because ``g``
does not depend on time, the same tridiagonal LCP is solved at each implicit
Euler step, and its stationary version gives the perpetual boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.isotonic import isotonic_regression

from . import _kernels
from .canonical import (
    CanonicalParams,
    MarketParams,
    from_market,
    reward_canonical,
    market_x,
    SQRT2,
)
from .exceptions import (
    DegenerateLevelError,
    DomainError,
    InvalidParamsError,
    NoConvergenceError,
)

STRIP = 8


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time grid on ``[0, t_max] x [x_left, x_right]``."""

    t_max: float
    nt: int
    x_left: float
    x_right: float
    nx: int
    psor_tol: float = 1e-10
    psor_omega: float = 1.5
    psor_max_iter: int = 100_000

    @property
    def dt(self) -> float:
        return self.t_max / self.nt

    @property
    def h(self) -> float:
        return (self.x_right - self.x_left) / (self.nx - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_left + self.h * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @property
    def origin(self) -> int:
        """Index of the node at ``x = 0``."""
        return int(round(-self.x_left / self.h))

    def validate(self, p: Optional[CanonicalParams] = None) -> None:
        if not (self.t_max > 0.0 and math.isfinite(self.t_max)):
            raise InvalidParamsError(f"t_max must be positive, got {self.t_max}")
        if self.nt < 2:
            raise InvalidParamsError("nt must be at least 2")
        if self.nx < 3:
            raise InvalidParamsError("nx must be at least 3")
        if not (self.x_left < 0.0 < self.x_right):
            raise InvalidParamsError("grid must satisfy x_left < 0 < x_right")
        if not (0.0 < self.psor_omega < 2.0):
            raise InvalidParamsError("psor_omega must lie in (0, 2)")
        if self.psor_tol <= 0.0 or self.psor_max_iter < 1:
            raise InvalidParamsError("psor_tol and psor_max_iter must be positive")
        ratio = -self.x_left / self.h
        if abs(ratio - round(ratio)) > 1e-6:
            raise InvalidParamsError("no grid node lies at x = 0")
        if p is not None and not p.mu < self.x_right - 0.5:
            raise InvalidParamsError(
                f"x_right={self.x_right} too close to the asymptote mu={p.mu:.6g}; need mu < x_right - 0.5"
            )

    @classmethod
    def build(cls, p: CanonicalParams, h: float = 2.5e-3, dt: float = 5e-4, t_max: float = 8.0, **kw) -> "GridSpec":
        """Default truncation: ``x_left = -max(8, 6 sqrt(t_max))``, ``x_right = mu + 1``, snapped to ``h``."""
        if h <= 0.0 or dt <= 0.0 or t_max <= 0.0:
            raise InvalidParamsError("h, dt and t_max must be positive")
        m_left = int(math.ceil(max(8.0, 6.0 * math.sqrt(t_max)) / h - 1e-9))
        m_right = int(math.ceil((p.mu + 1.0) / h - 1e-9))
        nt = max(2, int(round(t_max / dt)))
        g = cls(t_max=float(t_max), nt=nt, x_left=-m_left * h, x_right=m_right * h, nx=m_left + m_right + 1, **kw)
        g.validate(p)
        return g


def source_term(p: CanonicalParams, grid: GridSpec) -> np.ndarray:
    """Time-independent source ``g`` of the ``W`` equation, averaged over each cell."""
    x = grid.x
    h = grid.h
    j0 = grid.origin
    rho = p.rho
    g = np.zeros(grid.nx)
    bulk = 1.0 - rho * rho
    if rho != 0.0:
        pos = x > 0.5 * h
        g[pos] = -bulk * np.exp(rho * x[pos]) * math.sinh(0.5 * rho * h) / (0.5 * rho * h)
        g[j0] = -bulk * math.expm1(0.5 * rho * h) / (rho * h)
    else:
        g[x > 0.5 * h] = -bulk
        g[j0] = -0.5 * bulk
    g[j0] += p.theta * (1.0 + rho) / h
    g[0] = g[-1] = 0.0
    return g


@dataclass(frozen=True)
class SolveStats:
    method: str
    psor_sweeps: int
    worst_sweeps: int
    max_violation: float
    steady_violation: float


@dataclass(frozen=True, eq=False)
class ObstacleSolution:
    """Discrete solution; ``w`` holds ``W = e^{-t} U`` at the snapshot times.

    ``front_k[n]`` is the last node with ``W > 0`` after step ``n`` and
    ``front_vals[n]`` the ``W`` values on the nodes ``front_k - STRIP + 2 ..
    front_k + 1``, so boundaries can be read at every time step without
    storing the full history.
    """

    grid: GridSpec
    params: CanonicalParams
    t: np.ndarray
    x: np.ndarray
    w: np.ndarray
    front_k: np.ndarray
    front_vals: np.ndarray
    steady_w: np.ndarray
    stats: SolveStats

    @property
    def u(self) -> np.ndarray:
        """``U(t_i, x_j)`` on the snapshot times."""
        return np.exp(self.t)[:, None] * self.w

    @property
    def source_mass(self) -> np.ndarray:
        """Line mass ``theta (1 + rho) e^t`` at the snapshot times."""
        return self.params.theta * (1.0 + self.params.rho) * np.exp(self.t)

    @property
    def step_times(self) -> np.ndarray:
        return self.grid.t


def solve(p: CanonicalParams, grid: GridSpec, method: str = "bs", save_every: Optional[int] = None) -> ObstacleSolution:
    """March the obstacle problem to ``grid.t_max``.

    ``method='bs'`` uses the Brennan-Schwartz direct LCP solve and falls back
    to PSOR at any step where the complementarity check fails; ``'psor'``
    iterates every step.  ``save_every`` controls the snapshot stride
    (default: about 200 snapshots).
    """
    grid.validate(p)
    if method not in ("bs", "psor"):
        raise InvalidParamsError(f"unknown method {method!r}")
    if save_every is None:
        save_every = max(1, grid.nt // 200)
    if save_every < 1:
        raise InvalidParamsError("save_every must be positive")
    g = source_term(p, grid)
    lam = grid.dt / grid.h ** 2
    code = _kernels.BRENNAN_SCHWARTZ if method == "bs" else _kernels.PSOR
    snaps, steps, front_k, front_vals, total, worst, viol = _kernels.march(
        g, lam, grid.dt, grid.nt, int(save_every), code,
        float(grid.psor_omega), float(grid.psor_tol), int(grid.psor_max_iter), STRIP,
    )
    if total < 0:
        raise NoConvergenceError(
            f"PSOR did not converge within {grid.psor_max_iter} sweeps at step {worst} (t={worst * grid.dt:.6g})"
        )
    steady, sviol = _kernels.steady_state(g, grid.h)
    stats = SolveStats(method=method, psor_sweeps=int(total), worst_sweeps=int(worst),
                       max_violation=float(viol), steady_violation=float(sviol))
    return ObstacleSolution(
        grid=grid, params=p, t=steps * grid.dt, x=grid.x, w=snaps,
        front_k=front_k, front_vals=front_vals, steady_w=steady, stats=stats,
    )


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Sampled free boundary ``phi(t)`` and deviation ``varphi = mu - phi``."""

    t: np.ndarray
    phi: np.ndarray
    varphi: np.ndarray
    dphi: np.ndarray
    params: CanonicalParams
    raw_phi: Optional[np.ndarray] = None
    mu_offset: float = 0.0
    h: Optional[float] = None

    @classmethod
    def from_phi(cls, t, phi, params: CanonicalParams, **kw) -> "BoundaryCurve":
        t = np.asarray(t, dtype=float)
        phi = np.asarray(phi, dtype=float)
        dphi = np.gradient(phi, t) if t.size > 1 else np.zeros_like(phi)
        return cls(t=t, phi=phi, varphi=params.mu - phi, dphi=dphi, params=params, **kw)

    @property
    def mu(self) -> float:
        return self.params.mu

    def tail(self, **kw):
        """Tail model fitted to the last samples; the default fit is cached."""
        from .quadrature import fit_tail

        if kw:
            return fit_tail(self.t, self.varphi, **kw)
        cached = self.__dict__.get("_tail")
        if cached is None:
            cached = fit_tail(self.t, self.varphi)
            object.__setattr__(self, "_tail", cached)
        return cached


def _refine(xk, h, wm, wk, wp, method):
    """Sub-grid boundary position from the last active node and its neighbours."""
    xk = np.asarray(xk, dtype=float)
    out = xk + 0.5 * h
    sq_den = np.sqrt(np.maximum(wm, 0.0)) - np.sqrt(np.maximum(wk, 0.0))
    sq_ok = sq_den > 0.0
    sq = np.where(sq_ok, xk + h * np.sqrt(np.maximum(wk, 0.0)) / np.where(sq_ok, sq_den, 1.0), out)
    if method == "sqrt":
        return sq
    den = wp - 2.0 * wk + wm
    ok = den > 0.0
    vert = xk - 0.5 * h * (wp - wm) / np.where(ok, den, 1.0)
    return np.where(ok, vert, sq)


def _front_position(x, w, threshold, method, h):
    k = np.nonzero(w > threshold)[0]
    if k.size == 0:
        return None
    k = k[-1]
    wp = w[k + 1] if k + 1 < w.size else 0.0
    return float(_refine(x[k], h, w[k - 1], w[k], wp, method))


def extract_boundary(sol: ObstacleSolution, threshold: float = 0.0, method: str = "vertex",
                     calibrate: bool = True) -> BoundaryCurve:
    """Boundary at every time step of ``sol``.

    The last node with ``W > threshold`` is refined with the parabola through
    it and its two neighbours (``method='vertex'``, the smooth-fit double
    root) or with a linear fit of ``sqrt W`` (``'sqrt'``).  The raw curve is
    projected onto nondecreasing sequences, and with ``calibrate`` the whole
    curve is shifted by the gap between the asymptote and the boundary of
    the discrete stationary problem, which removes the grid's bias at
    large times.
    """
    if method not in ("vertex", "sqrt"):
        raise InvalidParamsError(f"unknown extraction method {method!r}")
    grid = sol.grid
    p = sol.params
    t = grid.t
    h = grid.h
    x = grid.x
    if p.theta == 0.0:
        z = np.zeros_like(t)
        return BoundaryCurve(t=t, phi=z, varphi=z.copy(), dphi=z.copy(), params=p, raw_phi=z.copy(), h=h)

    vals = sol.front_vals[1:]
    k_last = sol.front_k[1:]
    if np.any(k_last < 0):
        bad = int(np.nonzero(k_last < 0)[0][0]) + 1
        raise DegenerateLevelError(f"no active node at t={t[bad]:.6g}")
    # index inside the strip of the last value above threshold
    above = vals > threshold
    above[:, -1] = False
    has = above.any(axis=1)
    if not np.all(has):
        bad = int(np.nonzero(~has)[0][0]) + 1
        raise DegenerateLevelError(f"no node above threshold {threshold} at t={t[bad]:.6g}")
    i = STRIP - 1 - np.argmax(above[:, ::-1], axis=1)
    if np.any(i < 1):
        raise DegenerateLevelError("threshold too high for the stored front strip")
    rows = np.arange(vals.shape[0])
    node = k_last - STRIP + 2 + i
    raw = np.empty_like(t)
    raw[0] = 0.0
    raw[1:] = _refine(x[node], h, vals[rows, i - 1], vals[rows, i], vals[rows, i + 1], method)

    offset = 0.0
    if calibrate:
        mu_h = _front_position(x, sol.steady_w, threshold, method, h)
        if mu_h is None:
            raise DegenerateLevelError("stationary problem has no active node")
        offset = mu_h - p.mu
    phi = isotonic_regression(raw, increasing=True) - offset
    phi[0] = 0.0
    phi = np.maximum(phi, 0.0)
    return BoundaryCurve.from_phi(t, phi, p, raw_phi=raw, mu_offset=offset, h=h)


def smooth_fit_residual(sol: ObstacleSolution, curve: Optional[BoundaryCurve] = None) -> np.ndarray:
    """One-sided difference ``(U_{k+1} - U_k)/h`` across the last active node, per time step.

    Smooth fit makes ``U_x`` vanish on the boundary, so this is a pure
    discretisation residual of order ``h``.
    """
    t = sol.grid.t
    if sol.params.theta == 0.0:
        return np.zeros_like(t)
    wk = sol.front_vals[:, STRIP - 2]
    wp = sol.front_vals[:, STRIP - 1]
    res = np.exp(t) * (wp - wk) / sol.grid.h
    res[sol.front_k < 0] = 0.0
    res[0] = 0.0
    return res


def _interp_w(sol: ObstacleSolution, t, x):
    ts = sol.t
    if np.any(t < 0.0) or np.any(t > ts[-1] + 1e-12):
        raise DomainError(f"t outside [0, {ts[-1]}]")
    xs = sol.x
    if np.any(x < xs[0]) or np.any(x > xs[-1]):
        raise DomainError(f"x outside [{xs[0]}, {xs[-1]}]")
    i = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2)
    a = np.clip((t - ts[i]) / (ts[i + 1] - ts[i]), 0.0, 1.0)
    j = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
    b = np.clip((x - xs[j]) / (xs[j + 1] - xs[j]), 0.0, 1.0)
    w = sol.w
    return ((1 - a) * ((1 - b) * w[i, j] + b * w[i, j + 1])
            + a * ((1 - b) * w[i + 1, j] + b * w[i + 1, j + 1]))


def envelope_value(sol: ObstacleSolution, t, x, market: Optional[MarketParams] = None):
    """Envelope ``V_hat = U + V`` by bilinear interpolation of the snapshots.

    Without ``market`` the point is in the shifted canonical frame.  With
    ``market`` the point ``(t, x)`` is in market Wiener coordinates and the
    returned value is ``V_hat_{r,sigma}(t, x)``, obtained through the scaling
    ``(alpha^2 t, alpha x)`` and the affine shift.  The solution must then be
    the put problem (``theta = 1``) with the matching ``rho``.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    p = sol.params
    if market is None:
        tc, xc, weight = t, x, 1.0
    else:
        q = from_market(market)
        if p.theta != 1.0 or abs(q.rho - p.rho) > 1e-12:
            raise InvalidParamsError("solution does not match the market parameters")
        tc = q.alpha ** 2 * t
        y = q.alpha * x
        xc = y - 2.0 * q.rho * tc
        weight = np.exp(q.rho ** 2 * tc - q.rho * y)
    u = np.exp(tc) * _interp_w(sol, tc, xc)
    out = weight * (u + reward_canonical(tc, xc, p))
    return out[()] if np.ndim(out) == 0 else out


def put_price(sol: ObstacleSolution, market: MarketParams, t: float, s_nominal) -> float:
    """American put price for nominal strike 1, time to expiry ``t``, nominal stock ``s_nominal``."""
    s = np.asarray(s_nominal, dtype=float) * math.exp(market.r * t)
    x = market_x(t, s, market)
    return np.exp(-market.r * t) * envelope_value(sol, t, x, market)
