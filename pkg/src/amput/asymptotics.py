"""Large-time constants of the free boundary and related closed forms.

Covers the Lemma-type lower envelope ``mu - B_1 t^{-3/2} e^{-t}``, the leading
coefficient ``beta_1 = Gamma(3/2) lambda_0`` of the deviation, the spectral
density ``Lambda`` on ``[1, 2]``, the caloric extension of odd data, and the
second-order response of the deviation to small ``theta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .canonical import CanonicalParams, eta as _eta, mu as _mu
from .exceptions import DomainError, InvalidParamsError
from .obstacle import BoundaryCurve, GridSpec, extract_boundary, solve
from .quadrature import increments, midpoints, parts_kernel

SQRT_PI = math.sqrt(math.pi)
GAMMA_32 = 0.5 * SQRT_PI
RICHARDSON_EPS = 1e-3


# -- closed forms ------------------------------------------------------------


def _exm1_over_sq(y: float) -> float:
    """``(e^y - 1 - y) / y^2``; series for tiny ``y``."""
    if abs(y) < 1e-4:
        return 0.5 + y / 6.0 + y * y / 24.0
    return (math.expm1(y) - y) / (y * y)


def first_moment_v1(p: CanonicalParams) -> float:
    """Signed first moment ``int (x - mu) V_1(0, x) dx`` of the reflected boundary data.

    ``V_1 = V_2 - V_3``; the ``V_2`` part contributes ``-2 eta e^mu`` (the
    odd exponential tent ``eta sgn(mu - x) min(e^x, e^{2mu - x})`` centred at
    ``mu``).  The ``V_3`` part is evaluated in closed form, with a series for
    ``(e^{rho mu} - 1 - rho mu)/rho^2`` at small ``rho``.
    """
    m = _mu(p)
    e = _eta(p)
    rho, theta = p.rho, p.theta
    v2 = -2.0 * e * math.exp(m)
    v3 = (-2.0 * m * m * _exm1_over_sq(rho * m)
          + (1.0 - rho) * math.exp((rho + 1.0) * m) * (math.expm1(-m) + m)
          + (1.0 - theta) * (1.0 + rho) * (math.expm1(m) - m))
    return v2 - v3


def b1(p: CanonicalParams) -> float:
    """Constant of the lower envelope ``mu - B_1 t^{-3/2} e^{-t}``."""
    return -math.exp(-p.rho * _mu(p)) / (2.0 * SQRT_PI * (1.0 - p.rho ** 2)) * first_moment_v1(p)


def v1_initial(x, p: CanonicalParams):
    """``V_1(0, x)``: ``eta e^x - V(0, x)`` left of ``mu``, reflected oddly about ``mu``."""
    x = np.asarray(x, dtype=float)
    m = _mu(p)
    e = _eta(p)
    rho, theta = p.rho, p.theta
    c_minus = 0.5 * (1.0 + theta - rho + theta * rho)
    c_plus = 0.5 * (1.0 - theta) * (1.0 + rho)

    def left(y):
        reward = np.where(y > 0.0, np.exp(rho * y) - c_minus * np.exp(-y) - c_plus * np.exp(y), 0.0)
        return e * np.exp(y) - reward

    out = np.where(x <= m, left(np.minimum(x, m)), -left(np.minimum(2.0 * m - x, m)))
    return out[()] if out.ndim == 0 else out


def stop_on_lines_value(p: CanonicalParams, t, x):
    """Value ``V_tilde`` of stopping on ``t = 0`` or on the line ``x = mu``.

    ``V_tilde = eta e^{t+x} - V_1(t, x)`` for ``x <= mu``, where ``V_1`` is
    the caloric extension of :func:`v1_initial`.  It is a lower bound for
    the envelope there.
    """
    scalar = np.ndim(t) == 0 and np.ndim(x) == 0
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    m = _mu(p)
    if np.any(x > m + 1e-12):
        raise DomainError("stop-on-lines value is defined for x <= mu")
    if np.any(t <= 0.0):
        raise DomainError("t must be positive")
    out = np.empty(t.shape)
    for idx in np.ndindex(t.shape):
        tt, xx = float(t[idx]), float(x[idx])
        w = 2.0 * math.sqrt(tt)

        def f(xi):
            return math.exp(-((xx - xi) ** 2) / (4.0 * tt)) * float(v1_initial(xi, p))

        pts = sorted({0.0, m, 2.0 * m})
        lo, hi = xx - 40.0 * w, xx + 40.0 * w
        knots = [lo] + [q for q in pts if lo < q < hi] + [hi]
        val = sum(integrate.quad(f, a, b, limit=200, epsabs=0.0, epsrel=1e-12)[0]
                  for a, b in zip(knots[:-1], knots[1:]))
        out[idx] = _eta(p) * math.exp(tt + xx) - val / (2.0 * math.sqrt(math.pi * tt))
    return float(out) if scalar else out


def lemma_lower_bound(t, p: CanonicalParams):
    """``mu - B_1 t^{-3/2} e^{-t}`` (without the unquantified next-order term)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        out = _mu(p) - b1(p) * t ** -1.5 * np.exp(-t)
    return out


def expansion_eval(t, coefficients: Sequence[float]):
    """``sum_j lambda_j Gamma(j + 3/2) t^{-j-3/2} e^{-t}``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise DomainError("t must be positive")
    out = np.zeros_like(t)
    for j, lam in enumerate(coefficients):
        out = out + lam * math.gamma(j + 1.5) * t ** (-j - 1.5)
    out = out * np.exp(-t)
    return out[()] if out.ndim == 0 else out


def small_time_reference(t, rho: float):
    """``(1 + rho) sqrt(2 t log(1/t))``, the small-time boundary of the put (``theta = 1``)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0) or np.any(t >= 1.0 / math.e):
        raise DomainError("small-time reference needs 0 < t < 1/e")
    out = (1.0 + rho) * np.sqrt(-2.0 * t * np.log(t))
    return out[()] if out.ndim == 0 else out


def upper_gamma_mhalf(t):
    """``Gamma(-1/2, t) = 2 (e^{-t}/sqrt t - sqrt(pi) erfc(sqrt t))``."""
    t = np.asarray(t, dtype=float)
    st = np.sqrt(t)
    return 2.0 * (np.exp(-t) / st - SQRT_PI * special.erfc(st))


def d2varphi_dtheta2_at0(t, rho: float):
    """Second ``theta``-derivative of the deviation at ``theta = 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise DomainError("t must be positive")
    out = upper_gamma_mhalf(t) / (2.0 * SQRT_PI * (1.0 - rho) ** 2)
    return out[()] if out.ndim == 0 else out


# -- caloric extension -------------------------------------------------------


def heat_extension(f, t: float, x: float, xi: Optional[np.ndarray] = None, odd_tol: float = 1e-10):
    """Caloric extension of odd data and the leading term of its large-time asymptotics.

    ``f`` is either a callable or an array of samples on the symmetric grid
    ``xi``.  Returns ``(value, leading_term)`` with
    ``leading_term = x / (4 sqrt(pi) t^{3/2}) int f(xi) xi dxi``.
    """
    if t <= 0.0:
        raise DomainError("t must be positive")
    if callable(f):
        probe = np.linspace(0.0, 20.0, 401)
        fp = np.asarray([f(v) for v in probe], dtype=float)
        fm = np.asarray([f(-v) for v in probe], dtype=float)
        scale = max(1.0, float(np.max(np.abs(fp))))
        if np.max(np.abs(fp + fm)) > odd_tol * scale:
            raise InvalidParamsError("heat_extension requires odd data")
        moment = 2.0 * integrate.quad(lambda v: f(v) * v, 0.0, np.inf, limit=400, epsabs=0.0, epsrel=1e-13)[0]
        width = 2.0 * math.sqrt(t)

        def kern(v):
            return math.exp(-((x - v) ** 2) / (4.0 * t)) * f(v)

        knots = [x - 40.0 * width, x - 5.0 * width, x, x + 5.0 * width, x + 40.0 * width, -30.0, 30.0]
        knots = sorted(set(knots + [0.0]))
        val = sum(integrate.quad(kern, a, b, limit=400, epsabs=0.0, epsrel=1e-13)[0]
                  for a, b in zip(knots[:-1], knots[1:]))
        val += integrate.quad(kern, -np.inf, knots[0], limit=200)[0]
        val += integrate.quad(kern, knots[-1], np.inf, limit=200)[0]
    else:
        if xi is None:
            raise InvalidParamsError("sample grid xi is required with sampled data")
        xi = np.asarray(xi, dtype=float)
        vals = np.asarray(f)
        if xi.shape != vals.shape or np.max(np.abs(xi + xi[::-1])) > 1e-12:
            raise InvalidParamsError("xi must be a symmetric grid matching the samples")
        scale = max(1.0, float(np.max(np.abs(vals))))
        if np.max(np.abs(vals + vals[::-1])) > odd_tol * scale:
            raise InvalidParamsError("heat_extension requires odd data")
        moment = np.trapezoid(vals * xi, xi)
        val = np.trapezoid(np.exp(-((x - xi) ** 2) / (4.0 * t)) * vals, xi)
    value = val / (2.0 * math.sqrt(math.pi * t))
    leading = x / (4.0 * SQRT_PI * t ** 1.5) * moment
    return value, leading


# -- boundary integrals --------------------------------------------------------


def _zero(curve: BoundaryCurve, p: CanonicalParams) -> bool:
    return p.theta == 0.0 or not np.any(curve.varphi != 0.0)


def _stieltjes_with_tail(curve: BoundaryCurve, kern: Callable, tail_kern: Callable) -> float:
    """``sum |d varphi| K(t, varphi)`` plus ``int_T^inf tail_kern(t, model)``."""
    data = np.sum(increments(curve.varphi) * kern(midpoints(curve.t), midpoints(curve.varphi)))
    tail = curve.tail()
    return float(data + tail.integrate(lambda tt: tail_kern(tt, tail)))


def _weighted_flux(curve: BoundaryCurve, p: CanonicalParams) -> float:
    """``int |varphi'| varphi e^{-rho varphi} e^t dt``."""
    rho = p.rho
    return _stieltjes_with_tail(
        curve,
        lambda tt, vv: vv * np.exp(tt - rho * vv),
        lambda tt, tl: tl.m(tt) * tl.varphi(tt) * math.exp(-rho * tl.varphi(tt)),
    )


def _flux(curve: BoundaryCurve, p: CanonicalParams) -> float:
    rho = p.rho
    return _stieltjes_with_tail(
        curve,
        lambda tt, vv: np.exp(tt - rho * vv),
        lambda tt, tl: tl.m(tt) * math.exp(-rho * tl.varphi(tt)),
    )


def lambda0(curve: BoundaryCurve, p: Optional[CanonicalParams] = None, line: int = 2) -> float:
    """Leading coefficient of ``Lambda(x) / sqrt(x - 1)`` at ``x = 1``.

    ``line=2``: ``(1/pi) int |varphi'| (mu - varphi) e^{-rho varphi} e^t dt``.
    ``line=1``: the closed flux value ``theta mu e^{-mu rho}/(pi (1-rho))``
    minus ``(1/pi) int |varphi'| varphi e^{-rho varphi} e^t dt``.
    The two agree exactly when the flux identity holds.
    """
    p = curve.params if p is None else p
    if _zero(curve, p):
        return 0.0
    weighted = _weighted_flux(curve, p)
    if line == 1:
        return (p.theta * p.mu * math.exp(-p.mu * p.rho) / (1.0 - p.rho) - weighted) / math.pi
    if line == 2:
        return (p.mu * _flux(curve, p) - weighted) / math.pi
    raise ValueError("line must be 1 or 2")


def beta1(curve: BoundaryCurve, p: Optional[CanonicalParams] = None, form: str = "lambda0") -> float:
    """Leading coefficient ``beta_1`` of ``varphi(t) ~ beta_1 t^{-3/2} e^{-t}``.

    ``form='lambda0'``: ``Gamma(3/2) lambda_0``.
    ``form='intro'``: ``e^{-rho mu}/(2 sqrt pi) int phi e^{rho phi} phi' e^t dt`` as a
    Stieltjes sum over the increments of ``phi``.
    ``form='parts'``: the integrated-by-parts form, a plain ``dt`` integral of
    ``varphi`` with no derivative at all.
    """
    p = curve.params if p is None else p
    if _zero(curve, p):
        return 0.0
    rho, m = p.rho, p.mu
    if form == "lambda0":
        return GAMMA_32 * lambda0(curve, p)
    if form == "intro":
        phi = curve.phi
        dphi = phi[1:] - phi[:-1]
        tm = midpoints(curve.t)
        pm = midpoints(phi)
        data = np.sum(dphi * pm * np.exp(rho * (pm - m) + tm))
        tail = curve.tail()
        extra = tail.integrate(lambda tt: tail.m(tt) * (m - tail.varphi(tt)) * math.exp(-rho * tail.varphi(tt)))
        return float((data + extra) / (2.0 * SQRT_PI))
    if form == "parts":
        head = p.theta * m * math.exp(-rho * m) / (1.0 - rho) + m * m * float(parts_kernel(rho * m))
        v = curve.varphi
        data = np.trapezoid(parts_kernel(rho * v) * v * v * np.exp(curve.t), curve.t)
        tail = curve.tail()
        extra = tail.integrate(
            lambda tt: float(parts_kernel(rho * tail.varphi(tt))) * tail.g(tt) ** 2 * math.exp(-tt)
        )
        return float((head + data + extra) / (2.0 * SQRT_PI))
    raise ValueError(f"unknown form {form!r}")


@dataclass(frozen=True)
class TailFit:
    """Summary of ``q(t) = varphi(t) t^{3/2} e^t`` on a window."""

    coef: float
    q_min: float
    q_max: float
    spread: float
    loglog_slope: float
    window: tuple


def tail_fit(curve: BoundaryCurve, t_lo: float = 4.0, t_hi: float = 7.0) -> TailFit:
    """Least-squares constant fit of ``q`` on ``[t_lo, t_hi]`` and the log-log slope of ``varphi e^t``."""
    sel = (curve.t >= t_lo) & (curve.t <= t_hi)
    if sel.sum() < 2:
        raise DomainError(f"curve has no samples in [{t_lo}, {t_hi}]")
    t = curve.t[sel]
    v = curve.varphi[sel]
    if not np.all(v > 0.0):
        return TailFit(0.0, 0.0, 0.0, 0.0, float("nan"), (t_lo, t_hi))
    q = v * t ** 1.5 * np.exp(t)
    c = float(np.mean(q))
    slope = float(np.polyfit(np.log(t), np.log(v * np.exp(t)), 1)[0])
    return TailFit(coef=c, q_min=float(q.min()), q_max=float(q.max()),
                   spread=float((q.max() - q.min()) / c), loglog_slope=slope, window=(t_lo, t_hi))


# -- Lambda density ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LambdaDensity:
    x: np.ndarray
    lam: np.ndarray
    lambda0_limit: float


def _lambda_one(curve: BoundaryCurve, p: CanonicalParams, x: float) -> float:
    eps = x - 1.0
    if eps == 0.0:
        return 0.0
    r = math.sqrt(eps)
    rho = p.rho
    head = p.theta * math.exp(-p.mu * rho) / (1.0 - rho) * math.sin(p.mu * r)

    def sinc(v):
        v = np.asarray(v, dtype=float)
        return np.where(v == 0.0, r, np.sin(v * r) / np.where(v == 0.0, 1.0, v))

    integral = _stieltjes_with_tail(
        curve,
        lambda tt, vv: np.exp(-rho * vv) * np.sin(vv * r) * np.exp(x * tt),
        lambda tt, tl: tl.m(tt) * math.exp(-rho * tl.varphi(tt)) * float(sinc(tl.varphi(tt)))
        * tl.g(tt) * math.exp((x - 2.0) * tt),
    )
    return (head - integral) / (math.pi * x)


def lambda_density(curve: BoundaryCurve, x, p: Optional[CanonicalParams] = None, allow_wide: bool = False):
    """``Lambda(x)`` for ``1 <= x <= 1.9`` (``allow_wide`` extends to 2).

    The integrand grows like ``e^{x t}`` and only the decay of ``varphi``
    tames it; near ``x = 2`` the remaining decay is algebraic.
    """
    p = curve.params if p is None else p
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    hi = 2.0 if allow_wide else 1.9
    if np.any(xs < 1.0) or np.any(xs > hi):
        raise DomainError(f"Lambda is evaluated on [1, {hi}]")
    if np.any(xs > 1.9):
        warnings.warn("Lambda near x = 2 relies on slowly converging tail integrals", RuntimeWarning)
    if _zero(curve, p):
        out = np.zeros_like(xs)
    else:
        out = np.array([_lambda_one(curve, p, float(v)) for v in xs])
    return out[0] if np.ndim(x) == 0 else out


def lambda_density_table(curve: BoundaryCurve, x=None, p: Optional[CanonicalParams] = None) -> LambdaDensity:
    """Samples of ``Lambda`` and the extrapolated limit of ``Lambda(x)/sqrt(x-1)`` at ``x = 1``.

    The limit uses Richardson extrapolation on ``x - 1`` in ``{eps, 4 eps}``:
    ``Lambda(1 + e)/sqrt(e) = lambda_0 + O(e)``.
    """
    p = curve.params if p is None else p
    if x is None:
        x = np.linspace(1.0, 1.9, 19)
    x = np.asarray(x, dtype=float)
    lam = lambda_density(curve, x, p)
    e = RICHARDSON_EPS
    r1 = lambda_density(curve, 1.0 + e, p) / math.sqrt(e)
    r4 = lambda_density(curve, 1.0 + 4.0 * e, p) / math.sqrt(4.0 * e)
    return LambdaDensity(x=x, lam=np.asarray(lam), lambda0_limit=float((4.0 * r1 - r4) / 3.0))


def phi_lambda(curve: BoundaryCurve, t, p: Optional[CanonicalParams] = None, n_nodes: int = 40):
    """Laplace transform ``int_1^2 Lambda(x) e^{-t x} dx`` (via ``x = 1 + u^2``)."""
    p = curve.params if p is None else p
    u, w = np.polynomial.legendre.leggauss(n_nodes)
    u = 0.5 * (u + 1.0)
    w = 0.5 * w
    xs = 1.0 + u * u
    lam = lambda_density(curve, xs, p, allow_wide=True) if xs.max() <= 2.0 else None
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([np.sum(w * lam * np.exp(-tt * xs) * 2.0 * u) for tt in t])
    return out[0] if out.size == 1 else out


def phi_lambda_diagnostic(curve: BoundaryCurve, t=None, p: Optional[CanonicalParams] = None):
    """``|varphi - varphi_Lambda| t^{3/2} e^t`` on ``t`` (default ``[3, 6]``)."""
    p = curve.params if p is None else p
    if t is None:
        t = np.linspace(3.0, 6.0, 7)
    t = np.asarray(t, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fl = phi_lambda(curve, t, p)
    v = np.interp(t, curve.t, curve.varphi)
    return t, np.abs(v - fl) * t ** 1.5 * np.exp(t)


# -- small-theta perturbation --------------------------------------------------


@dataclass(frozen=True)
class PerturbationCheck:
    t: tuple
    delta: float
    varphi_delta: tuple
    varphi_half: tuple
    scaled: tuple
    closed_form: tuple
    ratio_to_closed_form: tuple
    onset_ratio: tuple
    first_order: tuple


def _default_perturbation_solver(rho, theta, h, dt, t_max):
    p = CanonicalParams(rho=rho, theta=theta)
    return extract_boundary(solve(p, GridSpec.build(p, h=h, dt=dt, t_max=t_max)))


def first_theta_derivative_check(rho: float = 0.0, delta: float = 0.05, t_points=(0.5, 1.0, 2.0),
                                 solver: Optional[Callable] = None, h: float = 1e-3, dt: float = 2e-4,
                                 t_max: Optional[float] = None) -> PerturbationCheck:
    """Solve at ``theta = delta`` and ``delta/2`` and compare with the second-order closed form.

    ``solver(rho, theta, h, dt, t_max)`` must return a :class:`BoundaryCurve`.
    ``first_order`` holds ``varphi(t; delta)/delta``, which should be small;
    ``onset_ratio`` holds ``varphi(t; delta/2)/varphi(t; delta)``, close to 1/4.
    """
    if not delta > 0.0:
        raise InvalidParamsError("delta must be positive")
    solver = solver or _default_perturbation_solver
    t_points = tuple(float(v) for v in t_points)
    if t_max is None:
        t_max = max(t_points) + 0.5
    c1 = solver(rho, delta, h, dt, t_max)
    c2 = solver(rho, 0.5 * delta, h, dt, t_max)
    tp = np.asarray(t_points)
    v1 = np.interp(tp, c1.t, c1.varphi)
    v2 = np.interp(tp, c2.t, c2.varphi)
    scaled = 2.0 * v1 / delta ** 2
    closed = d2varphi_dtheta2_at0(tp, rho)
    return PerturbationCheck(
        t=t_points, delta=delta, varphi_delta=tuple(v1), varphi_half=tuple(v2),
        scaled=tuple(scaled), closed_form=tuple(np.atleast_1d(closed)),
        ratio_to_closed_form=tuple(scaled / closed), onset_ratio=tuple(v2 / v1),
        first_order=tuple(v1 / delta),
    )


# -- report ------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticReport:
    mu: float
    eta: float
    first_moment_V1: float
    B1: float
    lambda0: float
    beta1: float
    beta1_alt: float
    beta1_intro: float
    tail_fit: float
    consistency: float

    def as_dict(self) -> dict:
        """Flat document with the serialised key names."""
        return {
            "mu": self.mu, "eta": self.eta, "moment_v1": self.first_moment_V1, "B1": self.B1,
            "lambda0": self.lambda0, "beta1": self.beta1, "beta1_intro": self.beta1_intro,
            "beta1_parts": self.beta1_alt, "tail_fit": self.tail_fit, "consistency": self.consistency,
        }


def asymptotic_report(curve: BoundaryCurve, p: Optional[CanonicalParams] = None,
                      tail_window=(4.0, 7.0)) -> AsymptoticReport:
    p = curve.params if p is None else p
    lam = lambda0(curve, p)
    b = GAMMA_32 * lam
    alt = beta1(curve, p, "parts")
    intro = beta1(curve, p, "intro")
    try:
        tf = tail_fit(curve, *tail_window).coef if not _zero(curve, p) else 0.0
    except DomainError:
        tf = float("nan")
    return AsymptoticReport(
        mu=_mu(p), eta=_eta(p), first_moment_V1=first_moment_v1(p), B1=b1(p), lambda0=lam,
        beta1=b, beta1_alt=alt, beta1_intro=intro, tail_fit=tf, consistency=abs(b - alt),
    )
