"""Checks of the balayage equation and its Laplace-transform consequences on a computed boundary.

All boundary-side integrals are quadratures over the sampled deviation
``varphi = mu - phi``; those against ``|varphi'| dt`` are Stieltjes sums over
the increments of ``varphi``, and every quadrature is continued past the
last sample with the fitted tail model of :mod:`amput.quadrature`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .canonical import CanonicalParams
from .exceptions import DomainError, PoleError
from .obstacle import BoundaryCurve
from .quadrature import (
    exp_trapezoid,
    increments,
    midpoints,
    taylor_remainder,
    taylor_remainder_ratio,
)

__all__ = [
    "DELTA",
    "LaplacePoint",
    "BalayageResidual",
    "balayage_lhs",
    "balayage_rhs",
    "residual",
    "residual_table",
    "derivative_identity_residual",
    "flux_integral",
    "flux_identity_residual",
    "taylor_remainder",
    "phi_transform",
    "psi_transform",
    "e2_term",
]

DELTA = 0.05
_NEAR = 1e-3


@dataclass(frozen=True)
class LaplacePoint:
    """Laplace variable ``s`` and its principal square root ``z``."""

    s: complex
    z: complex

    @classmethod
    def of(cls, s) -> "LaplacePoint":
        s = complex(s)
        return cls(s=s, z=cmath.sqrt(s))


@dataclass(frozen=True)
class BalayageResidual:
    s: complex
    lhs: complex
    rhs: complex
    abs_err: float
    rel_err: float
    tail_estimate: float

    @classmethod
    def build(cls, s, lhs, rhs, tail_estimate=0.0) -> "BalayageResidual":
        err = abs(lhs - rhs)
        rel = err / abs(rhs) if rhs != 0 else (0.0 if err == 0 else math.inf)
        return cls(s=complex(s), lhs=complex(lhs), rhs=complex(rhs), abs_err=err, rel_err=rel,
                   tail_estimate=float(tail_estimate))

    def row(self) -> dict:
        return {
            "re_s": self.s.real, "im_s": self.s.imag,
            "lhs_re": self.lhs.real, "lhs_im": self.lhs.imag,
            "rhs_re": self.rhs.real, "rhs_im": self.rhs.imag,
            "abs_err": self.abs_err, "rel_err": self.rel_err,
            "tail_estimate": self.tail_estimate,
        }


def _params(curve: BoundaryCurve, p: Optional[CanonicalParams]) -> CanonicalParams:
    return curve.params if p is None else p


def _check_s(s):
    s = complex(s)
    if not s.real > 1.0 + DELTA:
        raise DomainError(f"need Re s > {1.0 + DELTA}, got s={s}")
    return LaplacePoint.of(s)


def _is_zero(curve: BoundaryCurve) -> bool:
    return not np.any(curve.varphi != 0.0)


def balayage_rhs(s, p: CanonicalParams) -> complex:
    """Closed-form side ``e^{-mu rho}/(1-rho) (1 - rho + theta(rho + sqrt s))/(s - 1) e^{-mu sqrt s}``."""
    s = complex(s)
    if s == 1.0:
        raise PoleError("balayage right-hand side has a pole at s = 1")
    z = cmath.sqrt(s)
    mu, rho, theta = p.mu, p.rho, p.theta
    return math.exp(-mu * rho) / (1.0 - rho) * (1.0 - rho + theta * (rho + z)) / (s - 1.0) * cmath.exp(-mu * z)


def _lhs_parts(curve, pt: LaplacePoint, p):
    t, v = curve.t, curve.varphi
    a = p.rho + pt.z
    T = t[-1]
    data = exp_trapezoid(t, np.exp(-v * a), pt.s - 1.0)
    closed = cmath.exp(-(pt.s - 1.0) * T) / (pt.s - 1.0)
    tail = curve.tail()
    if tail.is_zero:
        est = 0.0
    else:
        est = abs(a) * tail.integrate(lambda tt: tail.g(tt) * math.exp(-pt.s.real * tt))
    return data + closed, est


def balayage_lhs(curve: BoundaryCurve, s, p: Optional[CanonicalParams] = None) -> complex:
    """Product trapezoid of ``int e^{-varphi (rho + sqrt s)} e^{-(s-1)t} dt`` with ``varphi = 0`` past the last sample."""
    p = _params(curve, p)
    return _lhs_parts(curve, _check_s(s), p)[0]


def residual(curve: BoundaryCurve, s, p: Optional[CanonicalParams] = None) -> BalayageResidual:
    p = _params(curve, p)
    pt = _check_s(s)
    lhs, est = _lhs_parts(curve, pt, p)
    return BalayageResidual.build(pt.s, lhs, balayage_rhs(pt.s, p), est)


def residual_table(curve: BoundaryCurve, s_values: Sequence, p: Optional[CanonicalParams] = None) -> list:
    return [residual(curve, s, p) for s in s_values]


def derivative_identity_residual(curve: BoundaryCurve, s, p: Optional[CanonicalParams] = None,
                                 pointwise: bool = False) -> BalayageResidual:
    """``int |varphi'| e^{-varphi(rho + sqrt s)} e^{-(s-1)t} dt`` against ``theta e^{-mu rho}/(1-rho) e^{-mu sqrt s}``.

    The default evaluation is a Stieltjes sum over boundary increments;
    ``pointwise=True`` integrates the finite-difference derivative instead.
    """
    p = _params(curve, p)
    pt = _check_s(s)
    a = p.rho + pt.z
    rhs = p.theta * math.exp(-p.mu * p.rho) / (1.0 - p.rho) * cmath.exp(-p.mu * pt.z)
    if _is_zero(curve):
        return BalayageResidual.build(pt.s, 0.0, rhs, 0.0)

    def kern(tt, vv):
        return np.exp(-vv * a - (pt.s - 1.0) * tt)

    if pointwise:
        data = np.trapezoid(np.abs(curve.dphi) * kern(curve.t, curve.varphi), curve.t)
    else:
        data = np.sum(increments(curve.varphi) * kern(midpoints(curve.t), midpoints(curve.varphi)))
    tail = curve.tail()
    extra = tail.integrate(
        lambda tt: tail.m(tt) * cmath.exp(-pt.s * tt - a * tail.varphi(tt)), complex_valued=True
    )
    return BalayageResidual.build(pt.s, data + extra, rhs, abs(extra))


def flux_integral(curve: BoundaryCurve, p: Optional[CanonicalParams] = None, pointwise: bool = False) -> float:
    """``int_0^inf |varphi'| e^{-rho varphi} e^t dt`` (Stieltjes sum plus model tail)."""
    p = _params(curve, p)
    if _is_zero(curve):
        return 0.0
    rho = p.rho

    def kern(tt, vv):
        return np.exp(tt - rho * vv)

    if pointwise:
        data = np.trapezoid(np.abs(curve.dphi) * kern(curve.t, curve.varphi), curve.t)
    else:
        data = np.sum(increments(curve.varphi) * kern(midpoints(curve.t), midpoints(curve.varphi)))
    tail = curve.tail()
    return float(data + tail.integrate(lambda tt: tail.m(tt) * math.exp(-rho * tail.varphi(tt))))


def flux_identity_residual(curve: BoundaryCurve, p: Optional[CanonicalParams] = None, pointwise: bool = False) -> float:
    """``|int phi' e^{rho phi} e^t dt - theta/(1-rho)|``; zero when ``theta = 0``."""
    p = _params(curve, p)
    value = math.exp(p.rho * p.mu) * flux_integral(curve, p, pointwise)
    return abs(value - p.theta / (1.0 - p.rho))


# -- transforms of the deviation -------------------------------------------


def _g_function(z, p: CanonicalParams) -> complex:
    """``G(z) = [1 - e^{-mu rho}(1 - rho + theta(z + rho)) e^{-mu z}/(1-rho)] / (z^2 - 1)``, regular at ``z = 1``."""
    mu, rho, theta = p.mu, p.rho, p.theta
    z = complex(z)
    base = (1.0 - rho + theta * (z + rho)) / (1.0 - rho)
    if abs(z - 1.0) < 1e-7:
        dlog = theta / (1.0 - rho + theta * (1.0 + rho)) - mu
        return -dlog / 2.0
    expo = cmath.log(base) - mu * (z + rho) if base != 0 else None
    if expo is None:
        return 1.0 / (z * z - 1.0)
    return -complex(taylor_remainder(np.array([expo]), 0)[0]) / (z * z - 1.0)


def e2_term(curve: BoundaryCurve, z, p: Optional[CanonicalParams] = None) -> complex:
    """``int_0^inf E_2(-(rho + z) varphi) e^{-(z^2-1)t} dt``."""
    p = _params(curve, p)
    z = complex(z)
    if not (z * z).real > -1.0:
        raise DomainError(f"need Re z^2 > -1, got z={z}")
    if _is_zero(curve):
        return 0.0
    a = p.rho + z
    t, v = curve.t, curve.varphi
    e2 = taylor_remainder(-a * v.astype(complex), 1)
    data = exp_trapezoid(t, e2, z * z - 1.0)
    tail = curve.tail()

    def f(tt):
        g = tail.g(tt)
        w = -a * g * math.exp(-tt)
        return complex(taylor_remainder_ratio(np.array([w]), 1)[0]) * a * a * g * g * cmath.exp(-(1.0 + z * z) * tt)

    return complex(data + tail.integrate(f, complex_valued=True))


def _e1_form(curve: BoundaryCurve, z, p: CanonicalParams) -> complex:
    """``theta e^{-mu(z+rho)}/(1-rho) + int varphi' E_1(-varphi(z+rho)) e^{-(z^2-1)t} dt``."""
    z = complex(z)
    a = z + p.rho
    head = p.theta * cmath.exp(-p.mu * a) / (1.0 - p.rho)
    if _is_zero(curve):
        return head
    tm = midpoints(curve.t)
    vm = midpoints(curve.varphi)
    e1 = taylor_remainder(-a * vm.astype(complex), 0)
    data = -np.sum(increments(curve.varphi) * e1 * np.exp(-(z * z - 1.0) * tm))
    tail = curve.tail()

    def f(tt):
        g = tail.g(tt)
        w = -a * g * math.exp(-tt)
        return tail.m(tt) * g * complex(taylor_remainder_ratio(np.array([w]), 0)[0]) * cmath.exp(-(1.0 + z * z) * tt)

    return complex(head + data + a * tail.integrate(f, complex_valued=True))


def phi_transform(curve: BoundaryCurve, z, p: Optional[CanonicalParams] = None, mode: str = "direct") -> complex:
    """``Phi(z) = L[varphi](z^2 - 1)``.

    ``mode='direct'`` integrates the definition and needs ``Re z > 0`` and
    ``Re z^2 > 0``.  ``mode='continued'`` uses the closed-form continuation
    ``(G(z) + E2(z)) / (rho + z)``, valid for ``Re z^2 > -1`` and ``z != -1``;
    close to ``z = -rho`` it switches to the equivalent ``E_1`` form
    ``(mu - Psi(z)) / (z^2 - 1)``.
    """
    p = _params(curve, p)
    z = complex(z)
    if mode == "direct":
        if not (z.real > 0.0 and (z * z).real > 0.0):
            raise DomainError(f"direct transform needs Re z > 0 and Re z^2 > 0, got z={z}")
        if _is_zero(curve):
            return 0.0j
        t, v = curve.t, curve.varphi
        data = exp_trapezoid(t, v, z * z - 1.0)
        tail = curve.tail()
        extra = tail.integrate(lambda tt: tail.g(tt) * cmath.exp(-z * z * tt), complex_valued=True)
        return complex(data + extra)
    if mode != "continued":
        raise ValueError(f"unknown mode {mode!r}")
    if not (z * z).real > -1.0 or z == -1.0:
        raise DomainError(f"continued transform needs Re z^2 > -1 and z != -1, got z={z}")
    if p.theta == 0.0:
        return 0.0j
    if abs(z + p.rho) > _NEAR or abs(z * z - 1.0) < _NEAR:
        return (_g_function(z, p) + e2_term(curve, z, p)) / (p.rho + z)
    return (p.mu - _e1_form(curve, z, p)) / (z * z - 1.0)


def psi_transform(curve: BoundaryCurve, z, p: Optional[CanonicalParams] = None, form: str = "phi") -> complex:
    """``Psi(z) = mu - (z^2 - 1) Phi(z)``, the transform of ``-varphi'``.

    ``form='phi'`` goes through the continued ``Phi``; ``'remainder'`` uses the
    ``E_1`` integral form; ``'direct'`` is the Stieltjes sum of the definition
    (needs ``Re z^2 >= 0``).
    """
    p = _params(curve, p)
    z = complex(z)
    if not (z * z).real > -1.0 or z == -1.0:
        raise DomainError(f"need Re z^2 > -1 and z != -1, got z={z}")
    if p.theta == 0.0:
        return 0.0j
    if form == "phi":
        return p.mu - (z * z - 1.0) * phi_transform(curve, z, p, mode="continued")
    if form == "remainder":
        return _e1_form(curve, z, p)
    if form == "direct":
        if (z * z).real < 0.0:
            raise DomainError("direct form needs Re z^2 >= 0")
        tm = midpoints(curve.t)
        data = np.sum(increments(curve.varphi) * np.exp(-(z * z - 1.0) * tm))
        tail = curve.tail()
        extra = tail.integrate(lambda tt: tail.m(tt) * cmath.exp(-z * z * tt), complex_valued=True)
        return complex(data + extra)
    raise ValueError(f"unknown form {form!r}")
