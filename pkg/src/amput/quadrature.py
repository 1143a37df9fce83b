"""Quadrature over sampled boundary curves, with an asymptotic tail model.

Integrals against ``|varphi'(t)| dt`` are evaluated as Stieltjes sums over the
boundary increments rather than from pointwise derivative estimates.  Beyond
the last sample ``T`` the deviation is continued by the model

    varphi(t) ~ e^{-t} t^{-3/2} (c_0 + c_1/t + c_2/t^2 + ...)

fitted by least squares on a window ending at ``T``.  Tail integrands are
written in terms of ``g = varphi e^t`` so that nothing overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

_GL_X, _GL_W = leggauss(48)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def taylor_remainder_ratio(z, n: int):
    """``E_{n+1}(z) / z^{n+1}`` from ``(1/n!) int_0^1 (1-u)^n e^{uz} du``.

    Free of cancellation; accurate for ``|z|`` up to about 20.
    """
    z = np.asarray(z)
    weights = _GL_W * (1.0 - _GL_X) ** n / math.factorial(n)
    return np.exp(np.multiply.outer(z, _GL_X)) @ weights


def taylor_remainder(z, n: int):
    """Remainder ``E_{n+1}(z) = e^z - sum_{k<=n} z^k/k!``, vectorised, complex-safe."""
    if n < 0:
        raise ValueError("N must be nonnegative")
    z = np.asarray(z, dtype=complex if np.iscomplexobj(z) else float)
    small = np.abs(z) <= 8.0 + n
    out = np.empty_like(z)
    if np.any(small):
        zs = z[small]
        out[small] = zs ** (n + 1) * taylor_remainder_ratio(zs, n)
    if np.any(~small):
        zl = z[~small]
        partial = sum(zl ** k / math.factorial(k) for k in range(n + 1))
        out[~small] = np.exp(zl) - partial
    return out[()] if out.ndim == 0 else out


def parts_kernel(y):
    """``((1 + y) e^{-y} - 1) / y^2`` with a series branch near zero."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = np.abs(y) < 0.1
    ys = y[small]
    acc = np.zeros_like(ys)
    for k in range(14, 1, -1):
        acc = acc * ys + (-1) ** k * (1 - k) / math.factorial(k)
    out[small] = acc
    yl = y[~small]
    out[~small] = ((1.0 + yl) * np.exp(-yl) - 1.0) / (yl * yl)
    return out[()] if out.ndim == 0 else out


def expm1_ratio2(y):
    """``(e^y - 1 - y) / y^2`` with a series branch near zero."""
    y = np.asarray(y, dtype=float)
    return np.real(taylor_remainder_ratio(y, 1))


@dataclass(frozen=True)
class TailModel:
    """Continuation of the deviation beyond the last sample ``t_end``.

    ``coef`` holds ``c_k`` of ``q(t) = varphi(t) t^{3/2} e^t = sum_k c_k t^{-k}``.
    """

    t_end: float
    coef: tuple
    window: tuple

    @property
    def is_zero(self) -> bool:
        return not any(self.coef)

    def q(self, t):
        t = np.asarray(t, dtype=float)
        return sum(c * t ** (-k) for k, c in enumerate(self.coef))

    def g(self, t):
        """``varphi(t) e^t``."""
        t = np.asarray(t, dtype=float)
        return self.q(t) * t ** -1.5

    def dg(self, t):
        t = np.asarray(t, dtype=float)
        return sum(-(k + 1.5) * c * t ** (-k - 2.5) for k, c in enumerate(self.coef))

    def varphi(self, t):
        t = np.asarray(t, dtype=float)
        return self.g(t) * np.exp(-t)

    def m(self, t):
        """``|varphi'(t)| e^t = g - g'``."""
        return self.g(t) - self.dg(t)

    def integrate(self, f: Callable, complex_valued: bool = False) -> complex:
        """``int_{t_end}^inf f(t) dt`` through ``t = T/u^2`` (handles ``t^{-3/2}`` decay)."""
        if self.is_zero:
            return 0.0
        T = self.t_end

        def part(fn):
            def integrand(u):
                if u <= 0.0:
                    return 0.0
                t = T / (u * u)
                return fn(t) * 2.0 * T / u ** 3

            val, _ = integrate.quad(integrand, 0.0, 1.0, limit=200, epsabs=1e-14, epsrel=1e-11)
            return val

        if complex_valued:
            return part(lambda t: complex(f(t)).real) + 1j * part(lambda t: complex(f(t)).imag)
        return part(lambda t: float(f(t)))


ZERO_TAIL = TailModel(t_end=0.0, coef=(0.0,), window=(0.0, 0.0))


def fit_tail(t, varphi, window: float = 4.0, n_terms: int = 3, min_start: float = 2.0) -> TailModel:
    """Least-squares fit of the tail model on ``[max(T - window, T/2, min_start), T]``."""
    t = np.asarray(t, dtype=float)
    varphi = np.asarray(varphi, dtype=float)
    T = float(t[-1])
    if not np.any(varphi > 0.0) or T <= min_start:
        return TailModel(t_end=T, coef=(0.0,), window=(T, T))
    lo = max(T - window, 0.5 * T, min_start)
    sel = (t >= lo) & (varphi > 0.0)
    if sel.sum() < n_terms + 2:
        n_terms = 1
        sel = t >= t[max(0, len(t) - 4)]
    stride = max(1, int(sel.sum()) // 400)
    ts = t[sel][::stride]
    qs = varphi[sel][::stride] * ts ** 1.5 * np.exp(ts)
    span = (ts[-1] - ts[0]) if ts.size > 1 else 0.0
    if span < 1.0:
        n_terms = 1
    A = np.vstack([ts ** (-k) for k in range(n_terms)]).T
    coef, *_ = np.linalg.lstsq(A, qs, rcond=None)
    return TailModel(t_end=T, coef=tuple(float(c) for c in coef), window=(float(ts[0]), T))


def exp_trapezoid(t, f, c):
    """``int f(t) e^{-c t} dt`` with ``f`` linear between samples and the exponential exact.

    Exact when ``f`` is constant, so a flat boundary reproduces the closed
    form to rounding.  ``c`` may be complex.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f)
    c = complex(c)
    dt = np.diff(t)
    u = c * dt
    left = np.exp(-c * t[:-1]) * dt
    # weights of f_i and f_{i+1}: E_2(-u)/u^2 and e^{-u} E_2(u)/u^2
    a = np.empty_like(u)
    b = np.empty_like(u)
    small = np.abs(u) <= 1.0
    a[small] = taylor_remainder_ratio(-u[small], 1)
    b[small] = np.exp(-u[small]) * taylor_remainder_ratio(u[small], 1)
    ul = u[~small]
    el = np.exp(-ul)
    a[~small] = (el - 1.0 + ul) / ul ** 2
    b[~small] = (1.0 - el - ul * el) / ul ** 2
    out = np.sum(left * (a * f[:-1] + b * f[1:]))
    return out.real if c.imag == 0.0 and not np.iscomplexobj(f) else out


def increments(varphi):
    """Positive measure ``|d varphi|`` on each sample interval."""
    varphi = np.asarray(varphi, dtype=float)
    return varphi[:-1] - varphi[1:]


def midpoints(a):
    a = np.asarray(a)
    return 0.5 * (a[:-1] + a[1:])


def stieltjes(t, varphi, kernel: Callable):
    """``sum |d varphi_i| K(t_mid, varphi_mid)`` over the samples."""
    return np.sum(increments(varphi) * kernel(midpoints(t), midpoints(varphi)))


def derivative_sum(t, dvarphi_abs, varphi, kernel: Callable):
    """Trapezoid of ``|varphi'(t)| K(t, varphi)``; diagnostic alternative to :func:`stieltjes`."""
    return np.trapezoid(dvarphi_abs * kernel(t, varphi), t)
