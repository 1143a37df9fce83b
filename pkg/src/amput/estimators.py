"""Thin scikit-learn style wrappers around the solver and the tree.

These follow the ``get_params``/``set_params`` contract so that the objects
compose with parameter grids, but nothing here learns from data: ``fit``
runs a deterministic computation and ``predict`` evaluates its result.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .canonical import CanonicalParams, MarketParams, from_market, to_canonical_point
from .lattice import LatticeSpec, extract_lattice_boundary, price_american_put
from .obstacle import GridSpec, extract_boundary, solve


class CanonicalTransformer(TransformerMixin, BaseEstimator):
    """Map rows ``(t, s)`` of market points to the scaled canonical frame ``(alpha^2 t, alpha x)``.

    With ``shifted=True`` the affine shift ``x -> x - 2 rho t`` is applied too.
    """

    def __init__(self, r=1.0, sigma=2 ** 0.5, shifted=True):
        self.r = r
        self.sigma = sigma
        self.shifted = shifted

    def fit(self, X=None, y=None):
        self.market_ = MarketParams(self.r, self.sigma)
        self.params_ = from_market(self.market_)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValueError("X must have two columns (t, s)")
        tc, xc = to_canonical_point(X[:, 0], X[:, 1], self.market_)
        if self.shifted:
            xc = xc - 2.0 * self.params_.rho * tc
        return np.column_stack([tc, xc])


class FreeBoundaryRegressor(BaseEstimator):
    """Solve the obstacle problem on ``fit``; ``predict(t)`` returns the boundary ``phi(t)``."""

    def __init__(self, rho=0.0, theta=1.0, h=2.5e-3, dt=5e-4, t_max=8.0, method="bs", extraction="vertex"):
        self.rho = rho
        self.theta = theta
        self.h = h
        self.dt = dt
        self.t_max = t_max
        self.method = method
        self.extraction = extraction

    def fit(self, X=None, y=None):
        p = CanonicalParams(rho=self.rho, theta=self.theta)
        grid = GridSpec.build(p, h=self.h, dt=self.dt, t_max=self.t_max)
        self.solution_ = solve(p, grid, method=self.method)
        self.curve_ = extract_boundary(self.solution_, method=self.extraction)
        return self

    def predict(self, X):
        check_is_fitted(self, "curve_")
        t = np.asarray(X, dtype=float).reshape(-1)
        if np.any(t < 0.0) or np.any(t > self.curve_.t[-1]):
            raise ValueError("prediction times outside the solved range")
        return np.interp(t, self.curve_.t, self.curve_.phi)


class LatticePutPricer(BaseEstimator):
    """CRR pricer; ``predict`` maps initial nominal prices to American put values."""

    def __init__(self, r=1.0, sigma=2 ** 0.5, T=1.0, steps=1000):
        self.r = r
        self.sigma = sigma
        self.T = T
        self.steps = steps

    def fit(self, X=None, y=None):
        self.spec_ = LatticeSpec(steps=self.steps, T=self.T, market=MarketParams(self.r, self.sigma))
        self.boundary_ = extract_lattice_boundary(self.spec_)
        return self

    def predict(self, X):
        check_is_fitted(self, "spec_")
        s0 = np.asarray(X, dtype=float).reshape(-1)
        return np.array([price_american_put(self.spec_, float(v)) for v in s0])
