import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from amput.canonical import MarketParams, to_canonical_point
from amput.estimators import CanonicalTransformer, FreeBoundaryRegressor, LatticePutPricer


def test_transformer_matches_function():
    X = np.array([[0.5, 0.8], [1.0, 1.2], [2.0, 1.0]])
    tr = CanonicalTransformer(r=0.05, sigma=0.3, shifted=False).fit()
    tc, xc = to_canonical_point(X[:, 0], X[:, 1], MarketParams(0.05, 0.3))
    assert np.allclose(tr.transform(X), np.column_stack([tc, xc]))
    shifted = CanonicalTransformer(r=0.05, sigma=0.3).fit_transform(X)
    rho = tr.params_.rho
    assert np.allclose(shifted[:, 1], xc - 2 * rho * tc)


def test_transformer_contract():
    tr = CanonicalTransformer()
    with pytest.raises(NotFittedError):
        tr.transform([[1.0, 1.0]])
    assert clone(tr).get_params() == {"r": 1.0, "sigma": 2 ** 0.5, "shifted": True}
    with pytest.raises(ValueError):
        tr.fit().transform([1.0, 2.0, 3.0])


def test_regressor(coarse_run):
    _, curve = coarse_run
    reg = FreeBoundaryRegressor(h=1e-2, dt=2e-3, t_max=3.0).fit()
    t = np.array([0.0, 0.5, 2.5])
    assert np.allclose(reg.predict(t), np.interp(t, curve.t, curve.phi))
    with pytest.raises(ValueError):
        reg.predict([4.0])
    reg.set_params(theta=0.0)
    assert np.all(reg.fit().predict([1.0, 2.0]) == 0.0)


def test_lattice_pricer():
    est = LatticePutPricer(T=1.0, steps=200).fit()
    prices = est.predict([0.5, 1.0, 2.0])
    assert prices.shape == (3,)
    assert np.all(np.diff(prices) < 0)
    assert prices[0] == pytest.approx(0.5, abs=1e-12)
    assert est.boundary_.s_star[0] == 1.0
