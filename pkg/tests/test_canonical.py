import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amput import canonical as cn
from amput.exceptions import InvalidParamsError


def test_from_market_unit_case():
    q = cn.from_market(cn.MarketParams(1.0, math.sqrt(2.0)))
    assert q.rho == pytest.approx(0.0, abs=1e-15)
    assert q.alpha == pytest.approx(1.0, rel=1e-15)
    assert q.theta == 1.0


def test_from_market_typical_inputs():
    q = cn.from_market(cn.MarketParams(0.05, 0.3))
    assert q.rho == pytest.approx(-0.0526316, abs=5e-8)
    # exact value 0.19 / (0.6 sqrt 2) = 0.2239171...; quoted as 0.223918
    assert q.alpha == pytest.approx(0.223918, abs=1e-6)
    assert q.alpha == pytest.approx(0.19 / (0.6 * math.sqrt(2.0)), rel=1e-15)


@given(st.floats(0.05, 3.0))
def test_balanced_rate_gives_zero_rho(sigma):
    q = cn.from_market(cn.MarketParams(sigma ** 2 / 2, sigma))
    assert abs(q.rho) < 1e-14


@pytest.mark.parametrize("r,sigma", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -0.2), (float("nan"), 1.0)])
def test_market_params_validation(r, sigma):
    with pytest.raises(InvalidParamsError):
        cn.MarketParams(r, sigma)


@pytest.mark.parametrize("rho,theta", [(1.0, 1.0), (-1.0, 1.0), (0.0, -0.1), (2.0, 1.0)])
def test_canonical_params_validation(rho, theta):
    with pytest.raises(InvalidParamsError):
        cn.CanonicalParams(rho, theta)


def test_reward_original_examples():
    assert cn.reward_original(0.0, 1.0, 0.3) == 0.0
    assert cn.reward_original(0.0, 0.4, 0.3) == pytest.approx(0.6)
    assert cn.reward_original(1.0, 2.0, 1.0) == pytest.approx(math.e - 2.0, abs=1e-12)


def test_to_canonical_point_examples():
    m = cn.MarketParams(1.0, math.sqrt(2.0))
    for (t, s), expected in [((0.0, 1.0), (0.0, 0.0)), ((1.0, 1.0), (1.0, 1.0)), ((1.0, math.e), (1.0, 0.0))]:
        tc, xc = cn.to_canonical_point(t, s, m)
        assert tc == pytest.approx(expected[0], abs=1e-14)
        assert xc == pytest.approx(expected[1], abs=1e-14)
    with pytest.raises(InvalidParamsError):
        cn.to_canonical_point(1.0, 0.0, m)


@given(st.floats(0.01, 2.0), st.floats(0.1, 1.5), st.floats(0.0, 3.0), st.floats(0.2, 5.0))
def test_canonical_point_round_trip(r, sigma, t, s):
    m = cn.MarketParams(r, sigma)
    tc, xc = cn.to_canonical_point(t, s, m)
    t2, s2 = cn.from_canonical_point(tc, xc, m)
    assert t2 == pytest.approx(t, rel=1e-12, abs=1e-14)
    assert s2 == pytest.approx(s, rel=1e-10)


def test_reward_canonical_examples():
    p = cn.CanonicalParams(0.0, 1.0)
    assert cn.reward_canonical(1.0, -0.3, p) == 0.0
    assert cn.reward_canonical(0.0, p.mu, p) == pytest.approx(0.5, abs=1e-15)
    assert cn.reward_canonical(1.0, 1e-12, p) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("rho", [-0.6, -0.2, 0.0, 0.3, 0.8])
@pytest.mark.parametrize("theta", [0.3, 1.0, 2.5])
def test_reward_vanishes_at_strike(rho, theta):
    p = cn.CanonicalParams(rho, theta)
    t = np.linspace(0.1, 6.0, 25)
    v = cn.reward_canonical(t, np.full_like(t, 1e-14), p)
    assert np.max(np.abs(v * np.exp(-t))) < 1e-12


def test_mu_examples():
    assert cn.mu(cn.CanonicalParams(0.0, 1.0)) == pytest.approx(math.log(2.0), abs=1e-15)
    assert cn.mu(cn.CanonicalParams(0.4, 0.0)) == 0.0
    assert cn.mu(cn.CanonicalParams(0.5, 1.0)) == pytest.approx(2.0 / 3.0 * math.log(4.0), abs=1e-15)


def test_mu_increasing_in_theta():
    for rho in (-0.5, 0.0, 0.5):
        vals = [cn.mu(cn.CanonicalParams(rho, th)) for th in np.linspace(0.0, 4.0, 41)]
        assert np.all(np.diff(vals) > 0)


def test_eta_examples():
    assert cn.eta(cn.CanonicalParams(0.0, 1.0)) == pytest.approx(0.25, abs=1e-15)
    assert cn.eta(cn.CanonicalParams(-0.3, 0.0)) == 0.0
    # closed form 0.75 * 4**(-1/3); the value 0.472277 quoted for this case is a slip
    assert cn.eta(cn.CanonicalParams(0.5, 1.0)) == pytest.approx(0.75 * 4 ** (-1 / 3), abs=1e-14)
    assert cn.eta(cn.CanonicalParams(0.5, 1.0)) == pytest.approx(0.472470, abs=1e-6)


def test_eta_matches_high_precision():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    for rho, theta in [(0.5, 1.0), (-0.4, 2.0), (0.1, 0.3)]:
        r, th = mp.mpf(rho), mp.mpf(theta)
        m = mp.log(1 + th * (1 + r) / (1 - r)) / (1 + r)
        e = (1 + r) / 2 * (mp.exp((r - 1) * m) - 1 + th)
        assert cn.eta(cn.CanonicalParams(rho, theta)) == pytest.approx(float(e), rel=1e-14)


def test_boundary_constants():
    bc = cn.boundary_constants(cn.CanonicalParams(0.0, 1.0))
    assert bc.mu == pytest.approx(math.log(2.0))
    assert bc.eta == pytest.approx(0.25)


def test_unshift_examples():
    assert cn.unshift_boundary(1.0, 0.5, 0.25) == pytest.approx(1.0)
    t = np.linspace(0, 3, 7)
    x = np.sin(t)
    assert np.array_equal(cn.unshift_boundary(t, x, 0.0), x)
    assert np.max(np.abs(cn.shift_boundary(t, cn.unshift_boundary(t, x, 0.37), 0.37) - x)) < 1e-15


@settings(max_examples=30)
@given(st.floats(0.05, 2.0), st.floats(0.1, 2.0))
def test_market_reward_is_scaled_canonical_reward(r, sigma):
    m = cn.MarketParams(r, sigma)
    q = cn.from_market(m)
    t = np.linspace(0.0, 2.0, 9)[:, None]
    x = np.linspace(-2.0, 2.0, 11)[None, :]
    lhs = cn.reward_market(t, x, m)
    rhs = cn.reward_unshifted(q.alpha ** 2 * t, q.alpha * x, q.rho)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(rhs)))


@settings(max_examples=30)
@given(st.floats(-0.9, 0.9), st.floats(0.0, 3.0), st.floats(0.01, 3.0))
def test_shift_relates_unshifted_and_canonical_rewards(rho, t, y):
    p = cn.CanonicalParams(rho, 1.0)
    x = y - 2.0 * rho * t
    if x <= 0:
        return
    lhs = cn.reward_unshifted(t, y, rho)
    rhs = cn.unshift_weight(t, y, rho) * cn.reward_canonical(t, x, p)
    # reward_unshifted is the positive part; inside x > 0 the canonical formula is already >= 0 at theta = 1
    assert lhs == pytest.approx(max(rhs, 0.0), rel=1e-10, abs=1e-10)


def test_to_market_reproduces_unit_scale():
    p = cn.CanonicalParams(0.3, 1.0)
    q = cn.from_market(cn.to_market(p))
    assert q.rho == pytest.approx(0.3, abs=1e-14)
    assert q.alpha == pytest.approx(1.0, abs=1e-14)
