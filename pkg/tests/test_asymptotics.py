import math

import numpy as np
import pytest

from amput import asymptotics as asy
from amput.canonical import CanonicalParams
from amput.exceptions import DomainError, InvalidParamsError
from amput.obstacle import BoundaryCurve

from oracles import b1_mp, moment_v1_mp, tail_gamma_mp

PUT = CanonicalParams(0.0, 1.0)
SWEEP = [(r, th) for r in (-0.5, 0.0, 0.5) for th in (0.5, 1.0, 2.0)]


@pytest.fixture(scope="module")
def flat_curve():
    t = np.linspace(0.0, 8.0, 801)
    return BoundaryCurve.from_phi(t, np.zeros_like(t), CanonicalParams(0.2, 0.0))


@pytest.mark.parametrize("rho,theta", SWEEP + [(1e-6, 1.0), (-3e-5, 0.7), (0.9, 0.2)])
def test_moment_matches_quadrature(rho, theta):
    m, _ = moment_v1_mp(rho, theta)
    assert asy.first_moment_v1(CanonicalParams(rho, theta)) == pytest.approx(float(m), rel=1e-11)


def test_moment_put_value():
    # direct quadrature of the reflected data; the tent part contributes -2 eta e^mu
    assert asy.first_moment_v1(PUT) == pytest.approx(-0.9058413472, abs=1e-10)


def test_moment_and_b1_vanish_at_theta_zero():
    for rho in (-0.4, 0.0, 0.7):
        p = CanonicalParams(rho, 0.0)
        assert asy.first_moment_v1(p) == 0.0
        assert asy.b1(p) == 0.0


@pytest.mark.parametrize("rho,theta", SWEEP)
def test_sign_sweep(rho, theta):
    p = CanonicalParams(rho, theta)
    assert asy.first_moment_v1(p) < 0.0
    assert asy.b1(p) > 0.0
    assert asy.b1(p) == pytest.approx(float(b1_mp(rho, theta)), rel=1e-11)


def test_b1_put_value():
    assert asy.b1(PUT) == pytest.approx(0.2555331262, abs=1e-9)


def test_v1_initial_is_odd_about_mu():
    x = np.linspace(-3, PUT.mu, 50)
    assert np.allclose(asy.v1_initial(x, PUT), -asy.v1_initial(2 * PUT.mu - x, PUT), atol=1e-14)
    assert asy.v1_initial(PUT.mu, PUT) == pytest.approx(0.0, abs=1e-14)
    assert np.all(asy.v1_initial(x[:-1], PUT) > 0.0)


def test_stop_on_lines_value():
    # at t -> 0 the stop-on-lines value tends to the reward on x <= mu
    from amput.canonical import reward_canonical

    for x in (-1.0, 0.3, 0.6):
        v = asy.stop_on_lines_value(PUT, 1e-4, x)
        assert v == pytest.approx(max(float(reward_canonical(1e-4, x, PUT)), 0.0), abs=2e-2)
    with pytest.raises(DomainError):
        asy.stop_on_lines_value(PUT, 1.0, 1.0)
    with pytest.raises(DomainError):
        asy.stop_on_lines_value(PUT, 0.0, 0.0)
    assert asy.stop_on_lines_value(PUT, [1.0, 2.0], 0.2).shape == (2,)


def test_expansion_eval():
    b = 0.125
    t = np.array([1.0, 3.0, 5.0])
    lam0 = b / math.gamma(1.5)
    assert np.allclose(asy.expansion_eval(t, [lam0]), b * t ** -1.5 * np.exp(-t), rtol=1e-14)
    assert np.all(asy.expansion_eval(t, [0.0, 0.0, 0.0]) == 0.0)
    two = asy.expansion_eval(2.0, [1.0, 1.0])
    assert two == pytest.approx((math.gamma(1.5) * 2 ** -1.5 + math.gamma(2.5) * 2 ** -2.5) * math.exp(-2))
    with pytest.raises(DomainError):
        asy.expansion_eval(0.0, [1.0])


def test_small_time_reference():
    assert asy.small_time_reference(0.01, 0.0) == pytest.approx(0.303486, abs=1e-6)
    assert asy.small_time_reference(0.01, 0.5) == pytest.approx(1.5 * 0.3034854, abs=1e-6)
    for bad in (0.0, 1 / math.e, 0.5):
        with pytest.raises(DomainError):
            asy.small_time_reference(bad, 0.0)


def test_d2_closed_form():
    # the integral is 0.1781477; it is sometimes quoted as 0.178149
    assert float(tail_gamma_mp(1)) == pytest.approx(0.1781477, abs=1e-7)
    for t in (0.1, 0.5, 1.0, 2.0, 7.0):
        ref = float(tail_gamma_mp(t)) / (2 * math.sqrt(math.pi))
        assert asy.d2varphi_dtheta2_at0(t, 0.0) == pytest.approx(ref, rel=1e-12)
    assert asy.d2varphi_dtheta2_at0(1.0, 0.0) == pytest.approx(0.050255, abs=1e-6)
    assert asy.d2varphi_dtheta2_at0(1.0, 0.5) == pytest.approx(4 * asy.d2varphi_dtheta2_at0(1.0, 0.0), rel=1e-14)
    assert asy.d2varphi_dtheta2_at0(60.0, 0.0) < 1e-27
    with pytest.raises(DomainError):
        asy.d2varphi_dtheta2_at0(0.0, 0.0)


def gaussian_odd(v):
    return v * math.exp(-v * v)


def test_heat_extension_zero():
    assert asy.heat_extension(lambda v: 0.0, 1.0, 0.5) == (0.0, 0.0)


def test_heat_extension_leading_term():
    val, lead = asy.heat_extension(gaussian_odd, 100.0, 1.0)
    assert lead == pytest.approx(1.25e-4, rel=1e-10)
    assert abs(val - lead) / lead <= 5e-2
    _, lead50 = asy.heat_extension(gaussian_odd, 50.0, 1.0)
    assert lead / lead50 == pytest.approx(2 ** -1.5, rel=1e-12)


def test_heat_extension_exact_solution():
    # xi e^{-xi^2} evolves to x (1 + 4t)^{-3/2} e^{-x^2/(1+4t)}
    for t, x in [(0.1, 0.3), (1.0, -1.2), (5.0, 2.0)]:
        val, _ = asy.heat_extension(gaussian_odd, t, x)
        assert val == pytest.approx(x * (1 + 4 * t) ** -1.5 * math.exp(-x * x / (1 + 4 * t)), rel=1e-9)


def test_heat_extension_samples_and_first_moment():
    xi = np.linspace(-12, 12, 4801)
    f = xi * np.exp(-xi ** 2)
    val, lead = asy.heat_extension(f, 100.0, 1.0, xi=xi)
    assert lead == pytest.approx(1.25e-4, rel=1e-8)
    assert abs(val - lead) / lead <= 5e-2
    # the caloric evolution keeps the first moment of odd data
    x = np.linspace(-80, 80, 3201)
    evolved = np.array([asy.heat_extension(f, 4.0, v, xi=xi)[0] for v in x])
    assert np.trapezoid(evolved * x, x) == pytest.approx(np.trapezoid(f * xi, xi), rel=1e-6)


def test_heat_extension_rejects_even_data():
    with pytest.raises(InvalidParamsError):
        asy.heat_extension(lambda v: math.exp(-v * v), 1.0, 0.0)
    xi = np.linspace(-5, 5, 101)
    with pytest.raises(InvalidParamsError):
        asy.heat_extension(np.exp(-xi ** 2), 1.0, 0.0, xi=xi)
    with pytest.raises(InvalidParamsError):
        asy.heat_extension(xi, 1.0, 0.0)
    with pytest.raises(DomainError):
        asy.heat_extension(gaussian_odd, 0.0, 0.0)


def test_zero_curve_constants(flat_curve):
    assert asy.lambda0(flat_curve) == 0.0
    for form in ("lambda0", "intro", "parts"):
        assert asy.beta1(flat_curve, form=form) == 0.0
    assert np.all(asy.lambda_density(flat_curve, [1.0, 1.5]) == 0.0)


def test_lambda0_lines_agree(put_curve):
    a = asy.lambda0(put_curve, line=1)
    b = asy.lambda0(put_curve, line=2)
    assert a > 0 and b > 0
    assert abs(a - b) <= 1e-3 * b
    with pytest.raises(ValueError):
        asy.lambda0(put_curve, line=3)


def test_beta1_forms(put_curve):
    vals = [asy.beta1(put_curve, form=f) for f in ("lambda0", "intro", "parts")]
    assert vals[0] == pytest.approx(math.gamma(1.5) * asy.lambda0(put_curve), rel=1e-15)
    for i in range(3):
        for j in range(i):
            assert abs(vals[i] - vals[j]) <= 1e-3 * abs(vals[j])
    assert max(vals) <= asy.b1(PUT)
    with pytest.raises(ValueError):
        asy.beta1(put_curve, form="series")


def test_expansion_at_five(put_curve):
    b = asy.beta1(put_curve)
    v5 = float(np.interp(5.0, put_curve.t, put_curve.varphi))
    lead = asy.expansion_eval(5.0, [b / math.gamma(1.5)])
    # the solver tail sits below the leading term by the O(1/t) correction
    assert abs(lead - v5) / v5 <= 0.35
    assert lead > v5


@pytest.mark.xfail(strict=True, reason="at t = 5 the next-order term is about 25% of the leading one")
def test_expansion_at_five_within_15_percent(put_curve):
    b = asy.beta1(put_curve)
    v5 = float(np.interp(5.0, put_curve.t, put_curve.varphi))
    assert abs(asy.expansion_eval(5.0, [b / math.gamma(1.5)]) - v5) / v5 <= 0.15


def test_tail_fit_structure(put_curve):
    tf = asy.tail_fit(put_curve)
    assert tf.window == (4.0, 7.0)
    assert tf.q_min <= tf.coef <= tf.q_max
    assert tf.coef > 0.0
    with pytest.raises(DomainError):
        asy.tail_fit(put_curve, 20.0, 30.0)


@pytest.mark.xfail(strict=True, reason="over [4, 7] the 1/t correction flattens the slope to about -1.29")
def test_tail_loglog_slope(put_curve):
    assert asy.tail_fit(put_curve).loglog_slope == pytest.approx(-1.5, abs=0.1)


def test_tail_loglog_slope_measured(put_curve):
    # slope of log(varphi e^t) against log t is -3/2 + (1/t correction); it approaches -3/2 from above
    slopes = [asy.tail_fit(put_curve, a, a + 1.5).loglog_slope for a in (3.0, 4.5, 6.0)]
    assert all(-1.5 < v < -1.0 for v in slopes)
    assert slopes[0] > slopes[1] > slopes[2]


def test_tail_approaches_beta1(put_curve):
    # q(t) = varphi t^{3/2} e^t increases towards beta1 with t
    tt = np.array([3.0, 4.0, 5.0, 6.0, 7.0])
    q = np.interp(tt, put_curve.t, put_curve.varphi) * tt ** 1.5 * np.exp(tt)
    assert np.all(np.diff(q) > 0.0)
    assert q[-1] < asy.beta1(put_curve)
    # the fitted tail model extrapolates to beta1 as t -> infinity
    assert put_curve.tail().coef[0] == pytest.approx(asy.beta1(put_curve), rel=0.1)


def test_lambda_density(put_curve):
    assert asy.lambda_density(put_curve, 1.0) == 0.0
    xs = np.linspace(1.0, 1.9, 10)
    lam = asy.lambda_density(put_curve, xs)
    assert lam.dtype == float and np.all(np.isfinite(lam))
    with pytest.raises(DomainError):
        asy.lambda_density(put_curve, 1.95)
    with pytest.raises(DomainError):
        asy.lambda_density(put_curve, 0.99)
    with pytest.warns(RuntimeWarning):
        asy.lambda_density(put_curve, 1.95, allow_wide=True)


def test_lambda_limit(put_curve):
    lam0 = asy.lambda0(put_curve)
    e = 1e-3
    assert asy.lambda_density(put_curve, 1 + e) / math.sqrt(e) == pytest.approx(lam0, rel=5e-2)
    table = asy.lambda_density_table(put_curve)
    assert table.lam[0] == 0.0
    assert table.lambda0_limit == pytest.approx(lam0, rel=5e-2)
    assert table.lambda0_limit == pytest.approx(lam0, rel=2e-3)


def test_phi_lambda_diagnostic(put_curve):
    t, d = asy.phi_lambda_diagnostic(put_curve)
    assert t[0] == 3.0 and t[-1] == 6.0
    assert np.all(np.diff(d) < 0.0)


def test_report(put_curve):
    rep = asy.asymptotic_report(put_curve)
    d = rep.as_dict()
    from amput.io import REPORT_KEYS

    assert tuple(d) == REPORT_KEYS
    assert d["mu"] == pytest.approx(math.log(2))
    assert d["eta"] == pytest.approx(0.25)
    assert d["moment_v1"] < 0 and d["B1"] > 0 and d["lambda0"] > 0
    assert d["beta1"] == pytest.approx(math.gamma(1.5) * d["lambda0"], rel=1e-15)
    assert d["consistency"] == pytest.approx(abs(d["beta1"] - d["beta1_parts"]))
    assert d["beta1"] <= d["B1"]


def test_perturbation_check_with_stub_solver():
    def solver(rho, theta, h, dt, t_max):
        t = np.linspace(0, t_max, 101)
        phi = CanonicalParams(rho, theta).mu - 0.5 * theta ** 2 * asy.d2varphi_dtheta2_at0(np.maximum(t, 1e-3), rho)
        return BoundaryCurve.from_phi(t, phi, CanonicalParams(rho, theta))

    chk = asy.first_theta_derivative_check(0.0, 0.05, t_points=(0.5, 1.0, 2.0), solver=solver)
    assert np.allclose(chk.ratio_to_closed_form, 1.0, rtol=1e-2)
    assert np.allclose(chk.onset_ratio, 0.25, rtol=1e-2)
    with pytest.raises(InvalidParamsError):
        asy.first_theta_derivative_check(delta=0.0, solver=solver)


@pytest.mark.slow
def test_perturbation_solver_coarse():
    chk = asy.first_theta_derivative_check(0.0, 0.05, t_points=(1.0,), h=2.5e-3, dt=5e-4, t_max=1.5)
    assert chk.first_order[0] < 0.05
    assert chk.onset_ratio[0] == pytest.approx(0.25, abs=0.05)
