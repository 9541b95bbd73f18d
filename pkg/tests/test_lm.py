import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import least_squares

from comb_qed.analysis import damped_sinusoid, fit_least_squares, gaussian
from comb_qed.errors import FitError


def test_linear_model_exact_in_two_iterations():
    x = np.linspace(0, 1, 20)
    res = fit_least_squares(lambda x, a, b: a * x + b, x, 3 * x + 2, [0.0, 0.0])
    assert res.converged and res.iterations <= 2
    np.testing.assert_allclose(res.values, [3, 2], rtol=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_polynomial_models_exact(coef):
    x = np.linspace(-1, 2, 15)
    y = np.polyval(coef, x)
    res = fit_least_squares(lambda x, a, b, c: np.polyval([a, b, c], x), x, y, [1.0, 1.0, 1.0])
    assert res.iterations <= 2 and res.converged
    np.testing.assert_allclose(res.values, coef, atol=1e-9 * (1 + np.abs(coef).max()))


def test_gaussian_round_trip_relative():
    x = np.linspace(-200, 200, 801)
    truth = [3.7, 12.5, 40.2]
    res = fit_least_squares(gaussian, x, gaussian(x, *truth), [3.0, 0.0, 30.0])
    np.testing.assert_allclose(res.values, truth, rtol=1e-8)


@pytest.mark.parametrize("scale", [0.8, 1.2])
def test_damped_sinusoid_basin(scale):
    t = np.linspace(0, 60, 1201)
    truth = np.array([1.1, 49.6, 0.4, 0.05, 1.0])
    y = damped_sinusoid(t, *truth)
    res = fit_least_squares(damped_sinusoid, t, y, truth * scale)
    np.testing.assert_allclose(res.values, truth, rtol=1e-6)


def test_matches_scipy_on_noisy_problem(rng):
    x = np.linspace(0, 10, 200)
    y = 2.5 * np.exp(-0.3 * x) * np.cos(1.7 * x + 0.2) + 0.05 * rng.standard_normal(x.size)

    def model(x, a, k, w, p):
        return a * np.exp(-k * x) * np.cos(w * x + p)

    init = [2.0, 0.2, 1.6, 0.0]
    ours = fit_least_squares(model, x, y, init)
    ref = least_squares(lambda p: model(x, *p) - y, init, method="lm", xtol=1e-14, ftol=1e-14)
    np.testing.assert_allclose(ours.values, ref.x, rtol=1e-7)
    assert ours.residual_norm == pytest.approx(2 * ref.cost, rel=1e-9)
    assert ours.converged and ours.covariance is not None
    # linearised covariance as an independent check
    j = ref.jac
    cov = np.linalg.inv(j.T @ j) * (2 * ref.cost) / (x.size - 4)
    np.testing.assert_allclose(ours.covariance, cov, rtol=1e-4)


def test_bounds_respected():
    x = np.linspace(0, 1, 30)
    res = fit_least_squares(lambda x, a, b: a * x + b, x, 3 * x - 1, [1.0, 1.0],
                            bounds=([0, 0], [np.inf, np.inf]))
    assert res.values[1] >= 0 and res.values[0] >= 0


def test_singular_jacobian_reports_instead_of_crashing():
    x = np.linspace(0, 1, 10)
    res = fit_least_squares(lambda x, a, b: (a + b) * x, x, 2 * x, [0.3, 0.1])
    assert res.covariance is None
    assert "singular" in res.message
    assert res["p0"] + res["p1"] == pytest.approx(2)


def test_converged_implies_small_gradient():
    x = np.linspace(0, 5, 50)
    res = fit_least_squares(lambda x, a, k: a * np.exp(-k * x), x, 2 * np.exp(-0.7 * x), [1, 1])
    assert res.converged and res.gradient_norm <= 1e-5


def test_deterministic():
    t = np.linspace(0, 60, 601)
    y = damped_sinusoid(t, 1.0, 50.0, 0.3, 0.0, 1.0)
    a = fit_least_squares(damped_sinusoid, t, y, [0.9, 49.0, 0.2, 0.0, 0.9])
    b = fit_least_squares(damped_sinusoid, t, y, [0.9, 49.0, 0.2, 0.0, 0.9])
    assert a.to_dict() == b.to_dict()


@pytest.mark.parametrize("kw", [dict(init=[np.nan]), dict(init=[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])])
def test_bad_inputs(kw):
    x = np.arange(5.0)
    with pytest.raises(FitError):
        fit_least_squares(lambda x, *p: x * p[0], x, x, **kw)
