import json
import math

import numpy as np
import pytest

from corrlidar.errors import (ConfigError, IterationLimitError,
                              RankDeficiencyError)
from corrlidar.fisher import (fisher_integral, fisher_lower_bound,
                              fisher_three_sources, fisher_two_sources)
from corrlidar.fitkit import (FitModelParams, PowerLawParams, fit_m_dependence,
                              fit_model_fisher, fit_pipeline, fit_power_law,
                              gauss_newton, least_squares, reduced_fit_family)


def test_gauss_newton_linear_exact():
    design = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]])
    truth = np.array([0.7, -1.3])
    y = design @ truth

    params, iterations = gauss_newton(
        lambda p: design @ p - y, lambda p: design, np.array([10.0, -10.0]))
    np.testing.assert_allclose(params, truth, rtol=1e-12)
    assert iterations <= 2


def test_gauss_newton_respects_bounds():
    params, _ = gauss_newton(
        lambda p: p - 5.0, lambda p: np.array([[1.0]]), np.array([1.0]),
        bounds=(np.array([0.0]), np.array([3.0])))
    assert params[0] == pytest.approx(3.0)


def test_gauss_newton_rank_deficiency():
    jac = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(RankDeficiencyError):
        gauss_newton(lambda p: jac @ p - 1.0, lambda p: jac,
                     np.array([0.0, 0.0]))


def test_gauss_newton_iteration_limit_carries_state():
    design = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    y = design @ np.array([2.0, 3.0])
    with pytest.raises(IterationLimitError) as info:
        gauss_newton(lambda p: design @ p - y, lambda p: design,
                     np.array([50.0, 50.0]), max_iterations=1)
    assert info.value.iterations == 1
    np.testing.assert_allclose(info.value.last_params, [2.0, 3.0], rtol=1e-10)


def test_least_squares_interpolates_quadratic():
    x = np.array([-1.0, 0.0, 1.0, 2.0])
    y = 0.5 * x ** 2 - 2.0 * x + 3.0

    def model(x, p):
        return p[0] * x ** 2 + p[1] * x + p[2]

    params, covariance, residual_norm = least_squares(
        model, x, y, np.array([1.0, 1.0, 1.0]))
    np.testing.assert_allclose(params, [0.5, -2.0, 3.0], rtol=1e-9, atol=1e-10)
    assert covariance.shape == (3, 3)
    assert residual_norm < 1e-18


def test_least_squares_validation():
    model = lambda x, p: p[0] * x
    with pytest.raises(ConfigError):
        least_squares(model, [1.0], [1.0], np.array([1.0, 2.0]))
    with pytest.raises(ConfigError):
        least_squares(model, [1.0, 2.0], [1.0, 2.0], np.array([1.0]),
                      weights=np.array([1.0, -1.0]))
    with pytest.raises(ConfigError):
        least_squares(model, [1.0, 2.0], [1.0, 2.0], np.array([1.0]),
                      weights=np.array([1.0]))


def test_least_squares_weight_rescaling_invariance():
    rng = np.random.default_rng(7)
    x = np.linspace(1.0, 5.0, 20)
    y = 2.0 * x + 1.0 + rng.normal(0, 0.1, x.size)
    w = rng.uniform(0.5, 2.0, x.size)
    model = lambda x, p: p[0] * x + p[1]
    a, _, _ = least_squares(model, x, y, np.array([1.0, 0.0]), weights=w)
    b, _, _ = least_squares(model, x, y, np.array([1.0, 0.0]), weights=5.0 * w)
    # agreement is limited by the relative-step stopping rule
    np.testing.assert_allclose(a, b, rtol=1e-7)


def test_least_squares_finite_difference_jacobian():
    x = np.linspace(1.0, 9.0, 12)
    y = 1.8 * x ** 2.2
    model = lambda x, p: p[0] * x ** p[1]
    jacobian = lambda x, p: np.stack(
        [x ** p[1], p[0] * np.log(x) * x ** p[1]], axis=1)
    with_jac, _, _ = least_squares(model, x, y, np.array([1.0, 2.0]),
                                   jacobian=jacobian)
    without, _, _ = least_squares(model, x, y, np.array([1.0, 2.0]))
    np.testing.assert_allclose(with_jac, [1.8, 2.2], rtol=1e-8)
    np.testing.assert_allclose(without, with_jac, rtol=1e-6)


def test_least_squares_noisy_recovery_within_error_bars():
    rng = np.random.default_rng(42)
    x = np.linspace(1.0, 20.0, 60)
    y = 2.5 * x ** 1.7 * (1.0 + rng.normal(0, 0.01, x.size))
    model = lambda x, p: p[0] * x ** p[1]
    params, covariance, _ = least_squares(model, x, y, np.array([1.0, 1.0]))
    sigma = np.sqrt(np.diag(covariance))
    assert abs(params[0] - 2.5) < 4 * sigma[0]
    assert abs(params[1] - 1.7) < 4 * sigma[1]


def test_family_reproduces_two_source_form():
    orders = np.arange(1, 25)
    family = reduced_fit_family(2, orders, 1.0, 1.0, 2.0)
    closed = [fisher_two_sources(int(m)).reduced for m in orders]
    np.testing.assert_allclose(family, closed, rtol=1e-13, atol=1e-15)


def test_fit_m_dependence_two_sources_exact():
    values = [(m, fisher_two_sources(m).reduced) for m in range(2, 21)]
    fit = fit_m_dependence(2, values)
    assert fit.n_sources == 2
    np.testing.assert_allclose([fit.a, fit.b, fit.c], [1.0, 1.0, 2.0],
                               rtol=1e-10)
    assert fit.residual_norm < 1e-18


def test_fit_m_dependence_three_sources():
    values = [(m, fisher_three_sources(m).reduced) for m in range(2, 21)]
    fit = fit_m_dependence(3, values)
    assert fit.residual_norm < 1e-4
    # c tracks roughly twice a and b
    assert fit.c == pytest.approx(2 * fit.a, rel=0.15)
    assert fit.c == pytest.approx(2 * fit.b, rel=0.15)
    model = reduced_fit_family(3, np.arange(2, 21), fit.a, fit.b, fit.c)
    exact = np.array([v for _, v in values])
    # worst deviation sits at order 2
    assert np.max(np.abs(model - exact) / exact) < 0.04


def test_fit_m_dependence_needs_three_pairs():
    with pytest.raises(ConfigError):
        fit_m_dependence(2, [(2, 0.06), (3, 0.1)])


def test_fit_power_law_exact_and_validation():
    points = [(n, 0.14 * n ** 2.986) for n in range(2, 21)]
    law = fit_power_law(points)
    assert law.p == pytest.approx(0.14, rel=1e-10)
    assert law.e == pytest.approx(2.986, rel=1e-10)
    np.testing.assert_allclose(law(np.array([2.0, 10.0])),
                               [0.14 * 2 ** 2.986, 0.14 * 10 ** 2.986])
    with pytest.raises(ConfigError):
        fit_power_law(points[:2])
    with pytest.raises(ConfigError):
        fit_power_law([(2, 1.0), (3, -1.0), (4, 2.0)])
    with pytest.raises(ConfigError):
        PowerLawParams(p=-1.0, e=2.0, covariance=())


def test_pipeline_on_lower_bound_recovers_cubic_laws():
    # the bound is exactly the family with a = b = N^3/8, c = N^3/4
    result = fit_pipeline(
        (2, 8), (2, 12),
        reduced_source=lambda N, m: fisher_lower_bound(N, m).reduced)
    for fit in result.per_n:
        n3 = fit.n_sources ** 3
        np.testing.assert_allclose([fit.a, fit.b, fit.c],
                                   [n3 / 8.0, n3 / 8.0, n3 / 4.0], rtol=1e-8)
        assert fit.residual_norm < 1e-16
    assert result.power_laws["a"].e == pytest.approx(3.0, rel=1e-8)
    assert result.power_laws["a"].p == pytest.approx(0.125, rel=1e-8)
    assert result.power_laws["c"].p == pytest.approx(0.25, rel=1e-8)
    table = result.coefficient_table()
    assert [row[0] for row in table] == list(range(2, 9))


def test_pipeline_validation():
    with pytest.raises(ConfigError):
        fit_pipeline((1, 5), (2, 6))
    with pytest.raises(ConfigError):
        fit_pipeline((2, 5), (6, 2))


def test_pipeline_json_round_trip(tmp_path):
    result = fit_pipeline(
        (2, 5), (2, 8),
        reduced_source=lambda N, m: fisher_lower_bound(N, m).reduced)
    path = tmp_path / "fit.json"
    result.write_json(path)
    payload = json.loads(path.read_text())
    assert {entry["n_sources"] for entry in payload["per_n"]} == {2, 3, 4, 5}
    assert set(payload["power_laws"]) == {"a", "b", "c"}
    assert payload["power_laws"]["a"]["e"] == pytest.approx(3.0, rel=1e-8)


def test_fit_model_fisher():
    laws = {
        "a": PowerLawParams(p=0.125, e=3.0, covariance=()),
        "b": PowerLawParams(p=0.125, e=3.0, covariance=()),
        "c": PowerLawParams(p=0.25, e=3.0, covariance=()),
    }
    result = fit_model_fisher(6, 4, laws, prefactor=10.0)
    assert result.method == "fit_model"
    expected = float(reduced_fit_family(6, 4, 27.0, 27.0, 54.0))
    assert result.reduced == pytest.approx(expected, rel=1e-12)
    assert result.value == pytest.approx(10.0 * expected, rel=1e-12)
    # exact laws make the model coincide with the bound it mirrors
    assert result.reduced == pytest.approx(
        fisher_lower_bound(6, 4).reduced, rel=1e-12)
    with pytest.raises(ConfigError):
        fit_model_fisher(6, 4, {"a": laws["a"]})


def test_per_n_fit_tracks_integral_closely():
    values = [(m, fisher_integral(4, m).reduced) for m in range(2, 21)]
    fit = fit_m_dependence(4, values)
    model = reduced_fit_family(4, np.arange(2, 21), fit.a, fit.b, fit.c)
    exact = np.array([v for _, v in values])
    assert np.max(np.abs(model - exact) / exact) < 0.05
