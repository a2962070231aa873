import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from signbow.exceptions import NumericalError
from signbow.position import (Gaussian2D, analyze_position_modality, fit_gaussian, fit_gmm_2d,
                              fit_position_model, gmm_bic, log_gaussian_pdf, position_log_prob)


def _random_gaussian(rng):
    a = rng.normal(size=(2, 2))
    cov = a @ a.T + rng.uniform(0.05, 2.0) * np.eye(2)
    return Gaussian2D(rng.normal(0, 10, 2), cov)


def test_log_pdf_standard_normal_at_mean():
    g = Gaussian2D(np.zeros(2), np.eye(2))
    assert log_gaussian_pdf([0, 0], g) == pytest.approx(-math.log(2 * math.pi), abs=1e-15)


def test_log_pdf_frozen_values():
    # frozen from scipy.stats.multivariate_normal.logpdf
    g = Gaussian2D([1.0, -2.0], [[2.0, 0.3], [0.3, 0.5]])
    assert log_gaussian_pdf([0.5, -1.0], g) == pytest.approx(-3.1231393090913073, abs=1e-12)
    assert log_gaussian_pdf([4.0, 3.0], g) == pytest.approx(-26.790721726673723, abs=1e-12)


def test_log_pdf_matches_reference():
    rng = np.random.default_rng(7)
    for _ in range(200):
        g = _random_gaussian(rng)
        p = g.mean + rng.normal(0, 3, 2)
        ref = multivariate_normal(g.mean, g.cov).logpdf(p)
        assert abs(log_gaussian_pdf(p, g) - ref) <= 1e-12 * max(1.0, abs(ref))


def test_log_pdf_singular_covariance_raises():
    with pytest.raises(NumericalError):
        log_gaussian_pdf([0, 0], Gaussian2D(np.zeros(2), np.ones((2, 2))))


def test_fit_gaussian_population_covariance_plus_epsilon():
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 4.0], [2.0, 4.0]])
    g = fit_gaussian(pts, reg_epsilon=1e-4)
    assert np.allclose(g.mean, [1.0, 2.0])
    assert np.allclose(g.cov, [[1.0 + 1e-4, 0.0], [0.0, 4.0 + 1e-4]])


def test_fit_gaussian_single_point_is_regularized():
    g = fit_gaussian([[3.0, 4.0]], reg_epsilon=1e-4)
    assert np.allclose(g.cov, 1e-4 * np.eye(2))
    assert np.isfinite(log_gaussian_pdf([3.0, 4.0], g))


def test_fit_gaussian_monte_carlo():
    rng = np.random.default_rng(1)
    mean, cov = np.array([3.0, -1.0]), np.array([[4.0, 1.0], [1.0, 2.0]])
    pts = rng.multivariate_normal(mean, cov, 500)
    g = fit_gaussian(pts)
    sd = np.sqrt(np.diag(cov))
    assert np.all(np.abs(g.mean - mean) < 3 * sd / math.sqrt(500))


def test_fit_position_model_validates_lengths():
    with pytest.raises(ValueError):
        fit_position_model([[0, 0]], [[0, 0], [1, 1]])
    with pytest.raises(ValueError):
        fit_position_model([], [])


def test_position_log_prob_is_sum():
    m = fit_position_model([[0, 0], [1, 1], [0, 1]], [[5, 5], [6, 5], [5, 7]])
    assert position_log_prob([0, 0], [5, 5], m) == pytest.approx(
        log_gaussian_pdf([0, 0], m.fp) + log_gaussian_pdf([5, 5], m.lp))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=1, max_size=30))
def test_fitted_model_is_always_scorable(points):
    g = fit_gaussian(points)
    assert g.det > 1e-12
    assert np.isfinite(log_gaussian_pdf(points[0], g))


def test_bic_parameter_count():
    assert gmm_bic(-100.0, 1, 50) == pytest.approx(200 + 5 * math.log(50))
    assert gmm_bic(-100.0, 3, 50) == pytest.approx(200 + 17 * math.log(50))


def test_modality_prefers_one_component_for_one_cluster():
    pts = np.random.default_rng(0).normal(0, 1, (300, 2))
    scores = analyze_position_modality(pts, 3, seed=0)
    assert [s.components for s in scores] == [1, 2, 3]
    assert [s.best for s in scores] == [True, False, False]


def test_modality_prefers_two_components_for_two_clusters():
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(0, 1, (150, 2)), rng.normal(12, 1, (150, 2))])
    best = [s for s in analyze_position_modality(pts, 3, seed=0) if s.best]
    assert best[0].components == 2


def test_modality_needs_enough_points():
    with pytest.raises(ValueError):
        analyze_position_modality(np.zeros((9, 2)), 3)


def test_gmm_trace_monotone():
    rng = np.random.default_rng(5)
    for k in (1, 2, 3):
        pts = np.vstack([rng.normal(c, 1.5, (60, 2)) for c in (0, 6, 12)])
        *_, trace = fit_gmm_2d(pts, k, rng)
        assert all(b >= a - 1e-8 * max(1, abs(a)) for a, b in zip(trace, trace[1:]))
