import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signbow.handshape import (HandshapeClassModel, HandshapeCodebook, fit_codebook,
                               fit_handshape_model, handshape_log_prob, kmeans, quantize_argmax,
                               quantize_handshape, quantize_handshapes)


def test_kmeans_recovers_two_clusters():
    rng = np.random.default_rng(0)
    a, b = np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])
    x = np.vstack([a + rng.normal(0, 0.02, (100, 3)), b + rng.normal(0, 0.02, (100, 3))])
    centers, labels, trace = kmeans(x, 2, seed=0)
    for truth in (a, b):
        assert np.min(np.linalg.norm(centers - truth, axis=1)) < 0.02 * 3


def test_kmeans_inertia_non_increasing_and_deterministic():
    x = np.random.default_rng(2).random((500, 8))
    c1, l1, trace = kmeans(x, 10, seed=5)
    c2, l2, _ = kmeans(x, 10, seed=5)
    assert np.array_equal(c1, c2) and np.array_equal(l1, l2)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(trace, trace[1:]))


def test_kmeans_duplicate_points_repairs_empty_clusters():
    x = np.vstack([np.zeros((10, 2)), np.ones((10, 2)), [[5.0, 5.0]]])
    centers, labels, _ = kmeans(x, 3, seed=0)
    assert len(set(labels.tolist())) == 3


def test_kmeans_needs_enough_points():
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 3)), 3)


def test_quantize_ties_go_to_lowest_index():
    cb = HandshapeCodebook(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert quantize_handshape([0.5, 0.5], cb) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_quantize_matches_brute_force_scan(seed):
    rng = np.random.default_rng(seed)
    cb = HandshapeCodebook(rng.random((7, 5)))
    v = rng.random((20, 5))
    expected = []
    for row in v:
        best, best_d = 0, math.inf
        for j, c in enumerate(cb.centroids):
            d = sum((a - b) ** 2 for a, b in zip(row, c))
            if d < best_d:
                best, best_d = j, d
        expected.append(best)
    assert quantize_handshapes(v, cb).tolist() == expected


def test_quantize_dimension_mismatch():
    with pytest.raises(ValueError):
        quantize_handshapes(np.ones((2, 3)), HandshapeCodebook(np.ones((4, 2))))


def test_quantize_argmax():
    assert quantize_argmax(np.array([[0.1, 0.7, 0.2], [0.5, 0.5, 0.0]])).tolist() == [1, 0]


def test_fit_handshape_model_monte_carlo():
    rng = np.random.default_rng(4)
    truth = rng.dirichlet(np.ones(6))
    codes = rng.choice(6, 10_000, p=truth)
    m = fit_handshape_model([codes], 6, alpha=1.0)
    assert np.all(np.abs(m.phi - truth) < 0.02)
    assert m.phi.sum() == pytest.approx(1.0)


def test_handshape_log_prob_mean_and_permutation_invariance():
    phi = np.array([0.5, 0.3, 0.2])
    m = HandshapeClassModel(phi)
    frames = np.eye(3)[[0, 0, 2, 1]]
    ref = (2 * math.log(0.5) + math.log(0.2) + math.log(0.3)) / 4
    assert handshape_log_prob(frames, m, None) == pytest.approx(ref, abs=1e-14)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert handshape_log_prob(frames[rng.permutation(4)], m, None) == \
            handshape_log_prob(frames, m, None)
    assert handshape_log_prob(np.empty((0, 3)), m, None) == 0.0


def test_fit_codebook_size():
    x = np.random.default_rng(0).dirichlet(np.ones(4), 200)
    assert fit_codebook(x, 8, seed=1).size == 8

