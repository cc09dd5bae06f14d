import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geofuzz.diversity import (cell_key, default_scale, diversity_order_q, magnitude_weighting,
                               select_landmarks, similarity_matrix, weighting_of)
from geofuzz.errors import ParameterError


def euclid(X):
    return np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)


def test_identity_similarity_weighting():
    D = np.full((4, 4), np.inf)
    np.fill_diagonal(D, 0.0)
    w = magnitude_weighting(D, 1.0)
    assert w.w.tolist() == [1.0] * 4 and w.magnitude == 4.0


def test_two_point_magnitude():
    D = np.array([[0.0, math.log(2)], [math.log(2), 0.0]])
    assert magnitude_weighting(D, 1.0).magnitude == pytest.approx(4 / 3, abs=1e-12)
    for d in (1e-3, 1e-6):
        M = magnitude_weighting(np.array([[0, d], [d, 0]]), 1.0).magnitude
        assert M == pytest.approx(2 / (1 + math.exp(-d)), abs=1e-12)
    assert magnitude_weighting(np.array([[0, 1e-9], [1e-9, 0]]), 1.0).magnitude == pytest.approx(1.0, abs=1e-8)


def test_weighting_residual_and_duplicates():
    rng = np.random.default_rng(0)
    X = rng.random((12, 2))
    D = euclid(X)
    Z = similarity_matrix(D, default_scale(D))
    w = weighting_of(Z)
    assert np.max(np.abs(Z @ w.w - 1)) < 1e-8
    # duplicating points leaves the magnitude unchanged
    Xd = np.vstack([X, X[:3]])
    Md = magnitude_weighting(euclid(Xd), default_scale(D)).magnitude
    assert Md == pytest.approx(w.magnitude, abs=1e-8)


def test_singular_fallbacks():
    Z = np.ones((3, 3))
    w = weighting_of(Z)
    assert w.fallback in ("ridge", "uniform")
    np.testing.assert_allclose(w.w, w.w[0])


def test_diversity_examples():
    n = 5
    assert diversity_order_q(np.eye(n), np.full(n, 1 / n), 1) == pytest.approx(n, abs=1e-12)
    p = np.array([0.2, 0.3, 0.5])
    assert diversity_order_q(np.ones((3, 3)), p, 1) == pytest.approx(1.0, abs=1e-12)
    assert diversity_order_q(np.eye(2), [0.5, 0.5], 2) == pytest.approx(2.0, abs=1e-12)
    # Z = I, q = 0 counts species
    assert diversity_order_q(np.eye(3), [0.5, 0.5, 0.0], 0) == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        diversity_order_q(np.eye(2), [0.7, 0.7], 1)


def test_diversity_continuous_at_one():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(2, 10))
        X = rng.random((n, 2))
        Z = similarity_matrix(euclid(X), 2.0)
        p = rng.dirichlet(np.ones(n))
        d1 = diversity_order_q(Z, p, 1)
        for q in (1 - 1e-4, 1 + 1e-4):
            assert abs(diversity_order_q(Z, p, q) - d1) < 1e-2


def test_landmarks_farthest_pair():
    X = np.array([[0.0], [1.0], [10.0]])
    assert set(select_landmarks(euclid(X), 2).indices) == {0, 2}


def test_landmarks_exhaustion_and_duplicates():
    X = np.array([[0.0], [1.0], [1.0], [3.0]])
    lm = select_landmarks(euclid(X), 10)
    assert sorted(lm.indices) == [0, 1, 3]
    same = np.zeros((3, 3))
    assert select_landmarks(same, 2).indices == (0,)


def test_landmarks_prefer_periphery():
    wins = 0
    for seed in range(20):
        X = np.random.default_rng(seed).random((41, 2))
        idx = list(select_landmarks(euclid(X), 15).indices)
        c = X.mean(axis=0)
        r = np.linalg.norm(X - c, axis=1)
        wins += r[idx].mean() > r.mean()
    assert wins >= 18


def test_landmarks_permutation_equivariant():
    rng = np.random.default_rng(2)
    X = rng.random((30, 2))
    base = {tuple(X[i]) for i in select_landmarks(euclid(X), 8).indices}
    perm = rng.permutation(30)
    Xp = X[perm]
    permuted = {tuple(Xp[i]) for i in select_landmarks(euclid(Xp), 8).indices}
    assert base == permuted


def test_maxmin_method():
    X = np.array([[0.0], [1.0], [5.0], [10.0]])
    assert select_landmarks(euclid(X), 3, method="maxmin").indices == (0, 3, 2)


def test_cell_key_examples():
    assert cell_key([0.2, 0.5, 0.9], 2) == (0, 1)
    assert cell_key([0.5, 0.5], 1) == (0,)
    assert cell_key([0.9, 0.1, 0.5], 1) == (1,)
    assert cell_key([0.9, 0.1, 0.5], 2) == (1, 2)
    with pytest.raises(ParameterError):
        cell_key([], 1)
    with pytest.raises(ParameterError):
        cell_key([1.0], 2)


@settings(max_examples=50)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=12), st.integers(1, 12))
def test_cell_key_properties(d, m):
    m = min(m, len(d))
    key = cell_key(d, m)
    assert key == cell_key(list(d), m)
    assert len(set(key)) == m
    assert [d[i] for i in key] == sorted(d)[:m]
