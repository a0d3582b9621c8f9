import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penmix.errors import DegenerateDensity, DimensionMismatch, EmptyComponent
from penmix.gaussian import log_density
from penmix.mixture import (
    MixtureModel,
    log_likelihood,
    responsibilities,
    sample_mixture,
    weighted_mle_update,
)
from penmix.simdata import example1_truth, example2_truth, make_rng


def random_model(rng, M, d):
    w = rng.dirichlet(np.ones(M))
    means = rng.normal(scale=2.0, size=(M, d))
    covs = []
    for _ in range(M):
        A = rng.standard_normal((d, d))
        covs.append(A @ A.T + 0.2 * np.eye(d))
    return MixtureModel(w, means, np.array(covs))


# model invariants -----------------------------------------------------------


def test_rejects_bad_weights():
    with pytest.raises(ValueError):
        MixtureModel(np.array([0.5, 0.6]), np.zeros((2, 2)), np.array([np.eye(2)] * 2))
    with pytest.raises(ValueError):
        MixtureModel(np.array([1.2, -0.2]), np.zeros((2, 2)), np.array([np.eye(2)] * 2))


def test_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        MixtureModel(np.array([1.0]), np.zeros((1, 2)), np.eye(3)[None])


def test_arrays_are_read_only():
    m = example1_truth()
    with pytest.raises(ValueError):
        m.weights[0] = 1.0


# log_likelihood ---------------------------------------------------------------


def test_loglik_single_point_at_mode():
    m = MixtureModel(np.ones(1), np.array([[1.0, 2.0]]), np.diag([2.0, 0.5])[None])
    ll = log_likelihood(m, np.array([[1.0, 2.0]]))
    assert ll == pytest.approx(log_density(np.array([1.0, 2.0]), m.means[0], m.covs[0]), abs=1e-14)


def test_loglik_identical_components_merge():
    cov = np.array([[1.0, 0.3], [0.3, 2.0]])
    two = MixtureModel(np.array([0.3, 0.7]), np.zeros((2, 2)), np.array([cov, cov]))
    one = MixtureModel(np.ones(1), np.zeros((1, 2)), cov[None])
    X = make_rng(1).standard_normal((50, 2))
    assert log_likelihood(two, X) == pytest.approx(log_likelihood(one, X), abs=1e-10)


def test_loglik_matches_naive_sum():
    rng = np.random.default_rng(3)
    m = random_model(rng, 2, 2)
    X = rng.standard_normal((20, 2))
    # brute force: densities in linear space, no log-sum-exp
    naive = 0.0
    for x in X:
        total = 0.0
        for w, mu, S in zip(m.weights, m.means, m.covs):
            diff = x - mu
            q = diff @ np.linalg.inv(S) @ diff
            total += w * math.exp(-0.5 * q) / (2 * math.pi * math.sqrt(np.linalg.det(S)))
        naive += math.log(total)
    assert log_likelihood(m, X) == pytest.approx(naive, abs=1e-10)


def test_loglik_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        log_likelihood(example1_truth(), np.zeros((3, 3)))


def test_loglik_permutation_invariant():
    rng = np.random.default_rng(4)
    m = random_model(rng, 4, 2)
    X = rng.standard_normal((100, 2))
    perm = [2, 0, 3, 1]
    assert log_likelihood(m.permuted(perm), X) == pytest.approx(log_likelihood(m, X), abs=1e-12)
    np.testing.assert_allclose(responsibilities(m.permuted(perm), X), responsibilities(m, X)[:, perm], atol=1e-15)


# responsibilities -------------------------------------------------------------


def test_resp_single_component_is_one():
    m = MixtureModel(np.ones(1), np.zeros((1, 2)), np.eye(2)[None])
    h = responsibilities(m, make_rng(0).standard_normal((30, 2)))
    np.testing.assert_array_equal(h, np.ones((30, 1)))


def test_resp_symmetric_point():
    m = MixtureModel(np.array([0.5, 0.5]), np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([np.eye(2)] * 2))
    h = responsibilities(m, np.array([[0.0, 3.0]]))
    np.testing.assert_allclose(h, [[0.5, 0.5]], atol=1e-15)


def test_resp_far_component():
    m = MixtureModel(np.array([0.5, 0.5]), np.array([[0.0, 0.0], [100.0, 0.0]]), np.array([np.eye(2)] * 2))
    h = responsibilities(m, np.zeros((1, 2)))
    assert h[0, 0] > 1 - 1e-10


def test_resp_degenerate_raises():
    m = MixtureModel(np.ones(1), np.zeros((1, 2)), (1e-6 * np.eye(2))[None])
    with pytest.raises(DegenerateDensity):
        # the quadratic form overflows to inf for every component
        responsibilities(m, np.array([[1e200, 1e200]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 4))
def test_resp_rows_sum_to_one(seed, M, d):
    rng = np.random.default_rng(seed)
    m = random_model(rng, M, d)
    h = responsibilities(m, rng.normal(scale=3.0, size=(25, d)))
    assert np.all((h >= 0) & (h <= 1))
    np.testing.assert_allclose(h.sum(axis=1), 1.0, atol=1e-12)


# weighted_mle_update -----------------------------------------------------------


def test_mle_uniform_weights_plain_mle():
    X = make_rng(5).standard_normal((40, 2))
    [(mu, cov)] = weighted_mle_update(X, np.ones(40))
    np.testing.assert_allclose(mu, X.mean(axis=0), atol=1e-14)
    np.testing.assert_allclose(cov, np.cov(X, rowvar=False, bias=True), atol=1e-14)


def test_mle_hard_labels():
    X = make_rng(6).standard_normal((30, 2))
    labels = np.arange(30) % 3
    h = np.eye(3)[labels]
    for k, (mu, cov) in enumerate(weighted_mle_update(X, h)):
        part = X[labels == k]
        np.testing.assert_allclose(mu, part.mean(axis=0), atol=1e-14)
        np.testing.assert_allclose(cov, np.cov(part, rowvar=False, bias=True), atol=1e-14)


def test_mle_random_weights_direct_formula():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((10, 2))
    h = rng.random((10, 2))
    for m, (mu, cov) in enumerate(weighted_mle_update(X, h)):
        w = h[:, m]
        mu_ref = sum(w[i] * X[i] for i in range(10)) / w.sum()
        cov_ref = sum(w[i] * np.outer(X[i] - mu_ref, X[i] - mu_ref) for i in range(10)) / w.sum()
        np.testing.assert_allclose(mu, mu_ref, atol=1e-12)
        np.testing.assert_allclose(cov, cov_ref, atol=1e-12)


def test_mle_duplicated_data():
    X = make_rng(8).standard_normal((15, 2))
    [(mu1, c1)] = weighted_mle_update(X, np.ones(15))
    [(mu2, c2)] = weighted_mle_update(np.vstack([X, X]), np.full(30, 0.5))
    np.testing.assert_allclose(mu1, mu2, atol=1e-14)
    np.testing.assert_allclose(c1, c2, atol=1e-14)


def test_mle_empty_component():
    X = make_rng(9).standard_normal((10, 2))
    h = np.column_stack([np.ones(10), np.zeros(10)])
    with pytest.raises(EmptyComponent) as info:
        weighted_mle_update(X, h, min_mass=3.0)
    assert info.value.indices == (1,)


# sampling ------------------------------------------------------------------------


def test_sample_degenerate_weights():
    m = MixtureModel(np.array([1.0, 0.0]), np.array([[0.0, 0.0], [50.0, 50.0]]), np.array([np.eye(2)] * 2))
    X = sample_mixture(m, 500, make_rng(10))
    assert np.abs(X).max() < 10


def test_sample_frequencies():
    from penmix.mixture import sample_mixture_labeled

    _, labels = sample_mixture_labeled(example1_truth(), 300_000, make_rng(11))
    freq = np.bincount(labels) / labels.size
    np.testing.assert_allclose(freq, 1 / 3, atol=0.01)


def test_sample_deterministic():
    a = sample_mixture(example2_truth(), 100, make_rng(12))
    b = sample_mixture(example2_truth(), 100, make_rng(12))
    assert a.tobytes() == b.tobytes()


# serialization --------------------------------------------------------------------


def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(13)
    for M, d in [(1, 1), (3, 2), (5, 4)]:
        m = random_model(rng, M, d)
        back = MixtureModel.loads(m.dumps())
        assert back.weights.tobytes() == m.weights.tobytes()
        assert back.means.tobytes() == m.means.tobytes()
        assert back.covs.tobytes() == m.covs.tobytes()
        path = tmp_path / f"m{M}.json"
        m.save(path)
        assert MixtureModel.load(path).covs.tobytes() == m.covs.tobytes()


def test_document_layout():
    doc = json.loads(example1_truth().dumps())
    assert set(doc) == {"dim", "weights", "components"}
    assert doc["dim"] == 2
    assert set(doc["components"][0]) == {"mean", "cov"}


def test_document_uses_17_digits():
    text = MixtureModel(np.ones(1), np.array([[0.1, 1 / 3]]), np.eye(2)[None]).dumps()
    assert "0.33333333333333331" in text
