import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penmix.mixture import MixtureModel, log_likelihood
from penmix.penalty import (
    PenaltyKind,
    PenaltySpec,
    free_params_per_component,
    penalized_objective,
    penalty_term,
    scad,
    scad_derivative,
)
from penmix.simdata import example1_truth, generate, example1_spec

A = 3.7


def test_free_params():
    assert free_params_per_component(2) == 6
    assert free_params_per_component(1) == 3
    assert free_params_per_component(19) == 210
    with pytest.raises(ValueError):
        free_params_per_component(0)


def test_spec_validation():
    with pytest.raises(ValueError):
        PenaltySpec(epsilon=0.0)
    with pytest.raises(ValueError):
        PenaltySpec(a=2.0)
    with pytest.raises(ValueError):
        PenaltySpec(lam=-1.0)
    assert PenaltySpec(kind="scad").kind is PenaltyKind.SCAD_LOG
    assert PenaltySpec.for_dim(3).dof == 10


def test_knot_scaling():
    spec = PenaltySpec(kind="scad", lam=0.01, dof=6)
    assert spec.knot == pytest.approx(0.06)
    assert PenaltySpec(kind="scad", lam=0.01, scale_knot=False).knot == 0.01


# scad ------------------------------------------------------------------------


def test_scad_values():
    lam = 0.1
    assert scad(0.0, lam, A) == 0.0
    assert scad(lam / 2, lam, A) == pytest.approx(lam / 2, abs=1e-15)
    assert scad(A * lam, lam, A) == pytest.approx(lam * (A + 1) / 2, abs=1e-15)
    assert scad(5.0, lam, A) == pytest.approx(lam * (A + 1) / 2, abs=1e-15)


def test_scad_midrange_by_quadrature():
    # integrate the derivative numerically from 0 as an independent route
    lam = 0.05
    for pi in (0.07, 0.1, 0.15, 0.18):
        grid = np.linspace(0, pi, 200_001)
        integral = np.trapezoid(scad_derivative(grid, lam, A), grid)
        assert scad(pi, lam, A) == pytest.approx(integral, abs=1e-9)


def test_scad_derivative_values():
    lam = 0.1
    assert scad_derivative(lam / 2, lam, A) == 1.0
    assert scad_derivative(2 * lam, lam, A) == pytest.approx(1.7 / 2.7, abs=1e-12)
    assert scad_derivative(A * lam + 0.01, lam, A) == 0.0


def test_scad_continuity_at_kinks():
    lam = 0.08
    for k in (lam, A * lam):
        left, right = scad(k * (1 - 1e-13), lam, A), scad(k * (1 + 1e-13), lam, A)
        assert abs(left - right) < 1e-12


def test_scad_zero_lambda():
    assert scad(0.3, 0.0) == 0.0
    assert scad_derivative(0.3, 0.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 0.2), st.floats(0.0, 1.0))
def test_scad_derivative_finite_differences(lam, u):
    pi = u * 1.2 * A * lam + 1e-4 * lam
    kinks = np.array([lam, A * lam])
    if np.min(np.abs(pi - kinks)) < 1e-3 * lam:
        return
    h = 1e-6 * lam
    fd = (scad(pi + h, lam, A) - scad(pi - h, lam, A)) / (2 * h)
    exact = scad_derivative(pi, lam, A)
    if exact == 0.0:
        assert abs(fd) < 1e-9
    else:
        assert abs(fd - exact) / exact < 1e-5


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 0.2), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_scad_nondecreasing(lam, u, v):
    lo, hi = sorted((u, v))
    assert scad(lo, lam, A) <= scad(hi, lam, A) + 1e-15


# penalty_term -------------------------------------------------------------------


def test_penalty_zero_weights_contribute_zero():
    for kind in PenaltyKind:
        spec = PenaltySpec(kind=kind, lam=0.01)
        assert penalty_term(spec, np.zeros(5), 600) == 0.0
        with_zero = penalty_term(spec, np.array([0.4, 0.0, 0.6]), 600)
        without = penalty_term(spec, np.array([0.4, 0.6]), 600)
        assert with_zero == without


def test_penalty_zero_lambda():
    assert penalty_term(PenaltySpec(lam=0.0), np.array([0.5, 0.5]), 100) == 0.0


def test_penalty_single_term():
    spec = PenaltySpec(lam=0.01 / 6, dof=6, epsilon=1e-6)
    # n * lam * D_f = 1
    assert penalty_term(spec, np.ones(1), 100) == pytest.approx(13.8155, abs=1e-4)
    assert penalty_term(spec, np.ones(1), 100) == pytest.approx(math.log((1e-6 + 1) / 1e-6), rel=1e-12)


def test_penalty_scad_form():
    spec = PenaltySpec(kind="scad", lam=0.002, dof=6, epsilon=1e-6)
    w = np.array([0.001, 0.01, 0.3, 0.689])
    expected = 500 * 0.002 * 6 * sum(math.log(1e-6 + scad(p, spec.knot, 3.7)) - math.log(1e-6) for p in w)
    assert penalty_term(spec, w, 500) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3), st.integers(0, 2), st.floats(1e-6, 0.1),
       st.sampled_from(list(PenaltyKind)))
def test_penalty_monotone_in_each_weight(w, k, bump, kind):
    spec = PenaltySpec(kind=kind, lam=0.005)
    w = np.array(w)
    w2 = w.copy()
    w2[k] += bump
    assert penalty_term(spec, w2, 100) >= penalty_term(spec, w, 100)


def test_scad_penalty_strictly_increasing_below_knot():
    spec = PenaltySpec(kind="scad", lam=0.005)
    grid = np.linspace(0, 0.999 * 3.7 * spec.knot, 50)
    vals = [penalty_term(spec, np.array([p]), 100) for p in grid]
    assert np.all(np.diff(vals) > 0)


# penalized_objective -------------------------------------------------------------


def test_objective_zero_lambda_is_loglik():
    X = generate(example1_spec(n=100, seed=1))
    m = example1_truth()
    assert penalized_objective(m, X, PenaltySpec(lam=0.0)) == log_likelihood(m, X)


def test_objective_single_component_closed_form():
    X = generate(example1_spec(n=50, seed=2))
    m = MixtureModel(np.ones(1), X.mean(axis=0, keepdims=True), np.cov(X, rowvar=False)[None])
    spec = PenaltySpec(lam=0.003, dof=6)
    expected = log_likelihood(m, X) - 50 * 0.003 * 6 * math.log((1e-6 + 1) / 1e-6)
    assert penalized_objective(m, X, spec) == pytest.approx(expected, rel=1e-12)


def test_objective_drop_zero_weight_component():
    X = generate(example1_spec(n=80, seed=3))
    t = example1_truth()
    padded = MixtureModel(
        np.append(t.weights, 0.0), np.vstack([t.means, [[9.0, 9.0]]]), np.concatenate([t.covs, np.eye(2)[None]])
    )
    for kind in PenaltyKind:
        spec = PenaltySpec(kind=kind, lam=0.002)
        assert penalized_objective(padded, X, spec) == pytest.approx(penalized_objective(t, X, spec), abs=1e-10)


def test_objective_relabel_invariant():
    X = generate(example1_spec(n=80, seed=4))
    m = MixtureModel(np.array([0.2, 0.5, 0.3]), example1_truth().means, example1_truth().covs)
    for kind in PenaltyKind:
        spec = PenaltySpec(kind=kind, lam=0.002)
        assert penalized_objective(m.permuted([2, 0, 1]), X, spec) == pytest.approx(
            penalized_objective(m, X, spec), abs=1e-10
        )
