import math

import numpy as np
import pytest

from penmix.errors import EmptyRange
from penmix.init import init_from_kmeans
from penmix.mixture import MixtureModel, log_likelihood
from penmix.penalty import PenaltySpec
from penmix.selection import (
    aic_bic_search,
    baseline_fits,
    baseline_param_count,
    bic_value,
    lambda_grid,
    score_baselines,
    select_lambda,
)
from penmix.simdata import example1_spec, example1_truth, generate, make_rng, single_gaussian_spec


def test_bic_penalty_term():
    X = generate(example1_spec(seed=0))
    t = example1_truth()
    term = log_likelihood(t, X) - bic_value(t, X)
    assert term == pytest.approx(0.5 * 3 * 6 * math.log(600), rel=1e-14)
    assert term == pytest.approx(57.572, abs=1e-3)


def test_bic_single_point():
    X = np.array([[0.5, -0.5]])
    m = MixtureModel(np.ones(1), np.zeros((1, 2)), np.eye(2)[None])
    assert bic_value(m, X) == log_likelihood(m, X)


def test_bic_difference_per_component():
    X = generate(example1_spec(seed=0))
    t = example1_truth()
    four = MixtureModel(np.append(t.weights, 0.0), np.vstack([t.means, [[0, 0]]]),
                        np.concatenate([t.covs, np.eye(2)[None]]))
    assert bic_value(t, X) - bic_value(four, X) == pytest.approx(0.5 * 6 * math.log(600), abs=1e-9)


def test_grid_logeps_defaults():
    g = lambda_grid(600, 10, 6)
    assert g.size == 20
    assert np.all(np.diff(g) > 0)
    assert g[0] == pytest.approx(0.01 / math.sqrt(600))
    assert g[-1] == pytest.approx(0.9 / 60)
    assert g[-1] < 1 / 60
    anchor = math.sqrt(math.log(600) / 600) / 6
    assert np.min(np.abs(np.log(g / anchor))) <= math.log(2)


def test_grid_contains_anchor_when_inside():
    g = lambda_grid(600, 5, 6)
    anchor = math.sqrt(math.log(600) / 600) / 6
    assert np.any(g == anchor)
    assert g.size == 20
    assert np.all(np.diff(g) > 0)


def test_grid_two_points_are_endpoints():
    g = lambda_grid(600, 10, 6, count=2)
    np.testing.assert_allclose(g, [0.01 / math.sqrt(600), 0.9 / 60])


def test_grid_scad_ends_at_anchor():
    g = lambda_grid(600, 10, 6, kind="scad")
    assert g[-1] == pytest.approx(math.sqrt(math.log(600) / 600) / 6, rel=1e-15)
    assert g.size == 20


def test_grid_single_value():
    anchor = math.sqrt(math.log(600) / 600) / 6
    np.testing.assert_allclose(lambda_grid(600, 5, 6, count=1), [anchor])
    # the upper end wins when the anchor lies above it
    np.testing.assert_allclose(lambda_grid(600, 10, 6, count=1), [0.9 / 60])


def test_grid_empty_range():
    with pytest.raises(EmptyRange):
        lambda_grid(100, 10000, 6)
    with pytest.raises(ValueError):
        lambda_grid(600, 10, 6, count=0)


@pytest.fixture(scope="module")
def ex1_selection():
    X = generate(example1_spec(seed=0))
    init = init_from_kmeans(X, 10, make_rng(0, 1))
    grid = lambda_grid(600, 10, 6, count=8)
    return X, init, grid, select_lambda(X, 10, PenaltySpec(), grid, init=init)


def test_select_example1(ex1_selection):
    X, init, grid, res = ex1_selection
    assert res.best_model.n_components == 3
    assert res.best_lambda in grid
    assert len(res.per_lambda) == grid.size
    best = max((r for r in res.per_lambda if r.ok), key=lambda r: r.bic)
    assert best.bic == bic_value(res.best_model, X)


def test_select_grid_order_irrelevant(ex1_selection):
    X, init, grid, res = ex1_selection
    again = select_lambda(X, 10, PenaltySpec(), grid[::-1], init=init)
    assert again.best_lambda == res.best_lambda
    assert again.best_model.n_components == res.best_model.n_components


def test_select_csv(ex1_selection, tmp_path):
    _, _, grid, res = ex1_selection
    lines = res.to_csv().strip().split("\n")
    assert lines[0] == "lambda,M_hat,BIC,loglik,objective,iterations,status"
    assert len(lines) == grid.size + 1
    res.write_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == res.to_csv()


def test_select_tie_goes_to_larger_lambda():
    X = generate(single_gaussian_spec(n=300, seed=1))
    init = MixtureModel(np.ones(1), np.zeros((1, 2)), np.eye(2)[None])
    # with a single component every lambda reaches the same MLE
    res = select_lambda(X, 1, PenaltySpec(), [0.001, 0.002, 0.003], init=init)
    bics = [r.bic for r in res.per_lambda]
    assert max(bics) - min(bics) < 1e-9
    if len(set(bics)) == 1:
        assert res.best_lambda == 0.003


def test_select_small_lambda_keeps_true_order():
    X = generate(example1_spec(seed=2))
    init = init_from_kmeans(X, 3, make_rng(2, 1))
    res = select_lambda(X, 3, PenaltySpec(), [1e-5], init=init)
    assert res.best_model.n_components == 3


def test_baseline_param_count():
    assert baseline_param_count(3, 2) == 17
    assert baseline_param_count(1, 2) == 5


def test_baselines_single_gaussian():
    X = generate(single_gaussian_spec(n=500, seed=3))
    fits = baseline_fits(X, 3, rng=make_rng(3, 1))
    assert [f[0] for f in fits] == [1, 2, 3]
    assert score_baselines(fits, 500, 2, "BIC")[0] == 1
    assert score_baselines(fits, 500, 2, "aic")[0] == 1
    with pytest.raises(ValueError):
        score_baselines(fits, 500, 2, "HQ")


def test_baselines_one_order():
    X = generate(example1_spec(seed=4))
    M, model = aic_bic_search(X, 1, rng=make_rng(4, 1))
    assert M == 1
    np.testing.assert_allclose(model.means[0], X.mean(axis=0), atol=1e-10)


def test_baselines_example1_bic():
    X = generate(example1_spec(seed=5))
    M, _ = aic_bic_search(X, 5, rng=make_rng(5, 1))
    assert M == 3


def test_baselines_reject_large_order():
    with pytest.raises(ValueError):
        baseline_fits(np.zeros((4, 2)), 3)
