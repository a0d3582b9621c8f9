"""Choosing the tuning parameter by BIC, and the AIC/BIC order-search baselines."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRange, PenmixError
from .init import init_from_kmeans
from .mixture import _atomic_write, log_likelihood
from .pem import EMConfig, fit_penalized, fit_standard_em
from .penalty import PenaltyKind, free_params_per_component


def bic_value(model, data):
    """``loglik - 0.5 * M * D_f * log(n)`` evaluated at the fitted model."""
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    dof = free_params_per_component(model.dim)
    return log_likelihood(model, data) - 0.5 * model.n_components * dof * math.log(n)


def lambda_grid(n, M_init, dof, count=20, kind=PenaltyKind.LOG_EPS):
    """Log-spaced lambdas starting at ``0.01/sqrt(n)``.

    The log-epsilon grid ends at ``0.9/(M_init*D_f)``, just short of the value
    where its weight step breaks down; the interior point closest to the
    anchor ``sqrt(log n / n) / D_f`` is moved onto the anchor. The SCAD grid
    ends at the anchor itself: past it the flat part of SCAD starts to cover
    genuine components and whole clusters get merged. A one-point grid is
    the smaller of the anchor and the upper end.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    kind = PenaltyKind(kind)
    lo = 0.01 / math.sqrt(n)
    anchor = math.sqrt(math.log(n) / n) / dof if n > 1 else 0.0
    hi = 0.9 / (M_init * dof) if kind is PenaltyKind.LOG_EPS else anchor
    if lo >= hi:
        raise EmptyRange(f"lambda range [{lo:.3g}, {hi:.3g}] is empty for n={n}, M_init={M_init}")
    if count == 1:
        return np.array([min(anchor, hi)])
    grid = np.geomspace(lo, hi, count)
    if count > 2 and lo < anchor < hi:
        interior = np.arange(1, count - 1)
        k = interior[np.argmin(np.abs(np.log(grid[interior] / anchor)))]
        grid[k] = anchor
        grid = np.sort(grid)
    return grid


@dataclass
class LambdaFit:
    lam: float
    m_hat: int = 0
    bic: float = -math.inf
    objective: float = math.nan
    loglik: float = math.nan
    n_iter: int = 0
    status: str = "failed"
    error: str = ""
    model: object = None
    trace: object = None

    @property
    def ok(self):
        return self.error == ""


@dataclass
class SelectionResult:
    best_lambda: float
    best_model: object
    per_lambda: list = field(default_factory=list)
    init: object = None

    @property
    def best(self):
        for rec in self.per_lambda:
            if rec.lam == self.best_lambda and rec.ok:
                return rec
        return None

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "M_hat", "BIC", "loglik", "objective", "iterations", "status"])
        for r in self.per_lambda:
            w.writerow(
                [repr(r.lam), r.m_hat, repr(r.bic), repr(r.loglik), repr(r.objective), r.n_iter,
                 r.status if r.ok else f"failed: {r.error}"]
            )
        return buf.getvalue()

    def write_csv(self, path):
        _atomic_write(path, self.to_csv())


def select_lambda(data, M_init, spec_template, grid, config=None, rng=None, init=None, keep_traces=False):
    """Fit the penalized mixture at every lambda in ``grid`` and keep the BIC maximizer.

    All lambdas share one K-means start. A lambda whose fit raises is
    recorded as failed. Ties go to the larger lambda.
    """
    X = np.ascontiguousarray(data, dtype=float)
    config = config or EMConfig()
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if init is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        floor, _ = config.resolve(X)
        init = init_from_kmeans(X, M_init, rng, cov_floor=floor)
    results = []
    for lam in grid:
        rec = LambdaFit(lam=float(lam))
        try:
            model, trace = fit_penalized(X, init, spec_template.with_lambda(lam), config)
            rec.model = model
            rec.m_hat = model.n_components
            rec.bic = bic_value(model, X)
            rec.objective = float(trace.records[-1].objective)
            rec.loglik = float(trace.records[-1].loglik)
            rec.n_iter = trace.n_iter
            rec.status = trace.status
            if keep_traces:
                rec.trace = trace
        except PenmixError as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        results.append(rec)
    ok = [r for r in results if r.ok]
    if not ok:
        raise PenmixError("every lambda in the grid failed: " + results[0].error)
    best = max(ok, key=lambda r: (r.bic, r.lam))
    return SelectionResult(best_lambda=best.lam, best_model=best.model, per_lambda=results, init=init)


def baseline_param_count(M, d):
    # one weight is fixed by the sum-to-one constraint
    return M * free_params_per_component(d) - 1


def baseline_fits(data, M_max, config=None, rng=None, restarts=3):
    """Best-of-``restarts`` classical EM fit for each order 1..M_max.

    Returns a list of ``(M, loglik, model)``; orders where every restart
    failed carry ``-inf`` and ``None``.
    """
    X = np.ascontiguousarray(data, dtype=float)
    n, d = X.shape
    if M_max > n / d:
        raise ValueError(f"M_max={M_max} exceeds n/d")
    config = config or EMConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    floor, _ = config.resolve(X)
    out = []
    for M in range(1, M_max + 1):
        best_ll, best_model = -math.inf, None
        for _ in range(1 if M == 1 else restarts):
            try:
                start = init_from_kmeans(X, M, rng, cov_floor=floor)
                model, ll = fit_standard_em(X, start, config)
            except PenmixError:
                continue
            if ll > best_ll:
                best_ll, best_model = ll, model
        out.append((M, best_ll, best_model))
    return out


def score_baselines(fits, n, d, criterion):
    """Pick the order maximizing ``loglik - k`` (AIC) or ``loglik - k/2 log n`` (BIC)."""
    criterion = criterion.upper()
    if criterion not in ("AIC", "BIC"):
        raise ValueError(f"unknown criterion {criterion!r}")
    best = None
    for M, ll, model in fits:
        if model is None:
            continue
        k = baseline_param_count(M, d)
        score = ll - k if criterion == "AIC" else ll - 0.5 * k * math.log(n)
        if best is None or score > best[0]:
            best = (score, M, model)
    if best is None:
        raise PenmixError("no order could be fitted")
    return best[1], best[2]


def aic_bic_search(data, M_max, config=None, rng=None, criterion="BIC", restarts=3):
    """Exhaustive order search with classical EM; returns ``(M, model)``."""
    X = np.asarray(data, dtype=float)
    fits = baseline_fits(X, M_max, config, rng, restarts)
    return score_baselines(fits, X.shape[0], X.shape[1], criterion)
