"""Replication experiments: order-selection histograms, matched parameter
summaries, the weight-profile diagnostic and accuracy-versus-n runs.

Replication ``r`` (0-based) of a run seeded with ``seed`` draws its data
from ``make_rng(seed, r, 0)`` and drives every random choice of the
method (K-means seeding, restarts) from ``make_rng(seed, r, 1)``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import linregress

from . import kernels
from .errors import CountMismatch, DegenerateDensity, EmptyComponent, PenmixError
from .gaussian import regularize_covs, sym_eigenvalues
from .init import init_from_kmeans
from .mixture import MixtureModel, _atomic_write, sample_mixture
from .pem import EMConfig, _batched_chol, fit_standard_em
from .penalty import PenaltyKind, PenaltySpec, free_params_per_component
from .selection import aic_bic_search, baseline_fits, lambda_grid, score_baselines, select_lambda
from .simdata import make_rng


class Method(str, enum.Enum):
    LOG_EPS = "logeps"
    SCAD_LOG = "scad"
    BASELINE_AIC = "aic"
    BASELINE_BIC = "bic"

    @property
    def penalized(self):
        return self in (Method.LOG_EPS, Method.SCAD_LOG)


# ---------------------------------------------------------------------------
# component matching


def _eigs(covs):
    return np.array([sym_eigenvalues(c) for c in covs])


def match_cost(estimated, truth):
    """Cost matrix ``C[t, e] = |mu_e - mu_t|^2 + |eig(S_e) - eig(S_t)|^2``."""
    dm = truth.means[:, None, :] - estimated.means[None, :, :]
    de = _eigs(truth.covs)[:, None, :] - _eigs(estimated.covs)[None, :, :]
    return np.sum(dm * dm, axis=2) + np.sum(de * de, axis=2)


def match_components(estimated, truth):
    """Permutation ``p`` such that ``estimated.permuted(p)`` lines up with ``truth``.

    ``p[t]`` is the estimated component assigned to true component ``t``;
    the assignment minimizes the summed mean and eigenvalue distances.
    """
    if estimated.n_components != truth.n_components:
        raise CountMismatch(
            f"{estimated.n_components} estimated components vs {truth.n_components} true"
        )
    rows, cols = linear_sum_assignment(match_cost(estimated, truth))
    perm = np.empty(truth.n_components, dtype=int)
    perm[rows] = cols
    return perm


# ---------------------------------------------------------------------------
# replications


@dataclass
class ReplicationResult:
    index: int
    m_hat: int = 0
    lam: float = math.nan
    model: MixtureModel | None = None
    seconds: float = 0.0
    error: str = ""

    @property
    def ok(self):
        return self.error == ""


@dataclass
class MatchedStats:
    """Across-replication mean and std of matched estimates, one row per true component."""

    count: int
    weight_mean: np.ndarray
    weight_std: np.ndarray
    means_mean: np.ndarray
    means_std: np.ndarray
    eig_mean: np.ndarray
    eig_std: np.ndarray

    @classmethod
    def from_models(cls, aligned):
        W = np.array([m.weights for m in aligned])
        MU = np.array([m.means for m in aligned])
        E = np.array([_eigs(m.covs) for m in aligned])
        # std over replications with the n-1 divisor; undefined for a single run
        ddof = 1 if len(aligned) > 1 else 0
        return cls(
            count=len(aligned),
            weight_mean=W.mean(axis=0),
            weight_std=W.std(axis=0, ddof=ddof),
            means_mean=MU.mean(axis=0),
            means_std=MU.std(axis=0, ddof=ddof),
            eig_mean=E.mean(axis=0),
            eig_std=E.std(axis=0, ddof=ddof),
        )

    def to_csv(self):
        M, d = self.means_mean.shape
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["component", "weight"]
            + [f"mean{j + 1}" for j in range(d)]
            + [f"eig{j + 1}" for j in range(d)]
        )

        def cell(mu, sd):
            return f"{mu:.4f}({sd:.4f})"

        for m in range(M):
            w.writerow(
                [m + 1, cell(self.weight_mean[m], self.weight_std[m])]
                + [cell(self.means_mean[m, j], self.means_std[m, j]) for j in range(d)]
                + [cell(self.eig_mean[m, j], self.eig_std[m, j]) for j in range(d)]
            )
        return buf.getvalue()

    def to_dict(self):
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


@dataclass
class ExperimentReport:
    method: str
    R: int
    true_order: int
    histogram: dict
    failures: int
    matched_stats: MatchedStats | None
    seconds: float
    replications: list = field(default_factory=list)

    @property
    def accuracy(self):
        return self.histogram.get(self.true_order, 0) / self.R

    def histogram_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M_hat", "count"])
        for M in sorted(self.histogram):
            w.writerow([M, self.histogram[M]])
        if self.failures:
            w.writerow(["failed", self.failures])
        return buf.getvalue()

    def replications_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replication", "M_hat", "lambda", "seconds", "error"])
        for r in self.replications:
            w.writerow([r.index, r.m_hat if r.ok else "", repr(r.lam), f"{r.seconds:.3f}", r.error])
        return buf.getvalue()

    def summary(self):
        return {
            "method": self.method,
            "replications": self.R,
            "true_order": self.true_order,
            "accuracy": self.accuracy,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "failures": self.failures,
            "seconds_total": self.seconds,
            "seconds_per_replication": self.seconds / self.R,
            "matched_stats": self.matched_stats.to_dict() if self.matched_stats else None,
        }

    def write(self, out_dir, prefix="report"):
        """Write ``<prefix>.json``, ``<prefix>_histogram.csv``, ``<prefix>_replications.csv``
        and, when any run found the true order, ``<prefix>_components.csv``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write(out / f"{prefix}.json", json.dumps(self.summary(), indent=2) + "\n")
        _atomic_write(out / f"{prefix}_histogram.csv", self.histogram_csv())
        _atomic_write(out / f"{prefix}_replications.csv", self.replications_csv())
        if self.matched_stats is not None:
            _atomic_write(out / f"{prefix}_components.csv", self.matched_stats.to_csv())


def run_method(data, method, M_init, config, rng, grid_count=20, restarts=3, spec_overrides=None):
    """Run one selection method end to end; returns ``(model, lambda)``.

    Baselines search orders 1..M_init and report ``nan`` for lambda.
    """
    method = Method(method)
    X = np.asarray(data, dtype=float)
    n, d = X.shape
    if method.penalized:
        kind = PenaltyKind(method.value)
        template = PenaltySpec.for_dim(d, kind=kind, **(spec_overrides or {}))
        grid = lambda_grid(n, M_init, free_params_per_component(d), grid_count, kind=kind)
        res = select_lambda(X, M_init, template, grid, config, rng=rng)
        return res.best_model, res.best_lambda
    criterion = "AIC" if method is Method.BASELINE_AIC else "BIC"
    _, model = aic_bic_search(X, M_init, config, rng, criterion=criterion, restarts=restarts)
    return model, math.nan


def _one_replication(job):
    truth, n, seed, r, method, M_init, config, grid_count, restarts, overrides = job
    t0 = time.perf_counter()
    rec = ReplicationResult(index=r)
    try:
        X = sample_mixture(truth, n, make_rng(seed, r, 0))
        model, lam = run_method(X, method, M_init, config, make_rng(seed, r, 1), grid_count, restarts, overrides)
        rec.model, rec.lam, rec.m_hat = model, lam, model.n_components
    except PenmixError as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.seconds = time.perf_counter() - t0
    return rec


def aggregate(method, truth, results, seconds):
    """Build the report from per-replication results (in any order)."""
    results = sorted(results, key=lambda r: r.index)
    hist = {}
    aligned = []
    for rec in results:
        if not rec.ok:
            continue
        hist[rec.m_hat] = hist.get(rec.m_hat, 0) + 1
        if rec.m_hat == truth.n_components:
            aligned.append(rec.model.permuted(match_components(rec.model, truth)))
    return ExperimentReport(
        method=Method(method).value,
        R=len(results),
        true_order=truth.n_components,
        histogram=hist,
        failures=sum(not r.ok for r in results),
        matched_stats=MatchedStats.from_models(aligned) if aligned else None,
        seconds=seconds,
        replications=results,
    )


def run_replications(spec, method, R, M_init=10, config=None, grid_count=20, restarts=3,
                     workers=1, spec_overrides=None):
    """Repeat data generation and order selection ``R`` times.

    A replication that raises is counted as a failure rather than aborting
    the run. ``workers > 1`` spreads replications over processes; the
    report does not depend on the worker count.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    method = Method(method)
    config = config or EMConfig()
    jobs = [
        (spec.truth, spec.n, spec.seed, r, method, M_init, config, grid_count, restarts, spec_overrides)
        for r in range(R)
    ]
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_replication, jobs))
    else:
        results = [_one_replication(job) for job in jobs]
    return aggregate(method, spec.truth, results, time.perf_counter() - t0)


def _baseline_replication(job):
    truth, n, seed, r, M_max, config, restarts = job
    t0 = time.perf_counter()
    out = []
    try:
        X = sample_mixture(truth, n, make_rng(seed, r, 0))
        fits = baseline_fits(X, M_max, config, make_rng(seed, r, 1), restarts)
    except PenmixError as exc:
        fits, err = None, f"{type(exc).__name__}: {exc}"
    seconds = time.perf_counter() - t0
    for criterion in ("AIC", "BIC"):
        rec = ReplicationResult(index=r, seconds=seconds)
        try:
            if fits is None:
                raise PenmixError(err)
            M, model = score_baselines(fits, n, truth.dim, criterion)
            rec.model, rec.m_hat = model, M
        except PenmixError as exc:
            rec.error = str(exc) if fits is None else f"{type(exc).__name__}: {exc}"
        out.append(rec)
    return out


def run_baselines(spec, R, M_max=10, config=None, restarts=3, workers=1):
    """AIC and BIC reports scored from one shared set of per-order fits.

    Equivalent to two :func:`run_replications` calls with the baseline
    methods and the same seed, at half the cost.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    config = config or EMConfig()
    jobs = [(spec.truth, spec.n, spec.seed, r, M_max, config, restarts) for r in range(R)]
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(_baseline_replication, jobs))
    else:
        pairs = [_baseline_replication(job) for job in jobs]
    seconds = time.perf_counter() - t0
    aic = aggregate(Method.BASELINE_AIC, spec.truth, [p[0] for p in pairs], seconds)
    bic = aggregate(Method.BASELINE_BIC, spec.truth, [p[1] for p in pairs], seconds)
    return aic, bic


def consistency_trend(base_spec, n_list, method, R, config=None, M_init=10, **kw):
    """Selection accuracy at each sample size, in the order of ``n_list``."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    out = []
    for n in n_list:
        rep = run_replications(base_spec.with_n(n), method, R, M_init, config, **kw)
        out.append((n, rep.accuracy))
    return out


# ---------------------------------------------------------------------------
# weight-profile diagnostic


@dataclass
class ProfileCurve:
    pi1: np.ndarray
    neg_loglik: np.ndarray

    def fit(self, lo=1e-4, hi=1e-2):
        """Least-squares line of ``neg_loglik`` against ``log(pi1)`` on ``[lo, hi]``.

        Returns ``(slope, intercept, r_squared)``.
        """
        sel = (self.pi1 >= lo) & (self.pi1 <= hi)
        if sel.sum() < 3:
            raise ValueError("fewer than three grid points in the fitting window")
        res = linregress(np.log(self.pi1[sel]), self.neg_loglik[sel])
        return float(res.slope), float(res.intercept), float(res.rvalue**2)

    def to_csv(self, footer=True):
        lines = ["pi1,neg_loglik"]
        lines += [f"{p!r},{v!r}" for p, v in zip(self.pi1.tolist(), self.neg_loglik.tolist())]
        if footer:
            try:
                slope, intercept, r2 = self.fit()
                lines.append(f"# fit over [1e-4, 1e-2]: slope={slope:.6g} intercept={intercept:.6g} r2={r2:.6f}")
            except ValueError:
                pass
        return "\n".join(lines) + "\n"

    def write(self, path):
        _atomic_write(path, self.to_csv())


def default_profile_grid(count=41):
    """Log-spaced from 0.5 down to 1e-5."""
    return np.geomspace(0.5, 1e-5, count)


def fit_fixed_weights(X, weights, start, config):
    """EM over means and covariances with the mixing weights held fixed.

    Returns ``(model, loglik)``.
    """
    floor, _ = config.resolve(X)
    log_w = np.log(np.asarray(weights, dtype=float))
    mu = np.array(start.means, dtype=float)
    S = regularize_covs(np.array(start.covs, dtype=float), floor)
    L = _batched_chol(S, floor)
    prev = None
    for _ in range(config.max_iter):
        ll, mass, new_mu, new_S, ok = kernels.em_pass(X, log_w, mu, L)
        if not ok:
            raise DegenerateDensity("an observation has zero density under every component")
        if prev is not None and abs(ll - prev) <= config.rel_tol * abs(ll):
            break
        prev = ll
        live = mass > 0
        mu = np.where(live[:, None], new_mu, mu)
        S = regularize_covs(np.where(live[:, None, None], new_S, S), floor)
        L = _batched_chol(S, floor)
    return MixtureModel(np.exp(log_w) / np.exp(log_w).sum(), mu, S), float(ll)


def profile_weight_curve(data, pi1_grid=None, config=None, rng=None, restarts=5):
    """Minimized negative log-likelihood of a two-component fit as ``pi1`` shrinks.

    An unconstrained two-component fit gives the starting point (the first
    of up to ``restarts`` K-means starts that does not empty a component);
    its lighter component becomes component 1. The weights are then frozen at
    ``(pi1, 1 - pi1)`` for each grid value in decreasing order and the means
    and covariances re-optimized, each fit warm-started from the previous
    one. Repeated grid values are solved once. The curve is returned sorted
    by decreasing ``pi1`` without duplicates.
    """
    X = np.ascontiguousarray(data, dtype=float)
    config = config or EMConfig()
    grid = default_profile_grid() if pi1_grid is None else np.asarray(pi1_grid, dtype=float)
    if grid.size == 0 or np.any((grid <= 0) | (grid > 0.5)):
        raise ValueError("pi1 values must lie in (0, 0.5]")
    rng = rng if rng is not None else np.random.default_rng(0)
    floor, _ = config.resolve(X)
    start = None
    for _ in range(restarts):
        try:
            start, _ = fit_standard_em(X, init_from_kmeans(X, 2, rng, cov_floor=floor), config)
            break
        except EmptyComponent as exc:
            error = exc
    if start is None:
        raise error
    if start.weights[0] > start.weights[1]:
        start = start.permuted([1, 0])
    pis = np.unique(grid)[::-1]
    values = np.empty(pis.size)
    current = start
    for i, p in enumerate(pis):
        current, ll = fit_fixed_weights(X, [p, 1.0 - p], current, config)
        values[i] = -ll
    return ProfileCurve(pi1=pis, neg_loglik=values)
