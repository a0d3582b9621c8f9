"""Modified EM for penalized Gaussian mixtures, plus the classical EM baseline.

The penalized variants start from many components and delete any component
whose weight is driven below ``prune_threshold``. Mean and covariance
updates are the usual weighted MLEs; only the weight step differs.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from scipy.optimize import brentq

from .errors import (
    AllComponentsPruned,
    DegenerateDensity,
    EmptyComponent,
    InitTooManyComponents,
    LambdaTooLarge,
    NonpositiveDenominator,
    NotPositiveDefinite,
)
from .gaussian import default_cov_floor, regularize_covs
from .mixture import MixtureModel, _atomic_write
from .penalty import PenaltyKind, penalty_term, scad, scad_derivative


@dataclass
class EMConfig:
    max_iter: int = 2000
    rel_tol: float = 1e-8
    prune_threshold: float = 1e-4
    cov_floor: float | None = None  # None: 1e-6 * trace(cov(data)) / d
    min_component_mass: float | None = None  # None: d + 1 points
    # solve the SCAD weight step exactly when the linearised normalisers go nonpositive
    scad_exact_fallback: bool = True
    # SCAD steps are not monotone: require this many consecutive objectives
    # (no structural step in between) to agree within rel_tol
    scad_window: int = 10

    def __post_init__(self):
        if self.prune_threshold <= 0:
            raise ValueError("prune_threshold must be positive")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.scad_window < 2:
            raise ValueError("scad_window must be at least 2")

    def resolve(self, data):
        """Concrete (cov_floor, min_mass) for this data set."""
        floor = self.cov_floor if self.cov_floor is not None else default_cov_floor(data)
        mass = (
            self.min_component_mass
            if self.min_component_mass is not None
            else float(data.shape[1] + 1)
        )
        return floor, mass


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    n_components: int
    objective: float
    loglik: float
    pruned: tuple = ()  # original indices removed by the M-step that follows
    clamped: bool = False
    status: str = "running"


@dataclass
class EMTrace:
    records: list = field(default_factory=list)

    @property
    def status(self):
        return self.records[-1].status if self.records else "empty"

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def n_iter(self):
        return len(self.records)

    def objectives(self):
        return np.array([r.objective for r in self.records])

    def logliks(self):
        return np.array([r.loglik for r in self.records])

    def component_counts(self):
        return np.array([r.n_components for r in self.records], dtype=int)

    def structural_steps(self):
        """Boolean per record: the M-step after it clamped or pruned."""
        return np.array([bool(r.pruned) or r.clamped for r in self.records])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "M", "objective", "loglik", "pruned_count"])
        for r in self.records:
            w.writerow([r.iteration, r.n_components, repr(r.objective), repr(r.loglik), len(r.pruned)])
        return buf.getvalue()

    def write_csv(self, path):
        _atomic_write(path, self.to_csv())


# ---------------------------------------------------------------------------
# weight updates


def _logeps_weights(h_col_means, lam, dof, M=None):
    hbar = np.asarray(h_col_means, dtype=float)
    M = len(hbar) if M is None else M
    c = lam * dof
    denom = 1.0 - M * c
    if denom <= 0:
        raise LambdaTooLarge(f"M * lambda * D_f = {M * c:.6g} >= 1")
    raw = (hbar - c) / denom
    clamped = bool(np.any(raw < 0))
    w = np.maximum(raw, 0.0)
    if clamped:
        total = w.sum()
        if total <= 0:
            raise AllComponentsPruned("every weight was clamped to zero")
        w = w / total
    return w, clamped


def update_weights_logeps(h_col_means, lam, dof, M=None):
    """Closed-form weight step for the log-epsilon penalty.

    ``max(0, (hbar - lam*D_f) / (1 - M*lam*D_f))``; survivors are
    renormalized if anything was clamped.
    """
    return _logeps_weights(h_col_means, lam, dof, M)[0]


def _scad_slopes(prev, knot, epsilon, a):
    # d/dpi log(eps + p(pi)) at the previous weights
    return scad_derivative(prev, knot, a) / (epsilon + scad(prev, knot, a))


def scad_denominators(prev_weights, lam, dof, epsilon, a, n, knot=None):
    """The per-component normalisers of the linearised SCAD weight step."""
    prev = np.asarray(prev_weights, dtype=float)
    g = _scad_slopes(prev, lam if knot is None else knot, epsilon, a)
    c = n * lam * dof
    return n - c * float(np.sum(g * prev)) + c * g


def _threshold(w, prune_threshold):
    w = w / w.sum()
    w = np.where(w < prune_threshold, 0.0, w)
    total = w.sum()
    if total <= 0:
        raise AllComponentsPruned("every weight fell below the pruning threshold")
    return w / total


def update_weights_scad(h_col_sums, prev_weights, lam, dof, epsilon, a, n, prune_threshold=1e-4, knot=None):
    """Weight step for the SCAD-composed log penalty, linearised at ``prev_weights``.

    ``knot`` defaults to ``lam``.
    """
    h = np.asarray(h_col_sums, dtype=float)
    T = np.atleast_1d(scad_denominators(prev_weights, lam, dof, epsilon, a, n, knot))
    if np.any(T <= 0):
        raise NonpositiveDenominator(
            f"denominator {T.min():.6g} <= 0; lambda={lam:g} too large for current weights"
        )
    return _threshold(h / T, prune_threshold)


def update_weights_scad_exact(h_col_sums, prev_weights, lam, dof, epsilon, a, n, prune_threshold=1e-4, knot=None):
    """SCAD weight step with the Lagrange multiplier solved for exactly.

    Stationarity of the linearised Lagrangian gives ``w_m = h_m / (beta + c*g_m)``
    with ``c = n*lam*D_f``; ``beta`` is the root of ``sum(w) = 1`` above
    ``-c*min(g)``. The linearised step instead fixes ``beta`` at
    ``n - c*sum(g*prev)`` and renormalizes; the two coincide when all
    ``g`` are equal and stay defined where that choice of ``beta`` fails.
    """
    h = np.asarray(h_col_sums, dtype=float)
    prev = np.asarray(prev_weights, dtype=float)
    g = _scad_slopes(prev, lam if knot is None else knot, epsilon, a)
    cg = n * lam * dof * g
    pos = h > 0
    if not pos.any():
        raise AllComponentsPruned("no component carries any mass")
    lo = -cg[pos].min()

    def excess(beta):
        return float(np.sum(h[pos] / (beta + cg[pos]))) - 1.0

    # excess decreases from +inf at lo to -1 at +inf
    hi = max(lo, 0.0) + h.sum() + 1.0
    step = max(abs(lo), 1.0)
    b0 = lo + 1e-12 * step
    while excess(b0) <= 0:
        b0 = lo + (b0 - lo) * 1e-3
        if b0 == lo:
            break
    beta = brentq(excess, b0, hi, xtol=1e-14 * step, rtol=4 * np.finfo(float).eps)
    w = np.where(pos, h / np.where(pos, beta + cg, 1.0), 0.0)
    return _threshold(w, prune_threshold)


def prune(model, threshold):
    """Drop components with weight below ``threshold`` and renormalize."""
    dead = np.flatnonzero(model.weights < threshold)
    if dead.size == 0:
        return model
    if dead.size == model.n_components:
        raise AllComponentsPruned("every component is below the pruning threshold")
    return model.drop(dead)


# ---------------------------------------------------------------------------
# EM drivers


def _batched_chol(covs, floor):
    try:
        return np.linalg.cholesky(covs)
    except np.linalg.LinAlgError:
        # round-off can leave a clamped matrix a hair indefinite
        covs = regularize_covs(covs, floor * 1.0001)
        try:
            return np.linalg.cholesky(covs)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from None


def _check_init(X, init):
    n, d = X.shape
    if init.dim != d:
        raise ValueError(f"init has dim {init.dim}, data has {d}")
    if init.n_components > n / d:
        raise InitTooManyComponents(
            f"{init.n_components} initial components exceed n/d = {n / d:g}"
        )


def _run(X, init, config, spec=None, callback=None):
    """Shared EM loop. ``spec is None`` runs classical EM."""
    n, d = X.shape
    floor, min_mass = config.resolve(X)
    w = np.array(init.weights, dtype=float)
    mu = np.array(init.means, dtype=float)
    S = regularize_covs(np.array(init.covs, dtype=float), floor)
    L = _batched_chol(S, floor)
    labels = np.arange(init.n_components)
    penalized = spec is not None and spec.lam > 0
    logeps = spec is not None and spec.kind is PenaltyKind.LOG_EPS
    if spec is not None and logeps and init.n_components * spec.lam * spec.dof >= 1:
        raise LambdaTooLarge(
            f"M_init * lambda * D_f = {init.n_components * spec.lam * spec.dof:.6g} >= 1"
        )

    window = config.scad_window if penalized and not logeps else 2
    trace = EMTrace()
    recent = []  # objectives since the last structural step
    for it in range(config.max_iter + 1):
        with np.errstate(divide="ignore"):
            log_w = np.log(w)
        ll, mass, new_mu, new_S, ok = kernels.em_pass(X, log_w, mu, L)
        if not ok:
            raise DegenerateDensity("an observation has zero density under every component")
        obj = ll - penalty_term(spec, w, n) if penalized else ll
        M = len(w)

        recent.append(obj)
        del recent[:-window]
        if len(recent) == window and max(recent) - min(recent) <= config.rel_tol * abs(obj):
            trace.records.append(IterationRecord(it, M, obj, ll, status="converged"))
            break
        if it == config.max_iter:
            trace.records.append(IterationRecord(it, M, obj, ll, status="max_iter"))
            break

        clamped = False
        if spec is None:
            small = np.flatnonzero(mass <= min_mass)
            if small.size:
                raise EmptyComponent(
                    f"components {small.tolist()} carry mass {mass[small].tolist()}", small
                )
            w_new = mass / mass.sum()
        elif logeps:
            w_new, clamped = _logeps_weights(mass / n, spec.lam, spec.dof, M)
        else:
            args = (mass, w, spec.lam, spec.dof, spec.epsilon, spec.a, n, config.prune_threshold)
            try:
                w_new = update_weights_scad(*args, knot=spec.knot)
            except NonpositiveDenominator:
                if not config.scad_exact_fallback:
                    raise
                w_new = update_weights_scad_exact(*args, knot=spec.knot)
                clamped = True

        if spec is None:
            dead = np.zeros(M, dtype=bool)
        else:
            # too little mass for a covariance estimate counts as extinction
            dead = (w_new < config.prune_threshold) | (mass <= min_mass)
        if dead.all():
            raise AllComponentsPruned(f"all components removed at iteration {it}")
        trace.records.append(
            IterationRecord(it, M, obj, ll, pruned=tuple(labels[dead].tolist()), clamped=clamped)
        )
        keep = ~dead
        w = w_new[keep]
        w = w / w.sum()
        mu = new_mu[keep]
        S = regularize_covs(new_S[keep], floor)
        L = _batched_chol(S, floor)
        labels = labels[keep]
        if callback is not None:
            callback(it, w.copy(), mu.copy(), S.copy())
        if clamped or dead.any():
            recent = []

    model = MixtureModel(w / w.sum(), mu, S)
    return model, trace, labels


def fit_penalized(data, init, spec, config=None, callback=None):
    """Run the modified EM from ``init`` under penalty ``spec``.

    Returns ``(model, trace)``. The trace has one record per evaluated
    iterate; the last record's status is ``converged`` or ``max_iter``.
    ``callback(iteration, weights, means, covs)`` is called after every
    M-step with the surviving components.
    """
    X = np.ascontiguousarray(data, dtype=float)
    config = config or EMConfig()
    _check_init(X, init)
    model, trace, _ = _run(X, init, config, spec, callback)
    return model, trace


def fit_standard_em(data, init, config=None, return_trace=False, callback=None):
    """Classical EM with fixed component count.

    Returns ``(model, loglik)``, or ``(model, loglik, trace)`` when asked.
    """
    X = np.ascontiguousarray(data, dtype=float)
    config = config or EMConfig()
    _check_init(X, init)
    model, trace, _ = _run(X, init, config, None, callback)
    ll = float(trace.records[-1].loglik)
    if return_trace:
        return model, ll, trace
    return model, ll
