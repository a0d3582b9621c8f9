"""Gaussian mixture representation, likelihood, E-step and M-step pieces."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DegenerateDensity, DimensionMismatch, EmptyComponent
from .gaussian import cholesky, regularize_cov

WEIGHT_SUM_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Finite Gaussian mixture with full covariances.

    ``weights`` has shape (M,), ``means`` (M, d) and ``covs`` (M, d, d).
    Arrays are copied and made read-only on construction.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights).reshape(-1)
        mu = _frozen(self.means)
        if mu.ndim == 1:
            mu = _frozen(mu.reshape(len(w), -1))
        S = _frozen(self.covs)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", S)
        M = w.shape[0]
        if M < 1:
            raise ValueError("a mixture needs at least one component")
        if mu.shape[0] != M or S.shape[0] != M:
            raise DimensionMismatch(
                f"{M} weights but {mu.shape[0]} means and {S.shape[0]} covariances"
            )
        d = mu.shape[1]
        if S.shape[1:] != (d, d):
            raise DimensionMismatch(f"covariances have shape {S.shape[1:]}, expected {(d, d)}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(S))):
            raise ValueError("mixture parameters must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must be nonnegative and sum to 1, got sum {w.sum()!r}")

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    @cached_property
    def chols(self):
        L = np.empty_like(self.covs)
        for m in range(self.n_components):
            L[m] = cholesky(self.covs[m])
        L.setflags(write=False)
        return L

    @cached_property
    def log_weights(self):
        with np.errstate(divide="ignore"):
            lw = np.log(self.weights)
        lw.setflags(write=False)
        return lw

    def permuted(self, order):
        order = np.asarray(order, dtype=int)
        return MixtureModel(self.weights[order], self.means[order], self.covs[order])

    def drop(self, indices):
        keep = np.setdiff1d(np.arange(self.n_components), np.asarray(indices, dtype=int))
        w = self.weights[keep]
        return MixtureModel(w / w.sum(), self.means[keep], self.covs[keep])

    # serialization -----------------------------------------------------

    def to_dict(self):
        return {
            "dim": self.dim,
            "weights": self.weights.tolist(),
            "components": [
                {"mean": self.means[m].tolist(), "cov": self.covs[m].tolist()}
                for m in range(self.n_components)
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        comps = doc["components"]
        model = cls(
            np.asarray(doc["weights"], dtype=float),
            np.asarray([c["mean"] for c in comps], dtype=float),
            np.asarray([c["cov"] for c in comps], dtype=float),
        )
        if "dim" in doc and int(doc["dim"]) != model.dim:
            raise DimensionMismatch(f"document says dim={doc['dim']}, data has {model.dim}")
        return model

    def dumps(self):
        """JSON text with every number written to 17 significant digits."""
        return _dump_doc(self.to_dict())

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        _atomic_write(path, self.dumps())

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text())


def _num(x):
    return format(float(x), ".17g")


def _dump_value(v, indent):
    if isinstance(v, dict):
        pad = " " * (indent + 2)
        items = [f'{pad}"{k}": {_dump_value(val, indent + 2)}' for k, val in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + " " * indent + "}"
    if isinstance(v, (list, tuple)):
        if v and isinstance(v[0], dict):
            pad = " " * (indent + 2)
            return (
                "[\n"
                + ",\n".join(pad + _dump_value(x, indent + 2) for x in v)
                + "\n"
                + " " * indent
                + "]"
            )
        return "[" + ", ".join(_dump_value(x, indent) for x in v) + "]"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _num(v)
    if v is None:
        return "null"
    return json.dumps(v)


def _dump_doc(doc):
    return _dump_value(doc, 0) + "\n"


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _check_data(model, data):
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != model.dim:
        raise DimensionMismatch(f"data shape {data.shape} does not match model dim {model.dim}")
    return data


def log_likelihood(model, data):
    """Observed-data log-likelihood, summed over rows via log-sum-exp."""
    data = _check_data(model, data)
    _, point_ll = kernels.e_step(data, model.log_weights, model.means, model.chols)
    if not np.all(np.isfinite(point_ll)):
        raise DegenerateDensity("some observation has zero density under every component")
    return float(point_ll.sum())


def responsibilities(model, data):
    """Posterior component probabilities, shape (n, M)."""
    data = _check_data(model, data)
    resp, point_ll = kernels.e_step(data, model.log_weights, model.means, model.chols)
    bad = np.flatnonzero(~np.isfinite(point_ll))
    if bad.size:
        raise DegenerateDensity(f"all component densities underflow at row {bad[0]}")
    return resp


def min_component_mass(d):
    return float(d + 1)


def weighted_mle_update(data, h, cov_floor=None, min_mass=0.0):
    """Weighted means and covariances, one pair per column of ``h``.

    Uses the ``1 / sum(h)`` normalizer. Columns whose mass is at most
    ``min_mass`` raise EmptyComponent listing the offending columns.
    """
    data = np.asarray(data, dtype=float)
    h = np.asarray(h, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] != data.shape[0]:
        raise DimensionMismatch(f"{h.shape[0]} responsibility rows for {data.shape[0]} points")
    mass = h.sum(axis=0)
    empty = np.flatnonzero((mass <= min_mass) | (mass <= 0.0))
    if empty.size:
        raise EmptyComponent(
            f"components {empty.tolist()} have mass {mass[empty].tolist()}", empty
        )
    out = []
    for m in range(h.shape[1]):
        w = h[:, m]
        mu = w @ data / mass[m]
        diff = data - mu
        cov = (diff * w[:, None]).T @ diff / mass[m]
        cov = 0.5 * (cov + cov.T)
        if cov_floor is not None:
            cov = regularize_cov(cov, cov_floor)
        out.append((mu, cov))
    return out


def sample_mixture(model, n, rng):
    """``n`` draws: a component label from the weights, then a Gaussian draw."""
    return sample_mixture_labeled(model, n, rng)[0]


def sample_mixture_labeled(model, n, rng):
    labels = rng.choice(model.n_components, size=n, p=model.weights)
    z = rng.standard_normal((n, model.dim))
    out = np.empty((n, model.dim))
    for m in range(model.n_components):
        idx = labels == m
        out[idx] = model.means[m] + z[idx] @ model.chols[m].T
    return out, labels
