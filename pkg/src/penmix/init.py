"""K-means clustering and conversion of a partition into a starting mixture."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InitTooManyComponents, TooManyClusters
from .gaussian import default_cov_floor, regularize_cov
from .mixture import MixtureModel


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    history: list = field(default_factory=list)  # inertia after each Lloyd iteration


def _kmeanspp(X, K, rng):
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    first = rng.integers(n)
    centers[0] = X[first]
    d2 = kernels.sq_distances(X, centers[:1])[:, 0]
    for k in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[k] = X[idx]
        d2 = np.minimum(d2, kernels.sq_distances(X, centers[k : k + 1])[:, 0])
    return centers


def kmeans(data, M, rng, max_iter=300):
    """Lloyd's algorithm from k-means++ seeds.

    An empty cluster is reseeded at the point farthest from its current
    center. Deterministic given the state of ``rng``.
    """
    X = np.ascontiguousarray(data, dtype=float)
    n = X.shape[0]
    if M > n:
        raise TooManyClusters(f"cannot form {M} clusters from {n} points")
    if M < 1:
        raise ValueError("M must be at least 1")
    centers = _kmeanspp(X, M, rng)
    labels = None
    history = []
    for _ in range(max_iter):
        D = kernels.sq_distances(X, centers)
        new_labels = D.argmin(axis=1)
        dist = D[np.arange(n), new_labels]
        counts = np.bincount(new_labels, minlength=M)
        for k in np.flatnonzero(counts == 0):
            # steal the worst-served point from a cluster that can spare it
            order = np.argsort(-dist, kind="stable")
            for i in order:
                if counts[new_labels[i]] > 1:
                    counts[new_labels[i]] -= 1
                    new_labels[i] = k
                    counts[k] = 1
                    dist[i] = 0.0
                    centers[k] = X[i]
                    break
        history.append(float(dist.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(M):
            centers[k] = X[labels == k].mean(axis=0)
    D = kernels.sq_distances(X, centers)
    inertia = float(D[np.arange(n), labels].sum())
    history.append(inertia)
    return KMeansResult(labels=labels, centers=centers, inertia=inertia, history=history)


def init_from_kmeans(data, M, rng, cov_floor=None, max_iter=300):
    """Starting mixture from a K-means partition.

    Weights are cluster proportions and means are centers. Clusters with
    fewer than d+1 points take the pooled within-cluster covariance.
    """
    X = np.ascontiguousarray(data, dtype=float)
    n, d = X.shape
    if M > n / d:
        raise InitTooManyComponents(f"M={M} exceeds n/d = {n / d:g}")
    floor = default_cov_floor(X) if cov_floor is None else cov_floor
    km = kmeans(X, M, rng, max_iter=max_iter)
    counts = np.bincount(km.labels, minlength=M)
    means = np.empty((M, d))
    scatters = np.empty((M, d, d))
    for k in range(M):
        pts = X[km.labels == k]
        means[k] = pts.mean(axis=0)
        diff = pts - means[k]
        scatters[k] = diff.T @ diff
    pooled = scatters.sum(axis=0) / n
    covs = np.empty((M, d, d))
    for k in range(M):
        cov = scatters[k] / counts[k] if counts[k] >= d + 1 else pooled
        covs[k] = regularize_cov(0.5 * (cov + cov.T), floor)
    return MixtureModel(counts / n, means, covs)
