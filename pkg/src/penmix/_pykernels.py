"""Pure numpy versions of the hot kernels.

Used when the compiled extension is unavailable, and as the reference the
compiled kernels are tested against.
"""

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

LOG_2PI = float(np.log(2.0 * np.pi))


def _log_probs(X, log_w, means, chols):
    n, d = X.shape
    M = means.shape[0]
    lp = np.empty((n, M))
    for m in range(M):
        L = chols[m]
        Z = solve_triangular(L, (X - means[m]).T, lower=True, check_finite=False)
        lp[:, m] = (
            log_w[m]
            - 0.5 * d * LOG_2PI
            - np.sum(np.log(np.diag(L)))
            - 0.5 * np.einsum("ij,ij->j", Z, Z)
        )
    return lp


def e_step(X, log_w, means, chols):
    """Responsibilities (n, M) and per-row log mixture density (n,)."""
    X = np.asarray(X, dtype=float)
    lp = _log_probs(X, np.asarray(log_w, dtype=float), np.asarray(means, dtype=float),
                    np.asarray(chols, dtype=float))
    with np.errstate(invalid="ignore"):
        point_ll = logsumexp(lp, axis=1)
        resp = np.exp(lp - point_ll[:, None])
    return resp, point_ll


def em_pass(X, log_w, means, chols):
    """One fused E-step and moment accumulation.

    Returns ``(loglik, mass, new_means, new_covs, ok)``.
    """
    X = np.asarray(X, dtype=float)
    means = np.asarray(means, dtype=float)
    resp, point_ll = e_step(X, log_w, means, chols)
    M, d = means.shape
    if not np.all(np.isfinite(point_ll)):
        return -np.inf, np.zeros(M), np.zeros((M, d)), np.zeros((M, d, d)), False
    mass = resp.sum(axis=0)
    new_means = np.zeros((M, d))
    new_covs = np.zeros((M, d, d))
    for m in range(M):
        if mass[m] <= 0.0:
            continue
        diff = X - means[m]
        h = resp[:, m]
        shift = (h @ diff) / mass[m]
        new_covs[m] = (diff * h[:, None]).T @ diff / mass[m] - np.outer(shift, shift)
        new_covs[m] = 0.5 * (new_covs[m] + new_covs[m].T)
        new_means[m] = means[m] + shift
    return float(point_ll.sum()), mass, new_means, new_covs, True


def sq_distances(X, centers):
    """Squared Euclidean distances, shape (n, K)."""
    X = np.asarray(X, dtype=float)
    centers = np.asarray(centers, dtype=float)
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)
