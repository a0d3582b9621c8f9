"""Dense multivariate Gaussian primitives.

Everything works in log space. Covariances are factored with Cholesky and
never inverted explicitly.
"""

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite

LOG_2PI = float(np.log(2.0 * np.pi))

# relative tolerance used when deciding whether a matrix already meets the floor;
# keeps regularize_cov idempotent under round-off of the recomposition
_FLOOR_RTOL = 1e-9
# eigen-decomposition round-off is relative to the largest eigenvalue
_EIG_RTOL = 1e-13


def _meets_floor(w_min, w_max, floor):
    return w_min >= floor * (1.0 - _FLOOR_RTOL) - _EIG_RTOL * abs(w_max)


def _as_square(cov):
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {cov.shape}")
    return cov


def cholesky(cov):
    """Lower-triangular ``L`` with ``cov = L @ L.T``.

    Raises NotPositiveDefinite when a pivot is not strictly positive.
    """
    cov = _as_square(cov)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if not np.all(np.isfinite(L)) or np.any(np.diag(L) <= 0.0):
        raise NotPositiveDefinite("non-positive pivot in Cholesky factorization")
    return L


def log_density(x, mean, cov):
    """Log of the multivariate normal density at ``x``."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = _as_square(cov)
    d = cov.shape[0]
    if x.shape != (d,) or mean.shape != (d,):
        raise DimensionMismatch(
            f"x {x.shape}, mean {mean.shape} and cov {cov.shape} disagree"
        )
    L = cholesky(cov)
    z = _forward_solve(L, x - mean)
    half_logdet = float(np.sum(np.log(np.diag(L))))
    return -0.5 * (d * LOG_2PI + float(z @ z)) - half_logdet


def log_density_rows(X, mean, L):
    """Vectorised log density of each row of ``X`` given a Cholesky factor."""
    X = np.asarray(X, dtype=float)
    d = L.shape[0]
    Z = _forward_solve(L, (X - mean).T)
    maha = np.einsum("ij,ij->j", Z, Z)
    return -0.5 * (d * LOG_2PI + maha) - float(np.sum(np.log(np.diag(L))))


def _forward_solve(L, b):
    # plain forward substitution; b may be (d,) or (d, k)
    b = np.array(b, dtype=float, copy=True)
    d = L.shape[0]
    for i in range(d):
        if i:
            b[i] -= L[i, :i] @ b[:i]
        b[i] /= L[i, i]
    return b


def sym_eigenvalues(cov):
    """Eigenvalues of a symmetric matrix, largest first."""
    cov = _as_square(cov)
    if cov.shape[0] == 2:
        a, b, c = cov[0, 0], 0.5 * (cov[0, 1] + cov[1, 0]), cov[1, 1]
        mid = 0.5 * (a + c)
        rad = float(np.hypot(0.5 * (a - c), b))
        hi = mid + rad
        # recover the small root from the determinant to avoid cancellation
        lo = (a * c - b * b) / hi if hi != 0.0 else mid - rad
        return np.array([hi, lo])
    w = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    return w[::-1].copy()


def regularize_cov(cov, floor):
    """Clamp eigenvalues of ``cov`` from below at ``floor``.

    Eigenvectors are preserved. A matrix that already meets the floor is
    returned unchanged.
    """
    cov = _as_square(cov)
    if floor <= 0:
        raise ValueError("floor must be positive")
    sym = 0.5 * (cov + cov.T)
    w, V = np.linalg.eigh(sym)
    if _meets_floor(w[0], w[-1], floor):
        return cov
    w = np.maximum(w, floor)
    out = (V * w) @ V.T
    return 0.5 * (out + out.T)


def regularize_covs(covs, floor):
    """Batched regularize_cov over a stack of shape (M, d, d)."""
    covs = np.asarray(covs, dtype=float)
    w = np.linalg.eigvalsh(covs)
    low = ~_meets_floor(w[:, 0], w[:, -1], floor)
    if not low.any():
        return covs
    covs = covs.copy()
    for m in np.flatnonzero(low):
        covs[m] = regularize_cov(covs[m], floor)
    return covs


def default_cov_floor(data, scale=1e-6):
    """Eigenvalue floor ``scale * trace(cov(data)) / d``."""
    data = np.asarray(data, dtype=float)
    d = data.shape[1]
    if data.shape[0] < 2:
        return scale
    tr = float(np.trace(np.atleast_2d(np.cov(data, rowvar=False, bias=True))))
    return scale * tr / d if tr > 0 else scale


def sample_gaussian(mean, cov, rng, size=None):
    """Draw ``mean + L z`` with ``z`` standard normal from ``rng``.

    Returns a single vector when ``size`` is None, otherwise ``size`` rows.
    """
    mean = np.asarray(mean, dtype=float)
    L = cholesky(cov)
    if L.shape[0] != mean.shape[0]:
        raise DimensionMismatch("mean and cov dimensions differ")
    if size is None:
        return mean + L @ rng.standard_normal(mean.shape[0])
    z = rng.standard_normal((size, mean.shape[0]))
    return mean + z @ L.T
