"""Penalties on mixing weights and the penalized log-likelihood."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .mixture import log_likelihood


class PenaltyKind(str, enum.Enum):
    LOG_EPS = "logeps"
    SCAD_LOG = "scad"


DEFAULT_EPSILON = 1e-6
DEFAULT_A = 3.7


def free_params_per_component(d):
    """Weight, mean and covariance parameters of one d-dimensional component."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return 1 + d + d * (d + 1) // 2


@dataclass(frozen=True)
class PenaltySpec:
    kind: PenaltyKind = PenaltyKind.LOG_EPS
    lam: float = 0.0
    epsilon: float = DEFAULT_EPSILON
    a: float = DEFAULT_A
    dof: int = 6  # free parameters per component, D_f
    # SCAD flattens beyond a*knot; the knot is lam*D_f (scaled) or lam itself
    scale_knot: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind(self.kind))
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.a <= 2:
            raise ValueError("SCAD parameter a must exceed 2")
        if self.dof < 1:
            raise ValueError("D_f must be positive")

    @classmethod
    def for_dim(cls, d, **kw):
        return cls(dof=free_params_per_component(d), **kw)

    def with_lambda(self, lam):
        return replace(self, lam=float(lam))

    @property
    def knot(self):
        """Threshold parameter handed to the SCAD function."""
        return self.lam * self.dof if self.scale_knot else self.lam


def scad(pi, lam, a=DEFAULT_A):
    """SCAD penalty value, the integral of its derivative from 0.

    Vectorised over ``pi``. With ``lam == 0`` the penalty is identically 0.
    """
    pi = np.asarray(pi, dtype=float)
    if lam == 0:
        out = np.zeros_like(pi)
        return out if out.ndim else float(out)
    # the middle branch is evaluated everywhere; it may overflow where unused
    with np.errstate(over="ignore", invalid="ignore"):
        mid = lam + (a * lam * (pi - lam) - 0.5 * (pi * pi - lam * lam)) / ((a - 1) * lam)
    out = np.where(pi <= lam, pi, np.where(pi <= a * lam, mid, 0.5 * lam * (a + 1)))
    return out if out.ndim else float(out)


def scad_derivative(pi, lam, a=DEFAULT_A):
    """``I(pi <= lam) + (a*lam - pi)_+ / ((a-1)*lam) * I(pi > lam)``."""
    pi = np.asarray(pi, dtype=float)
    if lam == 0:
        out = np.zeros_like(pi)
        return out if out.ndim else float(out)
    with np.errstate(over="ignore", invalid="ignore"):
        tail = np.maximum(a * lam - pi, 0.0) / ((a - 1) * lam)
    out = np.where(pi <= lam, 1.0, tail)
    return out if out.ndim else float(out)


def penalty_term(spec, weights, n):
    """``n * lam * D_f * sum(log(eps + g(pi)) - log(eps))`` with g the identity or SCAD."""
    w = np.asarray(weights, dtype=float)
    if spec.lam == 0:
        return 0.0
    g = w if spec.kind is PenaltyKind.LOG_EPS else scad(w, spec.knot, spec.a)
    # log1p keeps zero weights at exactly zero
    per = np.log1p(np.asarray(g) / spec.epsilon)
    return float(n * spec.lam * spec.dof * np.sum(per))


def penalized_objective(model, data, spec):
    data = np.asarray(data, dtype=float)
    return log_likelihood(model, data) - penalty_term(spec, model.weights, data.shape[0])
