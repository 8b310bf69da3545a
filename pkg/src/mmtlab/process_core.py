"""Finite Gaussian processes: covariance validation, Euclidean realization,
canonical metric, and priors.

A centered Gaussian vector (G_t)_{t in T} with covariance K is realized as
points h_t with <h_s, h_t> = K(s, t), so that G_t = <Z, h_t> for a standard
Gaussian Z. The canonical metric is d(s, t) = ||h_s - h_t||.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParams, DistinctnessViolation, NotPSD, NotSymmetric

SYM_RTOL = 1e-12
EIG_RTOL = 1e-10
GRAM_ATOL = 1e-8
DISTINCT_RTOL = 1e-9
PRIOR_ATOL = 1e-12


@dataclass(eq=False)
class EmbeddedProcess:
    """Index set realized as distinct vectors; row t is h_t."""

    points: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise BadParams("points must be a 2-d array")
        if not self.labels:
            self.labels = tuple(range(self.points.shape[0]))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def gram(self) -> np.ndarray:
        return self.points @ self.points.T


@dataclass(eq=False)
class FiniteMetric:
    dist: np.ndarray
    diam: float
    d_min: float


@dataclass(eq=False)
class Prior:
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def validate_covariance(K) -> np.ndarray:
    """Symmetrize and PSD-check a covariance matrix.

    Asymmetry beyond 1e-12 (relative to the largest entry) raises NotSymmetric;
    eigenvalues below -1e-10 * max diagonal raise NotPSD; negative eigenvalues
    inside the tolerance are clipped to zero. A matrix that needs no clipping
    is returned unchanged apart from exact symmetrization.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise NotSymmetric("covariance must be a square matrix")
    scale = float(np.abs(K).max()) if K.size else 0.0
    asym = float(np.abs(K - K.T).max()) if K.size else 0.0
    if asym > SYM_RTOL * max(scale, 1e-300):
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds relative tolerance {SYM_RTOL}")
    K = 0.5 * (K + K.T)
    maxdiag = float(np.max(np.diag(K))) if K.size else 0.0
    tol = EIG_RTOL * max(maxdiag, 0.0)
    w, V = np.linalg.eigh(K)
    if w.size and float(w.min()) < -tol:
        raise NotPSD(f"eigenvalue {w.min():.6e} below -{tol:.3e}")
    if w.size and float(w.min()) < 0.0:
        w = np.clip(w, 0.0, None)
        K = V @ np.diag(w) @ V.T
        K = 0.5 * (K + K.T)
    return K


def embed(K) -> EmbeddedProcess:
    """Factor K = A A^T by symmetric eigendecomposition; rows of A are the points.

    Rank-deficient K is fine. Raises DistinctnessViolation when two rows
    coincide (the process has two a.s.-equal coordinates).
    """
    K = np.asarray(K, dtype=float)
    w, V = np.linalg.eigh(0.5 * (K + K.T))
    w = np.clip(w, 0.0, None)
    A = V * np.sqrt(w)[None, :]
    gram_err = float(np.abs(A @ A.T - K).max()) if K.size else 0.0
    if gram_err > GRAM_ATOL:
        raise NotPSD(f"factorization residual {gram_err:.3e} exceeds {GRAM_ATOL}")
    emb = EmbeddedProcess(points=A)
    _check_distinct(emb)
    return emb


def process_from_points(points, labels: tuple = ()) -> EmbeddedProcess:
    """Build a process directly from an explicit point configuration."""
    emb = EmbeddedProcess(points=np.asarray(points, dtype=float), labels=labels)
    _check_distinct(emb)
    return emb


def _check_distinct(emb: EmbeddedProcess) -> None:
    n = emb.n
    if n < 2:
        return
    diff = emb.points[:, None, :] - emb.points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    diam = float(dist.max())
    thresh = DISTINCT_RTOL * (diam if diam > 0.0 else 1.0)
    off = dist[~np.eye(n, dtype=bool)]
    if off.size and float(off.min()) < thresh:
        raise DistinctnessViolation(
            f"minimum pairwise distance {off.min():.3e} below {thresh:.3e}"
        )


def metric_of(emb: EmbeddedProcess) -> FiniteMetric:
    """Pairwise Euclidean distances with diameter and smallest nonzero distance."""
    diff = emb.points[:, None, :] - emb.points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    np.fill_diagonal(dist, 0.0)
    dist = 0.5 * (dist + dist.T)
    diam = float(dist.max()) if emb.n else 0.0
    off = dist[~np.eye(emb.n, dtype=bool)]
    d_min = float(off.min()) if off.size else np.inf
    return FiniteMetric(dist=dist, diam=diam, d_min=d_min)


def make_prior(weights) -> Prior:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise BadParams("prior weights must be a vector")
    if w.size and float(w.min()) < 0.0:
        raise BadParams("prior weights must be nonnegative")
    if abs(float(w.sum()) - 1.0) > PRIOR_ATOL:
        raise BadParams(f"prior weights sum to {w.sum():.17g}, not 1")
    return Prior(weights=w)


def uniform_prior(n: int) -> Prior:
    return Prior(weights=np.full(int(n), 1.0 / int(n)))


def entropy(p: Prior) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    w = p.weights
    m = w > 0.0
    return float(-(w[m] * np.log(w[m])).sum())
