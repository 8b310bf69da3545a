"""Gaussian width of a finite point configuration.

W(T) = E sup_t <Z, h_t> for standard Gaussian Z, estimated by Monte Carlo
with counter-based substreams, plus closed-form oracles for the two-point
and i.i.d.-orthonormal configurations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .errors import BadParams
from .process_core import EmbeddedProcess
from .rng import block_sizes, mean_and_stderr, substream, tree_sum

WIDTH_STREAM = 1


@dataclass
class WidthEstimate:
    value: float
    stderr: float
    samples: int
    seed: int


def width_mc(emb: EmbeddedProcess, samples: int, seed: int) -> WidthEstimate:
    """Monte Carlo estimate of E max_t <Z, h_t>.

    Each sample records max_t <Z, h_t> - <Z, h_0>; the subtracted term has
    mean zero, so the estimator is unbiased, a singleton gives exactly 0 +/- 0,
    and adding points can only increase every sample pathwise. Deterministic
    given (samples, seed) regardless of execution order.
    """
    samples = int(samples)
    if samples < 2:
        raise BadParams("samples must be >= 2")
    pts = emb.points
    part_sum = []
    part_sq = []
    for b, bs in enumerate(block_sizes(samples)):
        rng = substream(seed, WIDTH_STREAM, b)
        Z = rng.standard_normal((bs, pts.shape[1]))
        V = Z @ pts.T
        x = V.max(axis=1) - V[:, 0]
        part_sum.append(float(x.sum()))
        part_sq.append(float((x * x).sum()))
    mean, se = mean_and_stderr(tree_sum(part_sum), tree_sum(part_sq), samples)
    return WidthEstimate(value=mean, stderr=se, samples=samples, seed=int(seed))


def width_two_point_exact(D: float) -> float:
    """E max(G_a, G_b) for a centered pair at distance D: D / sqrt(2 pi)."""
    if D < 0:
        raise BadParams("distance must be nonnegative")
    return float(D) / np.sqrt(2.0 * np.pi)


def width_iid_max_exact(n: int) -> float:
    """E max of n i.i.d. standard normals by 1-d quadrature (abs tol 1e-8)."""
    n = int(n)
    if n < 1:
        raise BadParams("n must be >= 1")
    if n == 1:
        return 0.0

    def integrand(x):
        return x * n * norm.pdf(x) * norm.cdf(x) ** (n - 1)

    val, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-10, limit=200)
    return float(val)
