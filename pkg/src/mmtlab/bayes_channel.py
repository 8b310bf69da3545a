"""Gaussian additive observation model and its estimation-theoretic curves.

The model observes Y_s = s * h_X + Z with X drawn from a prior on the point
set and Z standard Gaussian. This module produces the maximum-likelihood and
posterior-mean error curves and the mutual information curve over an SNR grid
(one common random-number stream for all three), integrates such curves with
a certified truncation tail, provides the exact two-point (binary) channel
formulas, and searches for least favorable priors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from ._kernels import channel_block
from .errors import BadParams, TailNotCertified
from .process_core import EmbeddedProcess, Prior
from .rng import BLOCK, block_sizes, mean_and_stderr, substream, tree_sum

CHANNEL_STREAM = 2
LF_STREAM = 3

SQRT_2PI = math.sqrt(2.0 * math.pi)
TAIL_FRACTION = 1e-6


@dataclass
class ChannelSample:
    x_index: int
    y: np.ndarray
    s: float
    noise: np.ndarray


@dataclass
class SnrCurve:
    grid: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    tail_bound: float

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.stderrs = np.asarray(self.stderrs, dtype=float)
        if self.grid.size and np.any(np.diff(self.grid) <= 0.0):
            raise BadParams("grid must be strictly increasing")
        if np.any(self.stderrs < 0.0) or self.tail_bound < 0.0:
            raise BadParams("stderrs and tail_bound must be nonnegative")


@dataclass
class BinaryChannelPoint:
    delta: float
    s: float
    mmse: float
    mi: float


@dataclass
class SnrIntegral:
    """Integral of an SNR curve; iterates as (value, error_bound)."""

    value: float
    error_bound: float
    stat_stderr: float
    quad_bound: float
    tail_bound: float

    def __iter__(self):
        return iter((self.value, self.error_bound))


def _geometry(emb: EmbeddedProcess):
    pts = emb.points
    G = pts @ pts.T
    sqn = np.diag(G).copy()
    D2 = sqn[:, None] + sqn[None, :] - 2.0 * G
    np.clip(D2, 0.0, None, out=D2)
    np.fill_diagonal(D2, 0.0)
    return G, sqn, D2


def _log_prior(prior: Prior) -> np.ndarray:
    w = prior.weights
    out = np.full(w.shape, -np.inf)
    m = w > 0.0
    out[m] = np.log(w[m])
    return out


def _sample_x(cum: np.ndarray, u: np.ndarray, last_support: int) -> np.ndarray:
    idx = np.searchsorted(cum, u, side="right")
    return np.where(idx >= cum.shape[0], last_support, idx).astype(np.int64)


def sample_observation(emb: EmbeddedProcess, prior: Prior, s: float, seed: int) -> ChannelSample:
    """Draw one observation y = s * h_X + Z, deterministic given seed."""
    if s < 0:
        raise BadParams("s must be nonnegative")
    rng = substream(seed, CHANNEL_STREAM, 0)
    z = rng.standard_normal(emb.points.shape[1])
    u = rng.random()
    cum = np.cumsum(prior.weights)
    last_support = int(np.nonzero(prior.weights > 0.0)[0][-1])
    x = int(_sample_x(cum, np.array([u]), last_support)[0])
    y = s * emb.points[x] + z
    return ChannelSample(x_index=x, y=y, s=float(s), noise=z)


def mle_point(emb: EmbeddedProcess, y: np.ndarray, s: float) -> int:
    """argmax_u <y, h_u> - (s/2) ||h_u||^2, ties to the lowest index."""
    if s < 0:
        raise BadParams("s must be nonnegative")
    pts = emb.points
    scores = pts @ np.asarray(y, dtype=float) - 0.5 * s * (pts * pts).sum(axis=1)
    return int(np.argmax(scores))


def posterior_weights(emb: EmbeddedProcess, prior: Prior, y: np.ndarray, s: float) -> np.ndarray:
    """Posterior P(X = u | Y_s = y), max-shifted softmax, sums to 1."""
    if s < 0:
        raise BadParams("s must be nonnegative")
    pts = emb.points
    logits = _log_prior(prior) + s * (pts @ np.asarray(y, dtype=float)) \
        - 0.5 * s * s * (pts * pts).sum(axis=1)
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


# ---------------------------------------------------------------------------
# SNR grid and tail certificate

def tail_smax(n: int, diam: float, d_min: float) -> float:
    """Truncation point beyond which the MLE error integral tail is certified.

    Chosen so (n-1) * diam^2 * (2/d_min) * phi(s_max * d_min / 2) equals
    TAIL_FRACTION * diam, via the closed-form inversion of the Gaussian
    density; returns 0 when the tail is empty (n < 2 or degenerate metric).
    """
    if n < 2 or diam <= 0.0 or not np.isfinite(d_min) or d_min <= 0.0:
        return 0.0
    c = TAIL_FRACTION * d_min / (2.0 * (n - 1) * diam)
    a_sq = -2.0 * math.log(c) - math.log(2.0 * math.pi)
    if a_sq <= 0.0:
        return 0.0
    return 2.0 * math.sqrt(a_sq) / d_min


def mse_tail_bound(n: int, diam: float, d_min: float, s_last: float) -> float:
    """Union bound on the MLE (hence also posterior-mean) error integral
    beyond s_last: (n-1) * diam^2 * (2/d_min) * phi(s_last * d_min / 2)."""
    if n < 2 or diam <= 0.0 or not np.isfinite(d_min) or d_min <= 0.0:
        return 0.0
    a = 0.5 * s_last * d_min
    phi = math.exp(-0.5 * a * a) / SQRT_2PI
    return (n - 1) * diam * diam * (2.0 / d_min) * phi


def default_snr_grid(n: int, diam: float, d_min: float, points: int = 64) -> np.ndarray:
    """Zero plus `points` values up to the certified truncation point.

    Geometric spacing up to s_max/2 resolves the low-SNR knee; linear spacing
    covers the Gaussian-decay tail without wasting nodes.
    """
    s_max = tail_smax(n, diam, d_min)
    if s_max <= 0.0:
        return np.array([0.0])
    half = points // 2
    geo = np.geomspace(s_max / 256.0, s_max / 2.0, half)
    lin = np.linspace(s_max / 2.0, s_max, points - half + 1)[1:]
    return np.concatenate(([0.0], geo, lin))


# ---------------------------------------------------------------------------
# Monte Carlo curves

def channel_curves(emb: EmbeddedProcess, prior: Prior, grid, samples: int, seed: int):
    """MSE-of-MLE, MMSE, and mutual information curves from one shared
    (X, Z) stream: same draws for every grid point and all three curves.

    Returns (mse_mle, mmse, mi) as SnrCurve values.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or grid[0] != 0.0:
        raise BadParams("grid must start at 0")
    if np.any(np.diff(grid) <= 0.0):
        raise BadParams("grid must be strictly increasing")
    samples = int(samples)
    if samples < 2:
        raise BadParams("samples must be >= 2")

    pts = emb.points
    n, N = pts.shape
    G, sqn, D2 = _geometry(emb)
    logpi = _log_prior(prior)
    cum = np.cumsum(prior.weights)
    last_support = int(np.nonzero(prior.weights > 0.0)[0][-1])

    K = grid.shape[0]
    part_sum = []
    part_sq = []
    buf_mle = np.empty(BLOCK)
    buf_pm = np.empty(BLOCK)
    buf_mi = np.empty(BLOCK)
    for b, bs in enumerate(block_sizes(samples)):
        rng = substream(seed, CHANNEL_STREAM, b)
        Z = rng.standard_normal((bs, N))
        U = rng.random(bs)
        X = _sample_x(cum, U, last_support)
        ZH = Z @ pts.T
        psum = np.empty((3, K))
        psq = np.empty((3, K))
        for k in range(K):
            mle = buf_mle[:bs]
            pm = buf_pm[:bs]
            mi = buf_mi[:bs]
            channel_block(float(grid[k]), X, ZH, logpi, G, D2, sqn, mle, pm, mi)
            psum[0, k] = mle.sum()
            psum[1, k] = pm.sum()
            psum[2, k] = mi.sum()
            psq[0, k] = (mle * mle).sum()
            psq[1, k] = (pm * pm).sum()
            psq[2, k] = (mi * mi).sum()
        part_sum.append(psum)
        part_sq.append(psq)

    tot = tree_sum(part_sum)
    tot_sq = tree_sum(part_sq)
    values = np.empty((3, K))
    stderrs = np.empty((3, K))
    for c in range(3):
        for k in range(K):
            values[c, k], stderrs[c, k] = mean_and_stderr(tot[c, k], tot_sq[c, k], samples)

    diam = float(np.sqrt(D2.max())) if n > 1 else 0.0
    off = D2[~np.eye(n, dtype=bool)]
    d_min = float(np.sqrt(off.min())) if off.size else np.inf
    err_tail = mse_tail_bound(n, diam, d_min, float(grid[-1]))
    mse_mle = SnrCurve(grid=grid, values=values[0], stderrs=stderrs[0], tail_bound=err_tail)
    mmse = SnrCurve(grid=grid, values=values[1], stderrs=stderrs[1], tail_bound=err_tail)
    mi = SnrCurve(grid=grid, values=values[2], stderrs=stderrs[2], tail_bound=0.0)
    return mse_mle, mmse, mi


def mse_mle_curve(emb, prior, grid, samples, seed) -> SnrCurve:
    """E ||h_X - h_MLE(Y_s)||^2 per grid point (common random numbers across
    the grid and with the other curves at the same seed)."""
    return channel_curves(emb, prior, grid, samples, seed)[0]


def mmse_curve(emb, prior, grid, samples, seed) -> SnrCurve:
    """E ||h_X - posterior mean||^2 per grid point."""
    return channel_curves(emb, prior, grid, samples, seed)[1]


def mutual_info_curve(emb, prior, grid, samples, seed) -> SnrCurve:
    """I(h_X; Y_s) in nats per grid point, estimated directly from
    log p(Y|X) - log p(Y) so identity checks against it are non-circular."""
    return channel_curves(emb, prior, grid, samples, seed)[2]


def integrate_snr_curve(curve: SnrCurve, decay_certificate) -> SnrIntegral:
    """Trapezoid integral over the grid plus the curve's certified tail bound.

    decay_certificate = (n, diam, d_min) fixes the truncation point the grid
    must reach; raises TailNotCertified when it stops short. The error bound
    combines the statistical stderr (trapezoid-weighted, conservative under
    common random numbers), a second-difference quadrature estimate, and the
    tail bound.
    """
    n, diam, d_min = decay_certificate
    s_max = tail_smax(int(n), float(diam), float(d_min))
    g = curve.grid
    v = curve.values
    se = curve.stderrs
    if g[-1] < s_max - 1e-9:
        raise TailNotCertified(f"grid ends at {g[-1]:.6g}, certificate needs {s_max:.6g}")
    if g.size < 2:
        return SnrIntegral(curve.tail_bound, curve.tail_bound, 0.0, 0.0, curve.tail_bound)
    h = np.diff(g)
    value = float(np.trapezoid(v, g))
    wts = np.zeros_like(g)
    wts[:-1] += 0.5 * h
    wts[1:] += 0.5 * h
    stat = float((wts * se).sum())
    quad = 0.0
    if g.size >= 3:
        dd = np.zeros_like(g)
        for k in range(1, g.size - 1):
            dd[k] = 2.0 * ((v[k + 1] - v[k]) / h[k] - (v[k] - v[k - 1]) / h[k - 1]) \
                / (h[k] + h[k - 1])
        dd[0] = dd[1]
        dd[-1] = dd[-2]
        for i in range(h.size):
            quad += (h[i] ** 3 / 12.0) * max(abs(dd[i]), abs(dd[i + 1]))
    tail = curve.tail_bound
    return SnrIntegral(value + tail, stat + quad + tail, stat, quad, tail)


# ---------------------------------------------------------------------------
# exact binary (two-point) channel

def _sech2(t: float) -> float:
    # 4 e^{-2|t|} / (1 + e^{-2|t|})^2, overflow-free
    e = math.exp(-2.0 * abs(t))
    return 4.0 * e / ((1.0 + e) ** 2)


def _m_b(alpha: float) -> float:
    """E sech^2(alpha * Y) with Y = alpha * B + N, B uniform on +/-1.

    By symmetry the B = +1 term equals the B = -1 term. Adaptive quadrature
    split at the sech^2 bump; abs tol well below 1e-10.
    """
    if alpha == 0.0:
        return 1.0

    def f(z):
        return math.exp(-0.5 * z * z) / SQRT_2PI * _sech2(alpha * (alpha + z))

    left, _ = integrate.quad(f, -np.inf, -alpha, epsabs=1e-13, limit=200)
    right, _ = integrate.quad(f, -alpha, np.inf, epsabs=1e-13, limit=200)
    return left + right


def binary_channel_exact(delta: float, s: float) -> BinaryChannelPoint:
    """Exact MMSE and mutual information for two symmetric points at
    distance delta: mmse(s) = (delta^2/4) E sech^2(alpha Y) with
    alpha = s * delta / 2, and mi(s) = integral of u * mmse(u) du.
    """
    if delta <= 0.0:
        raise BadParams("delta must be positive")
    if s < 0.0:
        raise BadParams("s must be nonnegative")
    alpha = 0.5 * s * delta
    mmse = 0.25 * delta * delta * _m_b(alpha)
    if alpha == 0.0:
        mi = 0.0
    else:
        inner = [x for x in (1.0, 2.0, 4.0) if 0.0 < x < alpha] or None
        mi, _ = integrate.quad(lambda a: a * _m_b(a), 0.0, alpha,
                               epsabs=1e-9, limit=200, points=inner)
    return BinaryChannelPoint(delta=float(delta), s=float(s), mmse=float(mmse), mi=float(mi))


@lru_cache(maxsize=32)
def _binary_curve_cached(delta: float, grid_key: tuple):
    grid = np.asarray(grid_key, dtype=float)
    alphas = 0.5 * delta * grid
    # refine each alpha interval so the cumulative trapezoid error is O(1e-6)
    fine = [np.array([alphas[0]])]
    for k in range(alphas.size - 1):
        h = alphas[k + 1] - alphas[k]
        sub = min(max(int(math.ceil(h / 1e-3)), 1), 64)
        seg = np.linspace(alphas[k], alphas[k + 1], sub + 1)[1:]
        fine.append(seg)
    fine = np.concatenate(fine)
    mb_fine = np.array([_m_b(a) for a in fine])
    f = fine * mb_fine
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(fine))))
    idx = np.searchsorted(fine, alphas)
    mmse = 0.25 * delta * delta * np.array([_m_b(a) for a in alphas])
    mi = cum[idx]
    return mmse, mi


def binary_channel_curve(delta: float, s_grid) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized exact binary curves on an SNR grid; mi by refined
    cumulative trapezoid of the area identity integrand."""
    g = np.asarray(s_grid, dtype=float)
    if g.size == 0 or np.any(np.diff(g) < 0.0):
        raise BadParams("s_grid must be nondecreasing and nonempty")
    mmse, mi = _binary_curve_cached(float(delta), tuple(float(x) for x in g))
    return mmse.copy(), mi.copy()


def binary_mmse_integral(delta: float) -> float:
    """Integral of the exact binary MMSE over all s in (0, infinity);
    equals (delta/2) times the area under E sech^2(alpha Y)."""
    if delta <= 0.0:
        raise BadParams("delta must be positive")
    head, _ = integrate.quad(_m_b, 0.0, 8.0, epsabs=1e-11, limit=200)
    tail, _ = integrate.quad(_m_b, 8.0, np.inf, epsabs=1e-12, limit=200)
    return 0.5 * delta * (head + tail)


# ---------------------------------------------------------------------------
# least favorable prior search

def _dirichlet(rng: np.random.Generator, n: int) -> np.ndarray:
    x = rng.gamma(1.0, 1.0, size=n)
    return x / x.sum()


def least_favorable_search(emb: EmbeddedProcess, objective: str, budget: int, seed: int,
                           restarts: int = 8, samples: int = 20000, fd_step: float = 0.05,
                           return_trace: bool = False):
    """Exponentiated-gradient ascent over priors maximizing the chosen
    objective; returns (Prior, value), a lower bound witness for the supremum.

    objective: "integrated_mmse" (Monte Carlo, common random numbers across
    every evaluation) or "sqrt_rate_integral" (deterministic). budget caps the
    total number of objective evaluations across all restarts. Gradients are
    finite differences along mixtures with each vertex. Restart 0 starts at
    the uniform prior; accepted iterations never decrease the objective.
    """
    n = emb.n
    if n == 0:
        raise BadParams("empty point set")

    if objective == "integrated_mmse":
        G, sqn, D2 = _geometry(emb)
        diam = float(np.sqrt(D2.max())) if n > 1 else 0.0
        off = D2[~np.eye(n, dtype=bool)]
        d_min = float(np.sqrt(off.min())) if off.size else np.inf
        grid = default_snr_grid(n, diam, d_min, points=32)
        cert = (n, diam, d_min)

        def evaluate(w):
            if n == 1:
                return 0.0
            curve = channel_curves(emb, Prior(weights=w), grid, samples, seed)[1]
            return integrate_snr_curve(curve, cert).value
    elif objective == "sqrt_rate_integral":
        from .rate_distortion import sqrt_rate_integral
        from .process_core import metric_of

        metric = metric_of(emb)

        def evaluate(w):
            return sqrt_rate_integral(metric, Prior(weights=w))
    else:
        raise BadParams(f"unknown objective {objective!r}")

    if n == 1:
        p = Prior(weights=np.array([1.0]))
        val = evaluate(p.weights)
        return (p, val, [val]) if return_trace else (p, val)

    budget = int(budget)
    restarts = max(int(restarts), 1)
    per_restart = max(budget // restarts, n + 2)
    best_val = -np.inf
    best_w = None
    best_trace = None
    for r in range(restarts):
        if r == 0:
            w = np.full(n, 1.0 / n)
        else:
            w = _dirichlet(substream(seed, LF_STREAM, r), n)
        val = evaluate(w)
        trace = [val]
        eta = 1.0
        used = 1
        while used + n + 2 <= per_restart:
            grad = np.empty(n)
            for u in range(n):
                wu = (1.0 - fd_step) * w
                wu[u] += fd_step
                grad[u] = (evaluate(wu) - val) / fd_step
                used += 1
            gshift = grad - grad.max()
            accepted = False
            while used < per_restart:
                cand = w * np.exp(eta * gshift / max(np.abs(gshift).max(), 1e-12))
                cand = np.clip(cand, 1e-15, None)
                cand /= cand.sum()
                cval = evaluate(cand)
                used += 1
                if cval > val:
                    w, val = cand, cval
                    trace.append(cval)
                    eta = min(eta * 1.3, 8.0)
                    accepted = True
                    break
                eta *= 0.5
                if eta < 1e-5:
                    break
            if not accepted:
                break
        # deterministic best-of: strict improvement keeps the earliest restart on ties
        if best_w is None or val > best_val:
            best_val = val
            best_w = w
            best_trace = trace
    p = Prior(weights=best_w)
    return (p, float(best_val), best_trace) if return_trace else (p, float(best_val))
