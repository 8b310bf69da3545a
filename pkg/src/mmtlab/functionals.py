"""Chaining functionals on finite metric spaces.

ft_value evaluates sup_t integral_0^diam sqrt(log 1 / mu(B(t, r))) dr exactly
for a discrete measure (the ball mass is a step function of r), ft_optimize
minimizes it over the simplex by mirror descent, gamma2_part_exact enumerates
capped partition chains for tiny spaces, psi_gibbs evaluates the Gibbs soft
penalty, and penalized_functional integrates a penalized lower envelope in
closed form piece by piece.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import BadParams, MalformedStep, MmtLabError, TooLarge
from .process_core import FiniteMetric
from .rng import substream

FT_STREAM = 4
GRAD_CAP = 1e6


@dataclass(eq=False)
class MeasureOnT:
    weights: np.ndarray
    floor: float = 0.0

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def make_measure(weights, floor: float = 0.0) -> MeasureOnT:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or (w.size and float(w.min()) < 0.0):
        raise MmtLabError("measure weights must be a nonnegative vector")
    if abs(float(w.sum()) - 1.0) > 1e-12:
        raise MmtLabError(f"measure weights sum to {w.sum():.17g}, not 1")
    return MeasureOnT(weights=w, floor=float(floor))


def ft_value(metric: FiniteMetric, mu: MeasureOnT) -> float:
    """sup_t of the ball-mass integral; +infinity when some ball of positive
    radius has mass zero (exact finite-sum evaluation)."""
    w = mu.weights
    n = w.shape[0]
    if n <= 1 or metric.diam <= 0.0:
        return 0.0
    best = 0.0
    for t in range(n):
        d = metric.dist[t]
        order = np.argsort(d, kind="stable")
        dsort = d[order]
        csum = np.cumsum(w[order])
        total = 0.0
        for k in range(n - 1):
            seg = dsort[k + 1] - dsort[k]
            if seg <= 0.0:
                continue
            m = csum[k]
            if m <= 0.0:
                return np.inf
            if m >= 1.0:
                continue
            total += seg * math.sqrt(math.log(1.0 / m))
        if total > best:
            best = total
    return best


def _ft_value_batch(metric: FiniteMetric, W: np.ndarray) -> np.ndarray:
    """ft_value for many measures at once (rows of W); used by grid search."""
    m, n = W.shape
    if n <= 1 or metric.diam <= 0.0:
        return np.zeros(m)
    F = np.zeros(m)
    for t in range(n):
        d = metric.dist[t]
        order = np.argsort(d, kind="stable")
        dsort = d[order]
        segs = np.diff(dsort)
        M = np.cumsum(W[:, order], axis=1)[:, :-1]
        vals = np.zeros(m)
        for k in range(n - 1):
            if segs[k] <= 0.0:
                continue
            mk = M[:, k]
            bad = mk <= 0.0
            good = (~bad) & (mk < 1.0)
            contrib = np.zeros(m)
            contrib[good] = segs[k] * np.sqrt(np.log(1.0 / mk[good]))
            contrib[bad] = np.inf
            vals += contrib
        F = np.maximum(F, vals)
    return F


def ft_grid_search(metric: FiniteMetric, step: float = 0.02):
    """Dense simplex grid search for |T| <= 4: returns
    (best weights, best value) over all measures with coordinates on the
    given grid step."""
    n = metric.dist.shape[0]
    if n > 4:
        raise TooLarge("grid search limited to |T| <= 4")
    k = int(round(1.0 / step))
    combos = combinations(range(k + n - 1), n - 1)
    rows = []
    for c in combos:
        prev = -1
        parts = []
        for x in c:
            parts.append(x - prev - 1)
            prev = x
        parts.append(k + n - 2 - prev)
        rows.append(parts)
    W = np.asarray(rows, dtype=float) / k
    F = _ft_value_batch(metric, W)
    i = int(np.argmin(F))
    return W[i].copy(), float(F[i])


def _ft_subgradient(metric: FiniteMetric, w: np.ndarray) -> np.ndarray:
    """Subgradient of ft_value at w through the lowest-index maximizing t."""
    n = w.shape[0]
    per_t = np.zeros(n)
    orders = []
    for t in range(n):
        d = metric.dist[t]
        order = np.argsort(d, kind="stable")
        orders.append(order)
        dsort = d[order]
        csum = np.cumsum(w[order])
        total = 0.0
        for k in range(n - 1):
            seg = dsort[k + 1] - dsort[k]
            if seg <= 0.0:
                continue
            m = csum[k]
            if m <= 0.0:
                total = np.inf
                break
            if m >= 1.0:
                continue
            total += seg * math.sqrt(math.log(1.0 / m))
        per_t[t] = total
    tstar = int(np.argmax(per_t))
    order = orders[tstar]
    d = metric.dist[tstar]
    dsort = d[order]
    csum = np.cumsum(w[order])
    coeff = np.zeros(n)
    for k in range(n - 1):
        seg = dsort[k + 1] - dsort[k]
        if seg <= 0.0:
            continue
        m = csum[k]
        if m <= 0.0 or m >= 1.0:
            continue
        c = -seg / (2.0 * m * math.sqrt(math.log(1.0 / m)))
        coeff[k] = max(c, -GRAD_CAP)
    # u in ball k  <=>  position(u) <= k, so g[order[j]] = sum_{k >= j} coeff[k]
    tail = np.cumsum(coeff[::-1])[::-1]
    g = np.zeros(n)
    g[order] = tail
    return g


def ft_optimize(metric: FiniteMetric, budget: int = 200, seed: int = 0,
                restarts: int = 8, floor: float = 1e-8):
    """Mirror-descent minimization of ft_value over the simplex.

    Atom floor keeps iterates away from the +infinity cliff; the reported
    value is a plain ft_value of the returned measure (an upper bound on the
    infimum; exact only where symmetry pins the optimum). Restart 0 starts
    uniform; best-of selection is by (value, restart index).
    """
    n = metric.dist.shape[0]
    if n == 0:
        raise BadParams("empty metric")
    if n == 1:
        return MeasureOnT(weights=np.array([1.0]), floor=floor), 0.0
    budget = max(int(budget), 1)
    best_val = np.inf
    best_w = None
    for r in range(max(int(restarts), 1)):
        if r == 0:
            w = np.full(n, 1.0 / n)
        else:
            rng = substream(seed, FT_STREAM, r)
            x = rng.gamma(1.0, 1.0, size=n)
            w = x / x.sum()
            w = np.clip(w, floor, None)
            w /= w.sum()
        val = ft_value(metric, MeasureOnT(weights=w))
        eta = 0.5
        for _ in range(budget):
            g = _ft_subgradient(metric, w)
            scale = max(float(np.abs(g).max()), 1e-12)
            cand = w * np.exp(-eta * g / scale)
            cand = np.clip(cand, floor, None)
            cand /= cand.sum()
            cval = ft_value(metric, MeasureOnT(weights=cand))
            if cval < val:
                w, val = cand, cval
                eta = min(eta * 1.2, 4.0)
            else:
                eta *= 0.5
                if eta < 1e-10:
                    break
        if val < best_val:
            best_val = val
            best_w = w
    mu = MeasureOnT(weights=best_w, floor=floor)
    return mu, float(ft_value(metric, mu))


# ---------------------------------------------------------------------------
# capped partition chains

def _partitions_upto(n: int, max_blocks: int):
    """All set partitions of range(n) into at most max_blocks blocks,
    as restricted growth strings."""
    out = []

    def rec(i, code, used):
        if i == n:
            out.append(tuple(code))
            return
        for b in range(min(used + 1, max_blocks)):
            code.append(b)
            rec(i + 1, code, max(used, b + 1))
            code.pop()

    rec(0, [], 0)
    return out


def _block_diams(metric: FiniteMetric, codes) -> np.ndarray:
    n = metric.dist.shape[0]
    out = np.empty((len(codes), n))
    for i, code in enumerate(codes):
        code = np.asarray(code)
        for b in np.unique(code):
            members = np.nonzero(code == b)[0]
            sub = metric.dist[np.ix_(members, members)]
            out[i, members] = sub.max() if members.size > 1 else 0.0
    return out


def gamma2_part_exact(metric: FiniteMetric, level0_cap: int) -> float:
    """Exact minimum of sup_t sum_n 2^(n/2) diam(A_n(t)) over independent
    partition chains with per-level cell caps 2^(2^n) (level 0 configurable).

    Levels whose cap reaches |T| contribute 0 through singleton partitions,
    so for |T| <= 8 only levels 0 and 1 need enumeration.
    """
    n = metric.dist.shape[0]
    if n > 8:
        raise TooLarge("exhaustive enumeration limited to |T| <= 8")
    if level0_cap not in (1, 2):
        raise BadParams("level0_cap must be 1 or 2")
    if n <= 1:
        return 0.0
    if n <= level0_cap:
        return 0.0
    v0 = _block_diams(metric, _partitions_upto(n, level0_cap))
    v1 = _block_diams(metric, _partitions_upto(n, min(4, n)))
    return _gamma_min(v0, v1)


def _gamma_min(v0: np.ndarray, v1: np.ndarray) -> float:
    tot = v0[:, None, :] + math.sqrt(2.0) * v1[None, :, :]
    return float(tot.max(axis=2).min())


# ---------------------------------------------------------------------------
# Gibbs penalty and penalized envelope integral

def psi_gibbs(metric: FiniteMetric, mu: MeasureOnT, x: int, alpha: float) -> float:
    """-log sum_y mu(y) exp(-d(x, y)^2 / alpha^2), log-sum-exp stabilized."""
    if alpha <= 0.0:
        raise BadParams("alpha must be positive")
    w = mu.weights
    m = w > 0.0
    if not np.any(m):
        raise BadParams("measure has empty support")
    expo = np.log(w[m]) - (metric.dist[x, m] ** 2) / (alpha * alpha)
    M = float(expo.max())
    return float(-(M + math.log(np.exp(expo - M).sum())))


def penalized_functional(radii, values) -> float:
    """Integral over alpha in (0, infinity) of min_k (y_k^2 + r_k^2/alpha^2)
    for a nonincreasing right-continuous step function y with y(diam) = 0,
    given as breakpoints (radii, values). Piecewise closed form.
    """
    r = np.asarray(radii, dtype=float)
    y = np.asarray(values, dtype=float)
    if r.ndim != 1 or r.shape != y.shape or r.size == 0:
        raise MalformedStep("radii and values must be equal-length nonempty vectors")
    if r[0] != 0.0:
        raise MalformedStep("first breakpoint must be r = 0")
    if np.any(np.diff(r) <= 0.0) and r.size > 1:
        raise MalformedStep("radii must be strictly increasing")
    if np.any(np.diff(y) > 0.0):
        raise MalformedStep("values must be nonincreasing")
    if np.any(y < 0.0):
        raise MalformedStep("values must be nonnegative")
    if y[-1] != 0.0:
        raise MalformedStep("value at the last breakpoint must be 0")

    # lines f_k(u) = a_k + b_k u in u = alpha^(-2); lower envelope then
    # exact integration piece by piece in alpha
    a = y * y
    b = r * r
    # deduplicate: for equal slope keep smallest intercept; then drop dominated
    lines = {}
    for ak, bk in zip(a, b):
        if bk not in lines or ak < lines[bk]:
            lines[bk] = ak
    items = sorted(lines.items())  # ascending slope
    pruned = []
    best_a = np.inf
    for bk, ak in items:
        if ak < best_a:
            pruned.append((ak, bk))
            best_a = ak
    # pruned: slopes ascending, intercepts strictly descending
    if len(pruned) == 1:
        ak, bk = pruned[0]
        if ak == 0.0 and bk == 0.0:
            return 0.0
        raise MalformedStep("envelope must end at value 0")
    # envelope stack over u in (0, inf): slopes in DESCENDING order activate
    # as u grows from 0; build with the classic three-line test
    desc = pruned[::-1]
    stack = [desc[0]]
    for ln in desc[1:]:
        while len(stack) >= 2:
            a1, b1 = stack[-2]
            a2, b2 = stack[-1]
            a3, b3 = ln
            # crossing u of (1,3) vs (1,2); pop middle if it never wins
            u13 = (a1 - a3) / (b3 - b1)
            u12 = (a1 - a2) / (b2 - b1)
            if u13 <= u12:
                stack.pop()
            else:
                break
        stack.append(ln)
    # active from u=0 (alpha=inf) is stack[0]; breakpoints in increasing u
    total = 0.0
    # integrate in alpha: alpha decreasing corresponds to u increasing, so
    # walk the stack from the last element (small u <-> large alpha is at the
    # start of the stack). Compute crossings in u between consecutive lines.
    us = []
    for i in range(len(stack) - 1):
        a1, b1 = stack[i]
        a2, b2 = stack[i + 1]
        us.append((a1 - a2) / (b2 - b1))
    # piece i of the stack is active for u in (us[i-1], us[i])
    # in alpha: active for alpha in (1/sqrt(us[i]), 1/sqrt(us[i-1]))
    alphas = [1.0 / math.sqrt(u) for u in us]  # decreasing in i
    for i, (ak, bk) in enumerate(stack):
        hi = math.inf if i == 0 else alphas[i - 1]
        lo = 0.0 if i == len(stack) - 1 else alphas[i]
        if hi <= lo:
            continue
        if hi is math.inf:
            if ak != 0.0:
                raise MalformedStep("unbounded piece with nonzero level")
            total += bk / lo if lo > 0.0 else 0.0
        else:
            total += ak * (hi - lo)
            if bk != 0.0:
                if lo <= 0.0:
                    raise MalformedStep("divergent piece at alpha = 0")
                total += bk * (1.0 / lo - 1.0 / hi)
    return float(total)


def step_function_integral(radii, values) -> float:
    """Integral of the step function y over [0, diam]."""
    r = np.asarray(radii, dtype=float)
    y = np.asarray(values, dtype=float)
    if r.size < 2:
        return 0.0
    return float((y[:-1] * np.diff(r)).sum())
