"""Hot numerical kernels with a numba backend and a pure-numpy fallback.

Backend selection: numba is used when importable unless the environment
variable MMTLAB_NO_NUMBA is set to a non-empty value other than "0". Both
backends implement identical arithmetic; results agree to floating-point
reduction-order differences only.

Kernels:
  channel_block   per-sample MLE error, posterior-mean error, and mutual
                  information terms for one SNR value over one sample block
  sinkhorn_log    log-domain iterative proportional fitting on a fixed kernel
"""
from __future__ import annotations

import os

import numpy as np

_want_numba = os.environ.get("MMTLAB_NO_NUMBA", "0") in ("", "0")
try:
    if _want_numba:
        from numba import njit

        HAS_NUMBA = True
    else:
        HAS_NUMBA = False
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# channel statistics

def _channel_block_py(s, X, ZH, logpi, G, D2, sqn, out_mle, out_pm, out_mi):
    rows = np.arange(X.shape[0])
    Gx = G[X]
    scores = s * Gx + ZH - 0.5 * s * sqn[None, :]
    amax = np.argmax(scores, axis=1)
    out_mle[:] = D2[X, amax]

    L = logpi[None, :] + s * (ZH - ZH[rows, X][:, None]) - 0.5 * s * s * D2[X]
    M = L.max(axis=1)
    E = np.exp(L - M[:, None])
    S = E.sum(axis=1)
    out_mi[:] = -(M + np.log(S))
    w = E / S[:, None]
    q = w @ G
    pm = sqn[X] - 2.0 * (w * Gx).sum(axis=1) + (q * w).sum(axis=1)
    out_pm[:] = np.maximum(pm, 0.0)


def _channel_block_impl(s, X, ZH, logpi, G, D2, sqn, out_mle, out_pm, out_mi):
    bs, n = ZH.shape
    L = np.empty(n)
    w = np.empty(n)
    for i in range(bs):
        x = X[i]
        best = -np.inf
        bi = 0
        for u in range(n):
            sc = s * G[x, u] + ZH[i, u] - 0.5 * s * sqn[u]
            if sc > best:
                best = sc
                bi = u
        out_mle[i] = D2[x, bi]

        zx = ZH[i, x]
        M = -np.inf
        for u in range(n):
            lu = logpi[u] + s * (ZH[i, u] - zx) - 0.5 * s * s * D2[x, u]
            L[u] = lu
            if lu > M:
                M = lu
        ssum = 0.0
        for u in range(n):
            w[u] = np.exp(L[u] - M)
            ssum += w[u]
        out_mi[i] = -(M + np.log(ssum))
        for u in range(n):
            w[u] /= ssum
        # ||h_x - posterior mean||^2 through the Gram matrix only
        acc = sqn[x]
        for u in range(n):
            qu = 0.0
            for v in range(n):
                qu += w[v] * G[u, v]
            acc += w[u] * (qu - 2.0 * G[x, u])
        out_pm[i] = acc if acc > 0.0 else 0.0


# ---------------------------------------------------------------------------
# log-domain iterative proportional fitting

def _sinkhorn_log_py(logK, logp, tol, max_iter):
    from scipy.special import logsumexp

    n = logp.shape[0]
    f = np.zeros(n)
    g = np.zeros(n)
    p = np.exp(logp)
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        f = logp - logsumexp(logK + g[None, :], axis=1)
        g = logp - logsumexp(logK + f[:, None], axis=0)
        P = np.exp(logK + f[:, None] + g[None, :])
        r = np.abs(P.sum(axis=1) - p).sum()
        c = np.abs(P.sum(axis=0) - p).sum()
        residual = max(r, c)
        if residual <= tol:
            return f, g, it, residual
    return f, g, it, residual


def _sinkhorn_log_impl(logK, logp, tol, max_iter):
    n = logp.shape[0]
    f = np.zeros(n)
    g = np.zeros(n)
    p = np.exp(logp)
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        for i in range(n):
            M = -np.inf
            for j in range(n):
                v = logK[i, j] + g[j]
                if v > M:
                    M = v
            ssum = 0.0
            for j in range(n):
                ssum += np.exp(logK[i, j] + g[j] - M)
            f[i] = logp[i] - (M + np.log(ssum))
        for j in range(n):
            M = -np.inf
            for i in range(n):
                v = logK[i, j] + f[i]
                if v > M:
                    M = v
            ssum = 0.0
            for i in range(n):
                ssum += np.exp(logK[i, j] + f[i] - M)
            g[j] = logp[j] - (M + np.log(ssum))
        r = 0.0
        c = 0.0
        for i in range(n):
            rs = 0.0
            cs = 0.0
            for j in range(n):
                rs += np.exp(logK[i, j] + f[i] + g[j])
                cs += np.exp(logK[j, i] + f[j] + g[i])
            r += abs(rs - p[i])
            c += abs(cs - p[i])
        residual = r if r > c else c
        if residual <= tol:
            return f, g, it, residual
    return f, g, it, residual


if HAS_NUMBA:
    _channel_block_nb = njit(cache=True)(_channel_block_impl)
    _sinkhorn_log_nb = njit(cache=True)(_sinkhorn_log_impl)

    def channel_block(s, X, ZH, logpi, G, D2, sqn, out_mle, out_pm, out_mi):
        _channel_block_nb(s, X, ZH, logpi, G, D2, sqn, out_mle, out_pm, out_mi)

    def sinkhorn_log(logK, logp, tol, max_iter):
        return _sinkhorn_log_nb(logK, logp, float(tol), int(max_iter))

else:
    def channel_block(s, X, ZH, logpi, G, D2, sqn, out_mle, out_pm, out_mi):
        _channel_block_py(s, X, ZH, logpi, G, D2, sqn, out_mle, out_pm, out_mi)

    def sinkhorn_log(logK, logp, tol, max_iter):
        return _sinkhorn_log_py(logK, logp, float(tol), int(max_iter))
