"""Timing and agreement comparison of the two kernel backends.

Runs the per-sample channel kernel and the log-domain scaling kernel with
the numba-compiled implementation and the pure-numpy fallback on identical
inputs, reporting wall time per call and the worst output discrepancy.

Usage: python3 benchmarks/bench_kernels.py [--block 4096] [--grid 65]
       [--repeats 5]
"""
import argparse
import time

import numpy as np

from mmtlab import generate_instance, instance_process, metric_of, uniform_prior
from mmtlab._kernels import (
    HAS_NUMBA,
    _channel_block_impl,
    _channel_block_py,
    _sinkhorn_log_impl,
    _sinkhorn_log_py,
)
from mmtlab.rng import substream


def _workload(block: int, grid_points: int):
    inst = generate_instance("cloud", 8, dim=8, seed=1)
    emb = instance_process(inst)
    met = metric_of(emb)
    pts = emb.points
    G = pts @ pts.T
    sqn = np.diag(G).copy()
    D2 = met.dist**2
    logpi = np.log(uniform_prior(emb.n).weights)
    rng = substream(0, 7, 0)
    X = rng.integers(0, emb.n, size=block)
    Z = rng.standard_normal((block, pts.shape[1]))
    ZH = Z @ pts.T
    s_grid = np.linspace(0.0, 12.0, grid_points)
    lam = 20.0
    logK = logpi[:, None] + logpi[None, :] - lam * D2
    return X, ZH, logpi, G, D2, sqn, s_grid, logK


def _time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--block", type=int, default=4096)
    ap.add_argument("--grid", type=int, default=65)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    X, ZH, logpi, G, D2, sqn, s_grid, logK = _workload(args.block, args.grid)
    bs = X.shape[0]
    logp = logpi.copy()

    impls = {"numpy": (_channel_block_py, _sinkhorn_log_py)}
    if HAS_NUMBA:
        from numba import njit

        impls["numba"] = (njit(cache=True)(_channel_block_impl),
                          njit(cache=True)(_sinkhorn_log_impl))
    else:
        print("numba unavailable (or disabled via MMTLAB_NO_NUMBA); "
              "timing the numpy fallback only")

    results = {}
    outputs = {}
    for name, (chan, sink) in impls.items():
        mle = np.empty(bs)
        pm = np.empty(bs)
        mi = np.empty(bs)

        def sweep():
            for s in s_grid:
                chan(float(s), X, ZH, logpi, G, D2, sqn, mle, pm, mi)

        sweep()  # warm-up (jit compile on the numba path)
        t_chan = _time(sweep, args.repeats)
        sink(logK, logp, 1e-10, 10)  # warm-up
        t_sink = _time(lambda: sink(logK, logp, 1e-12, 2000), args.repeats)
        f, g, iters, residual = sink(logK, logp, 1e-12, 2000)
        results[name] = (t_chan, t_sink)
        outputs[name] = (mle.copy(), pm.copy(), mi.copy(), f.copy(), g.copy())

    print(f"workload: channel {args.grid} SNR values x {bs} samples x 8 points; "
          f"scaling solve to 1e-12 residual (best of {args.repeats})")
    print(f"{'backend':8s} {'channel sweep':>14s} {'scaling solve':>14s}")
    for name, (t_chan, t_sink) in results.items():
        print(f"{name:8s} {t_chan * 1e3:12.2f}ms {t_sink * 1e3:12.2f}ms")

    if len(results) == 2:
        sp_chan = results["numpy"][0] / results["numba"][0]
        sp_sink = results["numpy"][1] / results["numba"][1]
        print(f"speedup  {sp_chan:13.2f}x {sp_sink:13.2f}x")
        worst = 0.0
        for a, b in zip(outputs["numba"], outputs["numpy"]):
            worst = max(worst, float(np.abs(a - b).max()))
        print(f"max |numba - numpy| over all outputs: {worst:.3e}")
        if worst > 1e-9:
            print("BACKEND MISMATCH")
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
