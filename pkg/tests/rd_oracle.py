"""Brute-force rate minimization for 3-point spaces, independent of the
package solver.

A coupling with both marginals p on 3 atoms has 4 free entries; the
remaining 5 are fixed by the marginal sums. The oracle scans that box on a
staged grid (coarse slack keeps the feasible set populated, the final pass
uses the exact distortion constraint) and refines around the incumbent down
to a 1e-4 step.
"""
import numpy as np
from scipy.special import xlogy

STEPS = (0.0125, 0.0025, 5e-4, 1e-4)
WINDOW = 2.5


def _eval_box(D2, p, lo, hi, step, r_sq, slack):
    axes = [np.arange(lo[i], hi[i] + 0.5 * step, step) for i in range(4)]
    A, B, C, D = np.meshgrid(*axes, indexing="ij")
    A, B, C, D = (x.ravel() for x in (A, B, C, D))
    p0, p1, p2 = p
    R0 = p0 - A - B
    R1 = p1 - C - D
    C0 = p0 - A - C
    C1 = p1 - B - D
    R2 = p2 - C0 - C1
    entries = [A, B, R0, C, D, R1, C0, C1, R2]
    feas = np.ones(A.shape, dtype=bool)
    for e in entries:
        feas &= e >= -1e-12
    d2flat = D2.ravel()
    dist = sum(np.clip(e, 0.0, None) * d2flat[k] for k, e in enumerate(entries))
    feas &= dist <= r_sq + slack
    if not feas.any():
        return None
    H2 = 2.0 * float(-(p * np.log(p)).sum())
    rate = sum(xlogy(np.clip(e[feas], 0.0, None), np.clip(e[feas], 0.0, None))
               for e in entries) + H2
    i = int(np.argmin(rate))
    idx = np.nonzero(feas)[0][i]
    x = np.array([A[idx], B[idx], C[idx], D[idx]])
    return float(rate[i]), x


def min_rate_grid3(D2, p, r_sq):
    """Minimum mutual information over couplings with marginals p and mean
    squared distortion <= r_sq, to about 1e-4 in the decision variables."""
    p = np.asarray(p, dtype=float)
    hi0 = np.array([min(p[0], p[0]), min(p[0], p[1]), min(p[1], p[0]), min(p[1], p[1])])
    lo = np.zeros(4)
    hi = hi0.copy()
    best = None
    for si, step in enumerate(STEPS):
        final = si == len(STEPS) - 1
        slack = 0.0 if final else 4.0 * step * float(D2.max())
        r = _eval_box(D2, p, lo, hi, step, r_sq, slack)
        while r is None and step > 1e-6:
            step *= 0.5
            slack = 0.0 if final else 4.0 * step * float(D2.max())
            r = _eval_box(D2, p, lo, hi, step, r_sq, slack)
        assert r is not None, "no feasible coupling found on the grid"
        best, x = r
        w = WINDOW * step
        lo = np.maximum(x - w, 0.0)
        hi = np.minimum(x + w, hi0)
    return best
