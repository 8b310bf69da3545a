import math

import numpy as np
import pytest

from mmtlab import (
    BadParams,
    TailNotCertified,
    SnrCurve,
    binary_channel_curve,
    binary_channel_exact,
    binary_mmse_integral,
    channel_curves,
    default_snr_grid,
    generate_instance,
    instance_process,
    integrate_snr_curve,
    least_favorable_search,
    make_prior,
    metric_of,
    mle_point,
    posterior_weights,
    process_from_points,
    sample_observation,
    sqrt_rate_integral,
    tail_smax,
    mse_tail_bound,
    uniform_prior,
    width_two_point_exact,
)

TWO_POINT = np.array([[0.5], [-0.5]])


def test_sample_observation_deterministic():
    emb = process_from_points(TWO_POINT)
    a = sample_observation(emb, uniform_prior(2), 1.5, seed=3)
    b = sample_observation(emb, uniform_prior(2), 1.5, seed=3)
    assert a.x_index == b.x_index
    assert np.array_equal(a.y, b.y)
    assert a.y.shape == (1,)


def test_mle_recovers_at_high_snr():
    emb = process_from_points(np.eye(3) * 2.0)
    for x in range(3):
        y = 50.0 * emb.points[x]  # noiseless high-SNR observation
        assert mle_point(emb, y, 50.0) == x


def test_mle_tie_breaks_to_lowest_index():
    emb = process_from_points(TWO_POINT)
    assert mle_point(emb, np.zeros(1), 0.0) == 0


def test_posterior_at_zero_snr_is_prior():
    emb = process_from_points(np.eye(3))
    prior = make_prior([0.2, 0.3, 0.5])
    w = posterior_weights(emb, prior, np.array([1.0, -2.0, 0.5]), 0.0)
    assert np.allclose(w, prior.weights, atol=1e-12)


def test_posterior_sums_to_one():
    emb = process_from_points(np.eye(4))
    w = posterior_weights(emb, uniform_prior(4), np.array([0.3, 1.0, -0.2, 2.0]), 1.7)
    assert w.min() >= 0.0
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


def test_tail_certificate_two_point():
    smax = tail_smax(2, 1.0, 1.0)
    assert smax == pytest.approx(10.4268, abs=1e-3)
    # at the certified point the bound equals the target fraction of diam
    assert mse_tail_bound(2, 1.0, 1.0, smax) == pytest.approx(1e-6, rel=1e-9)
    assert tail_smax(1, 0.0, np.inf) == 0.0


def test_default_grid_shape():
    g = default_snr_grid(2, 1.0, 1.0)
    assert g[0] == 0.0
    assert g.size == 65
    assert np.all(np.diff(g) > 0.0)
    assert g[-1] == pytest.approx(tail_smax(2, 1.0, 1.0), abs=1e-12)


def test_curves_grid_validation():
    emb = process_from_points(TWO_POINT)
    with pytest.raises(BadParams):
        channel_curves(emb, uniform_prior(2), [0.5, 1.0], 100, 0)
    with pytest.raises(BadParams):
        channel_curves(emb, uniform_prior(2), [0.0, 1.0, 1.0], 100, 0)


def test_singleton_curves_zero():
    emb = process_from_points(np.zeros((1, 2)))
    mse, mmse, mi = channel_curves(emb, uniform_prior(1), [0.0], 100, 0)
    assert mse.values[0] == 0.0
    assert mmse.values[0] == 0.0
    assert mi.values[0] == 0.0


def test_two_point_mse_pathwise_monotone():
    # same draws across the grid: the two-point error event shrinks with s
    emb = process_from_points(TWO_POINT)
    grid = default_snr_grid(2, 1.0, 1.0)
    mse, _, _ = channel_curves(emb, uniform_prior(2), grid, 20000, 11)
    assert np.all(np.diff(mse.values) <= 1e-15)


def test_curves_same_seed_identical():
    emb = process_from_points(TWO_POINT)
    grid = [0.0, 1.0, 3.0]
    a = channel_curves(emb, uniform_prior(2), grid, 5000, 21)
    b = channel_curves(emb, uniform_prior(2), grid, 5000, 21)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)
        assert np.array_equal(x.stderrs, y.stderrs)


def test_mi_bounded_by_entropy():
    inst = generate_instance("cloud", 5, seed=6)
    emb = instance_process(inst)
    met = metric_of(emb)
    grid = default_snr_grid(5, met.diam, met.d_min, points=16)
    _, _, mi = channel_curves(emb, uniform_prior(5), grid, 20000, 2)
    assert mi.values.min() >= -1e-10
    assert mi.values.max() <= math.log(5.0) + 4.0 * mi.stderrs.max() + 1e-9


def test_posterior_resample_doubles_bayes_risk():
    inst = generate_instance("cloud", 4, seed=8)
    emb = instance_process(inst)
    prior = uniform_prior(4)
    met = metric_of(emb)
    D2 = met.dist**2
    hbar = None
    for s in (0.8, 2.5):
        deltas = []
        for i in range(3000):
            smp = sample_observation(emb, prior, s, seed=i)
            w = posterior_weights(emb, prior, smp.y, s)
            resample_d2 = float(w @ D2[smp.x_index])
            mean = w @ emb.points
            pm = float(((emb.points[smp.x_index] - mean) ** 2).sum())
            deltas.append(resample_d2 - 2.0 * pm)
        deltas = np.asarray(deltas)
        se = deltas.std(ddof=1) / math.sqrt(deltas.size)
        assert abs(deltas.mean()) <= 4.0 * se + 1e-12


def test_binary_exact_zero_snr():
    pt = binary_channel_exact(1.0, 0.0)
    assert pt.mmse == pytest.approx(0.25, abs=1e-12)
    assert pt.mi == 0.0
    pt2 = binary_channel_exact(2.0, 0.0)
    assert pt2.mmse == pytest.approx(1.0, abs=1e-12)


def test_binary_mi_saturates():
    pt = binary_channel_exact(1.0, 40.0)
    assert pt.mi == pytest.approx(math.log(2.0), abs=1e-4)


def test_binary_curve_matches_pointwise():
    grid = np.linspace(0.0, 6.0, 31)
    mmse, mi = binary_channel_curve(1.0, grid)
    for k in (0, 7, 19, 30):
        pt = binary_channel_exact(1.0, float(grid[k]))
        assert mmse[k] == pytest.approx(pt.mmse, abs=1e-12)
        assert mi[k] == pytest.approx(pt.mi, abs=5e-6)


def test_binary_i_mmse_spot():
    h = 1e-4
    for s in (0.5, 2.0, 4.0):
        lo = binary_channel_exact(1.0, s - h)
        hi = binary_channel_exact(1.0, s + h)
        mid = binary_channel_exact(1.0, s)
        slope = (hi.mi - lo.mi) / (2.0 * h)
        assert slope == pytest.approx(s * mid.mmse, abs=1e-6)


def test_binary_mmse_integral_scales_linearly():
    a = binary_mmse_integral(0.5)
    b = binary_mmse_integral(2.0)
    assert b == pytest.approx(4.0 * a, rel=1e-9)
    with pytest.raises(BadParams):
        binary_mmse_integral(0.0)


def test_area_identity_exact_curve():
    # closed-form two-point mse curve through the quadrature contract
    grid = default_snr_grid(2, 1.0, 1.0)
    from scipy.special import erfc

    q = 0.5 * erfc(grid * 0.5 / math.sqrt(2.0))
    curve = SnrCurve(grid=grid, values=q, stderrs=np.zeros_like(q),
                     tail_bound=mse_tail_bound(2, 1.0, 1.0, float(grid[-1])))
    est = integrate_snr_curve(curve, (2, 1.0, 1.0))
    exact = width_two_point_exact(1.0)
    assert abs(0.5 * est.value - exact) <= 0.5 * est.error_bound
    assert est.error_bound < 1e-2


def test_integrate_requires_certified_tail():
    curve = SnrCurve(grid=np.array([0.0, 1.0]), values=np.array([1.0, 0.5]),
                     stderrs=np.zeros(2), tail_bound=0.0)
    with pytest.raises(TailNotCertified):
        integrate_snr_curve(curve, (2, 1.0, 1.0))


def test_least_favorable_never_below_uniform():
    inst = generate_instance("cloud", 4, seed=12)
    emb = instance_process(inst)
    met = metric_of(emb)
    base = sqrt_rate_integral(met, uniform_prior(4))
    prior, val = least_favorable_search(emb, "sqrt_rate_integral", 30, seed=5, restarts=2)
    assert val >= base - 1e-12
    assert prior.weights.sum() == pytest.approx(1.0, abs=1e-9)
    prior2, val2 = least_favorable_search(emb, "sqrt_rate_integral", 30, seed=5, restarts=2)
    assert val2 == val
    assert np.array_equal(prior.weights, prior2.weights)


def test_least_favorable_unknown_objective():
    emb = process_from_points(TWO_POINT)
    with pytest.raises(BadParams):
        least_favorable_search(emb, "nope", 10, 0)
