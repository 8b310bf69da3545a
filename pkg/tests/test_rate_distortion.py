import math

import numpy as np
import pytest

from mmtlab import (
    BadParams,
    coupling_stats,
    distortion_at_rate,
    entropy,
    generate_instance,
    gibbs_coupling,
    instance_process,
    layer_cake_integral,
    make_prior,
    metric_of,
    pareto_trace,
    process_from_points,
    prod_distortion_sq,
    rate_at_distortion,
    sqrt_rate_integral,
    two_point_rd_exact,
    uniform_prior,
)

from rd_oracle import min_rate_grid3

TWO_POINT = np.array([[0.5], [-0.5]])


def _two_point_metric():
    return metric_of(process_from_points(TWO_POINT))


def test_gibbs_lambda_zero_is_product():
    met = _two_point_metric()
    prior = uniform_prior(2)
    c = gibbs_coupling(met, prior, 0.0)
    rate, dist = coupling_stats(c, met, prior)
    assert rate == pytest.approx(0.0, abs=1e-12)
    assert dist == pytest.approx(prod_distortion_sq(met, prior), abs=1e-12)
    assert np.allclose(c.joint, 0.25, atol=1e-12)


def test_gibbs_large_lambda_near_identity():
    met = _two_point_metric()
    prior = uniform_prior(2)
    c = gibbs_coupling(met, prior, 1e4)
    rate, dist = coupling_stats(c, met, prior)
    assert dist < 1e-3
    assert rate == pytest.approx(math.log(2.0), abs=1e-3)


def test_gibbs_unit_lambda_pinned():
    # hand-derived two-point value, frozen before the solver was written
    met = _two_point_metric()
    c = gibbs_coupling(met, uniform_prior(2), 1.0)
    rate, _ = coupling_stats(c, met, uniform_prior(2))
    assert rate == pytest.approx(0.1109440717, abs=1e-9)


def test_gibbs_knee_lambda_converges_tight():
    # regression: alternating scaling alone stalls near this multiplier
    inst = generate_instance("cloud", 5, seed=3)
    met = metric_of(instance_process(inst))
    c = gibbs_coupling(met, uniform_prior(5), 20.1836)
    assert c.marginal_residual <= 1e-10


def test_rate_at_distortion_endpoints():
    met = _two_point_metric()
    prior = make_prior([0.3, 0.7])
    H = entropy(prior)
    assert rate_at_distortion(met, prior, 0.0) == pytest.approx(H, abs=1e-9)
    assert rate_at_distortion(met, prior, met.diam) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(BadParams):
        rate_at_distortion(met, prior, -0.1)


def test_rate_at_distortion_pinned():
    # independently computed from the closed two-point form at r = 0.5
    met = _two_point_metric()
    val = rate_at_distortion(met, uniform_prior(2), 0.5)
    assert val == pytest.approx(0.130812036, abs=1e-8)
    assert val == pytest.approx(two_point_rd_exact(1.0, 0.5, 0.5), abs=1e-9)


def test_rate_matches_closed_form_grid():
    met = _two_point_metric()
    prior = uniform_prior(2)
    for r in np.linspace(0.05, 0.95, 11):
        got = rate_at_distortion(met, prior, float(r))
        want = two_point_rd_exact(1.0, 0.5, float(r))
        assert got == pytest.approx(want, abs=1e-6)


def test_two_point_rd_biased_prior_consistent():
    # closed form at p = 1/2 against the generic-prior grid path just off it
    a = two_point_rd_exact(1.0, 0.5, 0.4)
    b = two_point_rd_exact(1.0, 0.5000001, 0.4)
    assert a == pytest.approx(b, abs=1e-4)


def test_distortion_at_rate_endpoints():
    met = _two_point_metric()
    prior = make_prior([0.3, 0.7])
    H = entropy(prior)
    assert distortion_at_rate(met, prior, H) == pytest.approx(0.0, abs=1e-9)
    assert distortion_at_rate(met, prior, H + 5.0) == 0.0
    assert distortion_at_rate(met, prior, 0.0) == pytest.approx(
        math.sqrt(prod_distortion_sq(met, prior)), abs=1e-9
    )


def test_inverse_consistency():
    inst = generate_instance("cloud", 4, seed=2)
    met = metric_of(instance_process(inst))
    prior = uniform_prior(4)
    for frac in (0.3, 0.6):
        r = frac * met.diam
        A = rate_at_distortion(met, prior, r)
        back = distortion_at_rate(met, prior, A)
        assert back == pytest.approx(r, abs=1e-6 * max(1.0, met.diam))


def test_pareto_trace_shape():
    inst = generate_instance("cloud", 4, seed=5)
    met = metric_of(instance_process(inst))
    prior = uniform_prior(4)
    lams = [0.0, 0.5, 2.0, 10.0, 50.0]
    curve = pareto_trace(met, prior, lams)
    assert curve.entropy_cap == pytest.approx(math.log(4.0), abs=1e-12)
    rates = [p[1] for p in curve.points]
    dists = [p[2] for p in curve.points]
    assert curve.points[-1] == (np.inf, pytest.approx(math.log(4.0)), 0.0)
    assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))
    assert all(b <= a + 1e-9 for a, b in zip(dists, dists[1:]))
    with pytest.raises(BadParams):
        pareto_trace(met, prior, [0.5, 1.0])


def test_singleton_curve():
    met = metric_of(process_from_points(np.zeros((1, 1))))
    prior = uniform_prior(1)
    assert rate_at_distortion(met, prior, 0.0) == 0.0
    assert sqrt_rate_integral(met, prior) == 0.0
    assert layer_cake_integral(met, prior) == 0.0


def test_three_point_against_brute_force():
    # exhaustive coupling search over a discretized polytope, one frozen case
    inst = generate_instance("cloud", 3, seed=7)
    met = metric_of(instance_process(inst))
    prior = uniform_prior(3)
    r = 0.55 * met.diam
    got = rate_at_distortion(met, prior, r)
    ref = min_rate_grid3(met.dist**2, prior.weights.copy(), r * r)
    assert got == pytest.approx(ref, abs=1e-3)


def test_sqrt_rate_integral_two_point_pinned():
    met = _two_point_metric()
    val = sqrt_rate_integral(met, uniform_prior(2))
    assert val == pytest.approx(0.3652357558, abs=3e-4)
    # crude Riemann cross-check on the same closed form
    rs = np.linspace(0.0, 1.0, 4001)
    riemann = np.trapezoid(
        [math.sqrt(two_point_rd_exact(1.0, 0.5, float(r))) for r in rs], rs
    )
    assert val == pytest.approx(riemann, abs=2e-3)


def test_layer_cake_positive_and_bounded():
    inst = generate_instance("cloud", 5, seed=3)
    met = metric_of(instance_process(inst))
    prior = uniform_prior(5)
    z = layer_cake_integral(met, prior)
    assert z > 0.0
    # distortion_at_rate is bounded by sqrt(prod), so the cake is too
    assert z <= 2.0 * math.sqrt(entropy(prior) * prod_distortion_sq(met, prior)) + 1e-9
