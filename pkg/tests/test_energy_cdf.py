import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from roadharvest.energy_cdf import (
    EmpiricalCdf,
    HypoexpCdf,
    SegmentRates,
    accuracy_metric,
    cgf_and_derivatives,
    empirical_cdf,
    energy_cdf,
    ks_distance,
    rayleigh_cdf,
    saddle_cdf,
    sample_cycle_energy,
    segment_rates,
)
from roadharvest.scenario import Rayleigh, Rician, build_scenario


def phase_type_cdf(lam, x):
    """Sum of exponentials as a phase-type law: F(x) = 1 - e_1 exp(Qx) 1."""
    n = len(lam)
    Q = np.diag(-lam) + np.diag(lam[:-1], 1)
    return np.array([1.0 - expm(Q * xi)[0].sum() for xi in np.atleast_1d(x)])


def test_segment_rates_symmetric(base):
    r = segment_rates(base)
    assert r.L == 8
    np.testing.assert_array_equal(r.lam, r.lam[::-1])
    # innermost segments are the closest ones
    assert r.lam[3] == r.lam.min()


def test_segment_rates_reject_odd(base):
    # bypass validation to get an odd number of harvest slots
    with pytest.raises(ValueError):
        segment_rates(dataclasses.replace(base, ell=1.5))


@pytest.mark.parametrize("ell", [1.0, 3.0, 6.0, 10.0])
def test_hypoexp_matches_phase_type(ell):
    s = build_scenario(ell=ell, fading=Rayleigh())
    rates = segment_rates(s)
    F = HypoexpCdf(rates)
    xs = np.linspace(0.05, 3.0, 12) * rates.mean
    # partial fractions cancel near the origin for L = 20, hence the 1e-9 floor
    np.testing.assert_allclose(F(xs), phase_type_cdf(rates.lam * rates.mean, xs / rates.mean), atol=1e-9)


def test_hypoexp_scale_invariance():
    lam = np.array([3.0, 5.0, 9.0, 9.0, 5.0, 3.0])
    xs = np.linspace(0.01, 3.0, 25)
    a = HypoexpCdf(SegmentRates(lam))(xs)
    b = HypoexpCdf(SegmentRates(lam * 1e4))(xs / 1e4)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_rayleigh_degenerate_falls_back():
    lam = np.array([2.0, 2.0 * (1 + 1e-12), 2.0 * (1 + 1e-12), 2.0])
    with pytest.warns(RuntimeWarning):
        F = rayleigh_cdf(SegmentRates(lam), fallback_draws=20_000)
    assert isinstance(F, EmpiricalCdf)


def test_cgf_derivatives(base):
    rates = segment_rates(base)
    kappa = base.fading.kappa
    K, K1, K2 = cgf_and_derivatives(rates, kappa, 0.0)
    assert K == pytest.approx(0.0, abs=1e-15)
    assert K1 == pytest.approx(rates.mean, rel=1e-12)
    assert K2 == pytest.approx(rates.variance(kappa), rel=1e-12)
    t = 0.3 * rates.lam_hat(kappa).min() / 2
    h = 1e-4 * abs(t)
    Kp, _, _ = cgf_and_derivatives(rates, kappa, t + h)
    Km, _, _ = cgf_and_derivatives(rates, kappa, t - h)
    _, K1t, K2t = cgf_and_derivatives(rates, kappa, t)
    assert (Kp - Km) / (2 * h) == pytest.approx(K1t, rel=1e-6)
    _, K1p, _ = cgf_and_derivatives(rates, kappa, t + h)
    _, K1m, _ = cgf_and_derivatives(rates, kappa, t - h)
    assert (K1p - K1m) / (2 * h) == pytest.approx(K2t, rel=1e-6)


def test_cgf_domain(base):
    rates = segment_rates(base)
    with pytest.raises(ValueError):
        cgf_and_derivatives(rates, 10.0, rates.lam_hat(10.0).min())


def test_saddlepoint_root_solves_cgf_derivative(base):
    F = energy_cdf(base)
    xs = np.linspace(0.2, 3.0, 9) * F.mean
    z = F.saddlepoint(xs)
    _, K1, _ = cgf_and_derivatives(F.rates, F.kappa, z)
    np.testing.assert_allclose(K1, xs, rtol=1e-9)


def test_saddle_continuous_through_mean(base):
    F = energy_cdf(base)
    m = F.mean
    xs = m * (1 + np.array([-1e-4, -2e-6, 0.0, 2e-6, 1e-4]))
    v = F(xs)
    assert np.all(np.diff(v) >= -1e-9)
    assert abs(v[2] - v[1]) < 1e-4 and abs(v[3] - v[2]) < 1e-4


@pytest.mark.parametrize("kappa_db", [6.0, 10.0])
def test_saddle_close_to_monte_carlo(kappa_db):
    s = build_scenario(fading=Rician.from_db(kappa_db))
    ref = empirical_cdf(segment_rates(s), s.fading, 200_000, seed=1)
    approx = energy_cdf(s)
    assert ks_distance(approx, ref) < 0.01
    assert accuracy_metric(approx, ref) < 0.04
    assert accuracy_metric(approx, ref, tail="ccdf") < 0.04


def test_rayleigh_hypoexp_close_to_monte_carlo():
    s = build_scenario(fading=Rayleigh())
    ref = empirical_cdf(segment_rates(s), s.fading, 200_000, seed=2)
    assert ks_distance(energy_cdf(s), ref) < 0.006


def test_sample_mean_and_variance(base, rng):
    rates = segment_rates(base)
    e = sample_cycle_energy(rates, base.fading, 300_000, rng)
    assert e.mean() == pytest.approx(rates.mean, rel=0.005)
    assert e.var() == pytest.approx(rates.variance(base.fading.kappa), rel=0.03)


def test_rayleigh_variance_exceeds_rician(platoon50):
    rates = segment_rates(platoon50)
    assert rates.variance(0.0) > rates.variance(10.0)


def test_accuracy_metric_arguments(base):
    ref = empirical_cdf(segment_rates(base), base.fading, 10_000, seed=0)
    with pytest.raises(ValueError):
        accuracy_metric(energy_cdf(base), ref, tail="both")
    with pytest.raises(ValueError):
        accuracy_metric(energy_cdf(base), ref, reduce="median")
    with pytest.raises(ValueError):
        accuracy_metric(energy_cdf(base), ref, prob_range=(0.2, 0.2))
    with pytest.raises(ValueError):
        empirical_cdf(segment_rates(base), base.fading, 100, seed=0)


def test_accuracy_metric_zero_for_itself(base):
    ref = empirical_cdf(segment_rates(base), base.fading, 10_000, seed=0)
    assert accuracy_metric(ref, ref) == 0.0
    assert accuracy_metric(ref, ref, tail="ccdf", reduce="max") == 0.0


@given(
    lam=st.lists(st.floats(0.5, 50.0), min_size=1, max_size=5),
    kappa=st.floats(0.0, 20.0),
)
def test_saddle_is_a_cdf(lam, kappa):
    lam = np.array(lam + lam[::-1])
    F = saddle_cdf(SegmentRates(lam), kappa)
    xs = np.linspace(0.0, 4.0, 41) * F.mean
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        v = F(xs)
    assert v[0] == 0.0
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(np.diff(v) >= -1e-6)


@given(c=st.floats(1e-3, 1e6))
def test_saddle_scale_invariance(c):
    lam = np.array([2.0, 5.0, 11.0, 11.0, 5.0, 2.0])
    xs = np.array([0.1, 0.5, 1.0, 2.0])
    a = saddle_cdf(SegmentRates(lam), 10.0)(xs)
    b = saddle_cdf(SegmentRates(lam * c), 10.0)(xs / c)
    np.testing.assert_allclose(a, b, atol=1e-9)
