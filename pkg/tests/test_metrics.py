import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from roadharvest.energy_cdf import energy_cdf
from roadharvest.metrics import (
    _quanta_integrals,
    efficiency,
    energy_density,
    psi_general,
    psi_platoon,
    psi_poisson,
    throughput,
)
from roadharvest.scenario import Platoon, Poisson, build_scenario, decoding_probability

KS = np.array([0, 25, 50, 75, 100])


def test_psi_general_matches_poisson_closed_form(poisson50):
    cdf = energy_cdf(poisson50)
    mu = poisson50.traffic.mu
    a = psi_poisson(KS, cdf, mu, poisson50)
    b = psi_general(KS, cdf, poisson50.traffic.cdf, poisson50)
    np.testing.assert_allclose(a, b, atol=1e-6)


@pytest.mark.parametrize("d0", [30.0, 50.0, 100.0, 150.0])
def test_psi_general_matches_platoon_closed_form(d0):
    s = build_scenario(traffic=Platoon(d0))
    cdf = energy_cdf(s)
    a = psi_platoon(KS, cdf, d0, s)
    b = psi_general(KS, cdf, s.traffic.cdf, s, breakpoints=(d0,))
    np.testing.assert_allclose(a, b, atol=1e-5)


def test_psi_shifted_exponential_is_finite(base):
    tr = Poisson(1 / 50, d_min=10.0)
    s = base.with_(traffic=tr)
    psi = psi_general(None, energy_cdf(s), tr.cdf, s, breakpoints=(tr.d_min,))
    assert np.all(np.isfinite(psi)) and np.all(np.diff(psi) >= -1e-9)


def test_psi_platoon_short_gap(platoon50):
    s = platoon50.with_(ell=30.0)
    assert np.all(psi_platoon(KS, energy_cdf(s), 50.0, s) == 0.0)


@pytest.mark.parametrize("traffic", [Poisson(1 / 50), Platoon(50.0), Platoon(120.0)])
def test_psi_bounds(traffic):
    s = build_scenario(traffic=traffic)
    res = throughput(s)
    d = s.derived
    assert np.all(res.psi >= -1e-12)
    assert np.all(np.diff(res.psi) >= -1e-9)  # more stored energy never hurts
    mean_tp = (traffic.mean_distance - 2 * s.ell) / d.slot_length if isinstance(traffic, Platoon) else math.inf
    assert np.all(res.psi <= mean_tp + 1e-9)


def test_psi_k_range(base):
    with pytest.raises(ValueError):
        psi_poisson([101], energy_cdf(base), 0.02, base)


def test_quanta_integrals_polynomial():
    limits = np.array([0.0, 0.5, 3.0, 7.25, 10.0])
    got = _quanta_integrals(lambda u: u**2 + 1.0, limits, 1e-10)
    np.testing.assert_allclose(got, limits**3 / 3 + limits, rtol=1e-13)


def test_quanta_integrals_kink_uses_fallback():
    # |u - 2.3| has a kink inside a cell; both paths must agree with the exact value
    limits = np.array([1.0, 2.3, 4.0, 4.5])
    got = _quanta_integrals(lambda u: np.abs(u - 2.3), limits, 1e-9)
    exact = [integrate.quad(lambda u: abs(u - 2.3), 0, a, points=[2.3])[0] for a in limits]
    np.testing.assert_allclose(got, exact, atol=1e-8)
    with pytest.raises(ValueError):
        _quanta_integrals(lambda u: u, np.array([-1.0]), 1e-9)


def test_throughput_identity(base):
    res = throughput(base)
    expect = decoding_probability(base) * base.v0 / 50.0 * float(res.pi.values @ res.psi)
    assert res.theta_pkt == pytest.approx(expect, rel=1e-14)
    assert res.theta_kbit == pytest.approx(res.theta_pkt * base.S / 1e3)
    assert res.p_hat_B.values.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("alpha", [2.0, 2.5, 3.0, 4.0])
def test_energy_density_against_quadrature(alpha):
    s = build_scenario(alpha=alpha)
    # average over a uniform vehicle position: (Pv / E[d]) * int (w^2 + x^2)^(-alpha/2) dx
    val, _ = integrate.quad(lambda x: (s.w_off**2 + x**2) ** (-alpha / 2), -np.inf, np.inf)
    assert energy_density(s) == pytest.approx(s.Pv / s.traffic.mean_distance * val, rel=1e-9)


def test_efficiency(base):
    res = throughput(base)
    eff = efficiency(base, res)
    assert eff.upsilon == pytest.approx(base.S * res.theta_pkt / eff.epsilon)
    assert efficiency(base, res.theta_pkt).upsilon == eff.upsilon


def test_capacity_scaling(base):
    # scaling every power by the same factor leaves quanta and SNR unchanged
    s2 = base.with_(Pv=base.Pv * 2, Pt=base.Pt * 2, G=base.G * 2, N0=base.N0 * 2)
    a, b = throughput(base), throughput(s2)
    assert b.theta_pkt == pytest.approx(a.theta_pkt, rel=1e-9)


@settings(max_examples=15)
@given(ell=st.integers(1, 10), d0=st.sampled_from([25.0, 50.0, 100.0]))
def test_throughput_nonnegative_and_bounded(ell, d0):
    s = build_scenario(traffic=Platoon(d0), ell=float(ell))
    res = throughput(s)
    # at most one packet per transmit slot, one cycle every d0 / v0 seconds
    n_tp = max(d0 - 2 * s.ell, 0.0) // s.derived.slot_length
    assert 0.0 <= res.theta_pkt <= decoding_probability(s) * n_tp * s.v0 / d0 + 1e-12
