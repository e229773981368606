import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roadharvest.energy_cdf import EmpiricalCdf, energy_cdf, ks_distance, segment_rates
from roadharvest.metrics import throughput
from roadharvest.scenario import Platoon, Poisson, build_scenario
from roadharvest.simulator import (
    AllWithin,
    ClosestOnly,
    SimConfig,
    quantization_error,
    replicate,
    run_simulation,
)


def test_deterministic(poisson50):
    cfg = SimConfig(poisson50, n_cycles=5_000, seed=9, Qs=2.0)
    a, b = run_simulation(cfg), run_simulation(cfg)
    assert a.delivered_pkts == b.delivered_pkts
    np.testing.assert_array_equal(a.battery_start_hist, b.battery_start_hist)
    np.testing.assert_array_equal(a.cycle_energy_J, b.cycle_energy_J)
    c = run_simulation(dataclasses.replace(cfg, seed=10))
    assert c.delivered_pkts != a.delivered_pkts


@pytest.mark.parametrize("quantize", [True, False])
@pytest.mark.parametrize("traffic", [Poisson(1 / 25), Platoon(50.0)])
def test_energy_balance(traffic, quantize):
    s = build_scenario(traffic=traffic, ell=5.0)
    out = run_simulation(SimConfig(s, n_cycles=10_000, seed=1, quantize_energy=quantize, initial_quanta=30))
    assert abs(out.energy_balance()) < 1e-12 * max(1.0, out.energy_harvested_J)
    if not quantize:
        assert out.energy_quantization_loss_J == 0.0


@pytest.mark.parametrize("traffic", [Platoon(50.0), Poisson(1 / 50)])
def test_cycle_energy_follows_cdf(traffic):
    s = build_scenario(traffic=traffic)
    out = run_simulation(SimConfig(s, n_cycles=100_000, seed=4, harvest_sources=ClosestOnly()))
    sim = EmpiricalCdf(segment_rates(s), out.cycle_energy_J)
    assert ks_distance(energy_cdf(s), sim) < 0.01


def test_battery_start_matches_stationary_law(poisson50):
    out = run_simulation(SimConfig(poisson50, n_cycles=100_000, seed=5, harvest_sources=ClosestOnly()))
    pi = throughput(poisson50).pi.values
    tv = 0.5 * np.abs(out.battery_start_pmf - pi).sum()
    assert tv < 0.02


@pytest.mark.parametrize("traffic", [Poisson(1 / 50), Platoon(50.0), Platoon(100.0)])
def test_throughput_matches_analysis(traffic):
    s = build_scenario(traffic=traffic)
    cfg = SimConfig(s, n_cycles=50_000, seed=6, harvest_sources=ClosestOnly())
    sim = run_simulation(cfg).throughput_bits_s / 1e3
    assert sim == pytest.approx(throughput(s).theta_kbit, rel=0.03)


def test_expected_decoding_matches_bernoulli(platoon50):
    cfg = SimConfig(platoon50, n_cycles=30_000, seed=2)
    a = run_simulation(cfg)
    b = run_simulation(dataclasses.replace(cfg, decode_mode="expected"))
    assert a.attempted_pkts == b.attempted_pkts
    assert b.delivered_pkts == pytest.approx(a.delivered_pkts, rel=0.01)


def test_default_sources_are_physical(base):
    assert isinstance(SimConfig(base).harvest_sources, AllWithin)


def test_closest_only_harvests_full_pass():
    # gaps shorter than 2*ell: the analytic model still credits every vehicle's full pass
    s = build_scenario(traffic=Platoon(5.0), ell=4.0)
    near = run_simulation(SimConfig(s, n_cycles=2_000, seed=1, harvest_sources=ClosestOnly()))
    assert near.delivered_pkts == 0
    assert near.energy_harvested_J / near.n_cycles == pytest.approx(segment_rates(s).mean, rel=0.02)


def test_all_within_harvests_more():
    s = build_scenario(traffic=Poisson(1 / 20))
    near = run_simulation(SimConfig(s, n_cycles=20_000, seed=8, harvest_sources=ClosestOnly()))
    every = run_simulation(SimConfig(s, n_cycles=20_000, seed=8, harvest_sources=AllWithin(50.0)))
    assert every.energy_harvested_J > near.energy_harvested_J
    assert every.throughput_bits_s >= 0.98 * near.throughput_bits_s
    assert AllWithin(30).label == "all_within(30)" and ClosestOnly().label == "closest_only"


def test_quantization_error_small(platoon50):
    err = quantization_error(SimConfig(platoon50, n_cycles=20_000, seed=7, harvest_sources=ClosestOnly()))
    assert 0.0 <= err < 0.01


def test_replicate_confidence_interval(platoon50):
    stats = replicate(SimConfig(platoon50, n_cycles=10_000, seed=0, harvest_sources=ClosestOnly()), n_reps=8)
    mean, hw = stats["throughput_bits_s"]
    analytic = throughput(platoon50).theta_bits
    assert hw > 0
    assert abs(mean - analytic) < 4 * hw + 0.005 * analytic
    assert "blackout_fraction" not in stats


def test_replicate_half_width_scaling(poisson50):
    cfg = SimConfig(poisson50, n_cycles=2_000, seed=1)
    hw4 = replicate(cfg, 4)["throughput_bits_s"][1]
    hw16 = replicate(cfg, 16)["throughput_bits_s"][1]
    # 1/sqrt(n): a factor of two, loosely since the half-widths are estimates
    assert 1.0 < hw4 / hw16 < 4.0
    assert replicate(cfg, 2, seeds=[5, 5])["throughput_bits_s"][1] == 0.0


def test_replicate_seed_checks(platoon50):
    cfg = SimConfig(platoon50, n_cycles=1_000)
    with pytest.raises(ValueError):
        replicate(cfg, 1)
    with pytest.raises(ValueError):
        replicate(cfg, 3, seeds=[1, 2])


def test_blackout_tally(platoon50):
    s = platoon50.with_(Pt=100e-6)
    out = run_simulation(SimConfig(s, n_cycles=5_000, seed=1, Qs=2.0))
    assert 0 < out.blackout_cycles <= out.n_cycles
    assert out.max_silence_slots >= 19
    assert run_simulation(SimConfig(s, n_cycles=5_000, seed=1)).blackout_fraction is None


def test_config_validation(base):
    with pytest.raises(ValueError):
        SimConfig(base, n_cycles=0)
    with pytest.raises(ValueError):
        SimConfig(base, decode_mode="soft")
    with pytest.raises(ValueError):
        SimConfig(base, harvest_sources=AllWithin(1.0))
    with pytest.raises(ValueError):
        SimConfig(base, initial_quanta=101)
    with pytest.raises(ValueError):
        SimConfig(base, Qs=-1.0)


@settings(max_examples=20)
@given(
    seed=st.integers(0, 2**32),
    ell=st.integers(1, 8),
    mean_gap=st.sampled_from([10.0, 30.0, 80.0]),
    platoon=st.booleans(),
)
def test_invariants(seed, ell, mean_gap, platoon):
    tr = Platoon(mean_gap) if platoon else Poisson(1 / mean_gap)
    s = build_scenario(traffic=tr, ell=float(ell))
    out = run_simulation(SimConfig(s, n_cycles=500, seed=seed, Qs=1.5))
    assert 0 <= out.delivered_pkts <= out.attempted_pkts
    assert out.battery_start_hist.sum() == out.n_cycles
    assert 0.0 <= out.final_battery_J <= s.G * (1 + 1e-12)
    assert abs(out.energy_balance()) < 1e-12 * max(1.0, out.energy_harvested_J)
    assert out.elapsed_s > 0 and math.isfinite(out.throughput_bits_s)
