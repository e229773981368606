import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roadharvest.scenario import (
    BASELINE,
    Platoon,
    Poisson,
    Rayleigh,
    Rician,
    ScenarioError,
    build_scenario,
    dbm_to_watt,
    decoding_probability,
)


def test_defaults_derived(base):
    d = base.derived
    assert d.E_tx == pytest.approx(4e-6)
    assert d.N_s == 100
    assert d.L == 8
    assert d.slot_length == 1.0
    assert d.W == pytest.approx(108.0)
    assert base.N0 == pytest.approx(1e-12, rel=1e-12)
    assert not base.ell_snapped and not base.G_snapped


def test_dbm_conversion():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(-90.0) == pytest.approx(1e-12)


def test_snapping():
    s = build_scenario(ell=4.3)
    assert s.ell == 4.0 and s.ell_requested == 4.3 and s.ell_snapped
    s = build_scenario(Pt=60e-6)
    # 400 uJ holds 66 packets of 6 uJ
    assert s.derived.N_s == 66
    assert s.G == pytest.approx(396e-6)
    assert s.G_snapped


def test_with_keeps_requested_values():
    s = build_scenario(ell=4.3).with_(Pt=20e-6)
    assert s.ell_requested == 4.3
    assert s.Pt == 20e-6


@pytest.mark.parametrize(
    "field,value",
    [("Pt", -1.0), ("T", 0.0), ("eta", 1.5), ("alpha", 1.0), ("S", math.nan), ("G", 1e-7), ("ell", 0.2)],
)
def test_validation_names_field(field, value):
    with pytest.raises(ScenarioError) as exc:
        build_scenario(**{field: value})
    assert exc.value.field_name == field


def test_unknown_parameter():
    with pytest.raises(ScenarioError):
        build_scenario(bogus=1.0)


def test_traffic_models():
    with pytest.raises(ScenarioError):
        Poisson(0.0)
    with pytest.raises(ScenarioError):
        Platoon(-1.0)
    p = Poisson(0.1, d_min=2.0)
    assert p.mean_distance == pytest.approx(12.0)
    assert p.cdf(2.0) == 0.0
    assert p.cdf(12.0) == pytest.approx(1 - math.exp(-1))
    assert Platoon(30.0).cdf(29.9) == 0.0 and Platoon(30.0).cdf(30.0) == 1.0


@pytest.mark.parametrize("fading", [Rician.from_db(10.0), Rician.from_db(0.0), Rayleigh()])
def test_fading_moments(fading, rng):
    g = fading.power_gain(400_000, rng)
    k = fading.kappa
    assert g.mean() == pytest.approx(1.0, abs=0.01)
    assert g.var() == pytest.approx((1 + 2 * k) / (1 + k) ** 2, rel=0.03)


def test_decoding_probability_against_monte_carlo(base, rng):
    # Rayleigh link: decode iff |h|^2 Pt r^-alpha / N0 exceeds 2^(S/(B T)) - 1
    thr = 2 ** (base.S / (base.B * base.T)) - 1
    snr = rng.exponential(size=400_000) * base.Pt * base.r ** -base.alpha / base.N0
    assert decoding_probability(base) == pytest.approx(np.mean(snr >= thr), abs=3e-3)


@given(S=st.floats(100, 10_000), Pt=st.floats(1e-6, 1e-3))
def test_decoding_monotone(S, Pt):
    s = build_scenario(S=S, Pt=Pt, G=1.0)
    assert 0.0 <= s.phi_s <= 1.0
    assert build_scenario(S=S * 1.1, Pt=Pt, G=1.0).phi_s <= s.phi_s
    assert build_scenario(S=S, Pt=Pt * 1.1, G=1.0).phi_s >= s.phi_s


@given(ell=st.floats(0.5, 30.0))
def test_snapped_ell_is_even_lattice(ell):
    s = build_scenario(ell=ell)
    L = 2 * s.ell / s.derived.slot_length
    assert abs(L - round(L)) < 1e-9 and round(L) % 2 == 0 and L >= 2
    assert abs(s.ell - ell) <= 0.5 * s.derived.slot_length + 1e-9


def test_table_is_not_mutated():
    build_scenario(Pt=1e-5)
    assert BASELINE["Pt"] == 40e-6
