"""Physical and protocol parameters of the roadside harvesting scenario.

All quantities are SI (metres, seconds, watts, joules, bits, hertz).
:func:`build_scenario` validates a raw parameter record and snaps the
battery capacity and the harvest distance onto the packet/slot lattice the
analysis works on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Union

import numpy as np

__all__ = [
    "Rician",
    "Rayleigh",
    "Poisson",
    "Platoon",
    "Scenario",
    "Derived",
    "ScenarioError",
    "BASELINE",
    "build_scenario",
    "decoding_probability",
    "db_to_linear",
    "dbm_to_watt",
]


class ScenarioError(ValueError):
    """Raised when a parameter record cannot be turned into a valid scenario."""

    def __init__(self, message: str, field_name: str | None = None):
        super().__init__(message)
        self.field_name = field_name


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1e3


# --------------------------------------------------------------------------
# fading models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Rician:
    """Rician fading with linear Rice factor ``kappa`` and unit-mean power gain."""

    kappa: float

    def __post_init__(self):
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise ScenarioError(f"Rice factor must be finite and >= 0, got {self.kappa}", "kappa")

    @classmethod
    def from_db(cls, kappa_db: float) -> "Rician":
        return cls(db_to_linear(kappa_db))

    @property
    def kappa_db(self) -> float:
        return 10.0 * math.log10(self.kappa) if self.kappa > 0 else -math.inf

    def power_gain(self, size, rng: np.random.Generator) -> np.ndarray:
        """Draw i.i.d. samples of ``|h|^2`` (unit mean)."""
        los = math.sqrt(self.kappa / (self.kappa + 1.0))
        sigma = math.sqrt(0.5 / (self.kappa + 1.0))
        re = rng.normal(los, sigma, size)
        im = rng.normal(0.0, sigma, size)
        return re * re + im * im

    @property
    def label(self) -> str:
        return f"rician({self.kappa_db:g}dB)" if self.kappa > 0 else "rician(0)"


@dataclass(frozen=True)
class Rayleigh:
    """Rayleigh fading; ``|h|^2`` is exponential with unit mean."""

    @property
    def kappa(self) -> float:
        return 0.0

    def power_gain(self, size, rng: np.random.Generator) -> np.ndarray:
        return Rician(0.0).power_gain(size, rng)

    @property
    def label(self) -> str:
        return "rayleigh"


FadingModel = Union[Rician, Rayleigh]


# --------------------------------------------------------------------------
# traffic models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Poisson:
    """Poisson vehicle arrivals: exponential gaps with intensity ``mu`` [1/m].

    ``d_min`` shifts the gap distribution to forbid unrealistically short
    headways; the default of zero is the plain exponential.
    """

    mu: float
    d_min: float = 0.0

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ScenarioError(f"mu must be positive, got {self.mu}", "mu")
        if not self.d_min >= 0:
            raise ScenarioError(f"d_min must be >= 0, got {self.d_min}", "d_min")

    name = "poisson"

    @property
    def mean_distance(self) -> float:
        return self.d_min + 1.0 / self.mu

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y > self.d_min, -np.expm1(-self.mu * (y - self.d_min)), 0.0)

    def sample_gaps(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.d_min + rng.exponential(1.0 / self.mu, n)


@dataclass(frozen=True)
class Platoon:
    """Platooning: every inter-vehicle distance equals ``d0`` [m]."""

    d0: float

    def __post_init__(self):
        if not (self.d0 > 0 and math.isfinite(self.d0)):
            raise ScenarioError(f"d0 must be positive, got {self.d0}", "d0")

    name = "platoon"

    @property
    def mean_distance(self) -> float:
        return self.d0

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y >= self.d0, 1.0, 0.0)

    def sample_gaps(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, self.d0)


TrafficModel = Union[Poisson, Platoon]


# --------------------------------------------------------------------------
# scenario
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Derived:
    """Quantities every other module derives from a :class:`Scenario`."""

    E_tx: float
    N_s: int
    L: int
    m: float
    slot_length: float  # v0*T, metres travelled per slot
    ell: float

    @property
    def N_H(self) -> int:
        return self.L

    @property
    def W(self) -> float:
        return self.R(self.N_s)

    def R(self, k):
        return 2.0 * self.ell + np.asarray(k) * self.slot_length

    def delta(self, k):
        return (self.N_s - np.asarray(k)) * self.E_tx


@dataclass(frozen=True)
class Scenario:
    r: float
    w_off: float
    T: float
    v0: float
    Pt: float
    Pv: float
    N0: float
    alpha: float
    eta: float
    B: float
    S: float
    G: float
    fading: FadingModel
    traffic: TrafficModel
    ell: float
    # what was asked for before snapping onto the slot/packet lattice
    ell_requested: float | None = field(default=None, compare=False)
    G_requested: float | None = field(default=None, compare=False)

    @property
    def derived(self) -> Derived:
        E_tx = self.Pt * self.T
        slot = self.v0 * self.T
        return Derived(
            E_tx=E_tx,
            N_s=int(round(self.G / E_tx)),
            L=int(round(2.0 * self.ell / slot)),
            m=self.Pt / self.v0,
            slot_length=slot,
            ell=self.ell,
        )

    @property
    def phi_s(self) -> float:
        return decoding_probability(self)

    @property
    def ell_snapped(self) -> bool:
        return self.ell_requested is not None and self.ell_requested != self.ell

    @property
    def G_snapped(self) -> bool:
        return self.G_requested is not None and self.G_requested != self.G

    def with_(self, **changes) -> "Scenario":
        """Rebuild with some raw fields changed (goes through validation again)."""
        raw = self.as_raw()
        raw.update(changes)
        return build_scenario(raw)

    def as_raw(self) -> dict[str, Any]:
        raw = {k: getattr(self, k) for k in _NUMERIC_FIELDS}
        raw["fading"] = self.fading
        raw["traffic"] = self.traffic
        if self.ell_requested is not None:
            raw["ell"] = self.ell_requested
        if self.G_requested is not None:
            raw["G"] = self.G_requested
        return raw


_NUMERIC_FIELDS = ("r", "w_off", "T", "v0", "Pt", "Pv", "N0", "alpha", "eta", "B", "S", "G", "ell")

#: Default parameter record (SI units); Rice factor 10 dB, Poisson mu = 1/50.
BASELINE: dict[str, Any] = {
    "r": 200.0,
    "w_off": 5.0,
    "T": 0.1,
    "v0": 10.0,
    "Pt": 40e-6,
    "Pv": 0.1,
    "N0": dbm_to_watt(-90.0),
    "alpha": 3.0,
    "eta": 0.5,
    "B": 15e3,
    "S": 1000.0,
    "G": 400e-6,
    "fading": Rician.from_db(10.0),
    "traffic": Poisson(1.0 / 50.0),
    "ell": 4.0,
}

_LATTICE_TOL = 1e-9


def build_scenario(raw: Mapping[str, Any] | None = None, **overrides) -> Scenario:
    """Validate a parameter record and return the snapped :class:`Scenario`.

    Missing keys default to :data:`BASELINE`. The battery capacity is rounded
    *down* to a whole number of packet energies ``Pt*T``; the harvest distance
    is moved to the nearest value giving an even, integral number of harvest
    slots ``2*ell/(v0*T)``.
    """
    params = dict(BASELINE)
    if raw is not None:
        params.update(raw)
    params.update(overrides)
    unknown = set(params) - set(_NUMERIC_FIELDS) - {"fading", "traffic"}
    if unknown:
        raise ScenarioError(f"unknown parameter(s): {', '.join(sorted(unknown))}", sorted(unknown)[0])

    values = {}
    for name in _NUMERIC_FIELDS:
        try:
            v = float(params[name])
        except (TypeError, ValueError):
            raise ScenarioError(f"parameter {name!r} is not a number: {params[name]!r}", name) from None
        if not math.isfinite(v):
            raise ScenarioError(f"parameter {name!r} must be finite, got {v}", name)
        if v <= 0:
            raise ScenarioError(f"parameter {name!r} must be positive, got {v}", name)
        values[name] = v
    if values["eta"] > 1:
        raise ScenarioError(f"harvesting efficiency eta must lie in (0, 1], got {values['eta']}", "eta")
    if values["alpha"] <= 1:
        raise ScenarioError(f"path-loss exponent alpha must exceed 1, got {values['alpha']}", "alpha")
    fading, traffic = params["fading"], params["traffic"]
    if not isinstance(fading, (Rician, Rayleigh)):
        raise ScenarioError(f"unsupported fading model {fading!r}", "fading")
    if not isinstance(traffic, (Poisson, Platoon)):
        raise ScenarioError(f"unsupported traffic model {traffic!r}", "traffic")

    E_tx = values["Pt"] * values["T"]
    n_s = math.floor(values["G"] / E_tx + _LATTICE_TOL)
    if n_s < 1:
        raise ScenarioError(
            f"battery capacity G={values['G']:g} J cannot hold one packet (E_tx={E_tx:g} J)", "G"
        )
    G = n_s * E_tx
    if abs(G - values["G"]) <= _LATTICE_TOL * values["G"]:
        G = values["G"]

    slot = values["v0"] * values["T"]
    half = values["ell"] / slot  # L/2
    half_int = math.floor(half + 0.5)  # ties round up
    if half_int < 1:
        raise ScenarioError(
            f"empty harvest phase: ell={values['ell']:g} m must be at least half a slot length ({slot / 2:g} m)",
            "ell",
        )
    ell = values["ell"] if abs(half - half_int) <= _LATTICE_TOL * max(1.0, half) else half_int * slot

    values.update(G=G, ell=ell)
    return Scenario(
        **values,
        fading=fading,
        traffic=traffic,
        ell_requested=float(params["ell"]),
        G_requested=float(params["G"]),
    )


def decoding_probability(s: Scenario) -> float:
    """Probability that a packet sent over the Rayleigh EHD-to-AP link is decoded."""
    snr_scale = s.N0 * s.r**s.alpha / s.Pt
    return math.exp(-snr_scale * math.expm1(s.S / (s.B * s.T) * math.log(2.0)))
