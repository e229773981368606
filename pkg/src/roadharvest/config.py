"""Parameter records in presentation units and their INI representation.

Users and recipe files speak in the units results are usually quoted in
(metres, microwatts, kbit, microjoules, dBm, milliseconds). Values are kept
as the strings they were given in until :func:`scenario_from_params`
converts them, so echoing a resolved record and reading it back reproduces
the exact same floating-point scenario.
"""
from __future__ import annotations

import configparser
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

from .scenario import Platoon, Poisson, Rayleigh, Rician, Scenario, ScenarioError, build_scenario, dbm_to_watt

__all__ = [
    "PARAMS",
    "DEFAULTS",
    "parse_number",
    "parse_list",
    "parse_traffic",
    "parse_fading",
    "format_traffic",
    "format_fading",
    "scenario_from_params",
    "to_si",
    "read_ini",
]

# name -> (Scenario field, unit, divisor to SI; negative marks a dB quantity)
PARAMS: dict[str, tuple[str, str, float]] = {
    "r": ("r", "m", 1.0),
    "w_off": ("w_off", "m", 1.0),
    "T": ("T", "ms", 1e3),
    "v0": ("v0", "m/s", 1.0),
    "Pt": ("Pt", "uW", 1e6),
    "Pv": ("Pv", "mW", 1e3),
    "N0": ("N0", "dBm", -1.0),
    "alpha": ("alpha", "", 1.0),
    "eta": ("eta", "", 1.0),
    "B": ("B", "kHz", 1e-3),
    "S": ("S", "kbit", 1e-3),
    "G": ("G", "uJ", 1e6),
    "ell": ("ell", "m", 1.0),
}

DEFAULTS: dict[str, str] = {
    "r": "200",
    "w_off": "5",
    "T": "100",
    "v0": "10",
    "Pt": "40",
    "Pv": "100",
    "N0": "-90",
    "alpha": "3",
    "eta": "0.5",
    "B": "15",
    "S": "1",
    "G": "400",
    "ell": "4",
    "traffic": "poisson:1/50",
    "fading": "rician:10",
}


def parse_number(text: str, name: str = "value") -> float:
    """Float or exact fraction such as ``1/50``."""
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ScenarioError(f"{name}: cannot parse {text!r} as a number", name) from None


def parse_list(text: str, name: str = "value") -> list[str]:
    """Comma separated items, or ``start:stop[:step]`` (inclusive) for numbers."""
    text = str(text).strip()
    if ":" in text and "," not in text and not text[0].isalpha():
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ScenarioError(f"{name}: range must be start:stop[:step], got {text!r}", name)
        start, stop = Fraction(parts[0]), Fraction(parts[1])
        step = Fraction(parts[2]) if len(parts) == 3 else Fraction(1)
        if step <= 0 or stop < start:
            raise ScenarioError(f"{name}: empty or descending range {text!r}", name)
        out, v = [], start
        while v <= stop:
            out.append(str(v))
            v += step
        return out
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ScenarioError(f"{name}: empty list", name)
    return items


def parse_traffic(text: str):
    """``poisson:MU`` (vehicles/m, fractions allowed) or ``platoon:D0`` (m)."""
    kind, _, arg = str(text).strip().partition(":")
    kind = kind.lower()
    if kind == "poisson":
        return Poisson(parse_number(arg or "1/50", "mu"))
    if kind == "platoon":
        return Platoon(parse_number(arg or "50", "d0"))
    raise ScenarioError(f"unknown traffic model {text!r} (use poisson:MU or platoon:D0)", "traffic")


def parse_fading(text: str):
    """``rician:KAPPA_DB`` or ``rayleigh``."""
    kind, _, arg = str(text).strip().partition(":")
    kind = kind.lower()
    if kind == "rayleigh":
        return Rayleigh()
    if kind == "rician":
        return Rician.from_db(parse_number(arg or "10", "kappa"))
    raise ScenarioError(f"unknown fading model {text!r} (use rician:KAPPA_DB or rayleigh)", "fading")


def format_traffic(tr) -> str:
    if isinstance(tr, Platoon):
        return f"platoon:{tr.d0:g}"
    return f"poisson:{tr.mu:.12g}"


def format_fading(f) -> str:
    return "rayleigh" if isinstance(f, Rayleigh) else f"rician:{f.kappa_db:.12g}"


def to_si(name: str, text: str) -> float:
    _, _, div = PARAMS[name]
    v = parse_number(text, name)
    if div < 0:
        return dbm_to_watt(v)
    if div < 1:
        return v * round(1.0 / div)  # kHz, kbit: exact integer scaling
    return v / div


def scenario_from_params(params: Mapping[str, str]) -> Scenario:
    """Build a scenario from a presentation-unit record (missing keys take defaults)."""
    merged = dict(DEFAULTS)
    merged.update({k: str(v) for k, v in params.items()})
    unknown = set(merged) - set(PARAMS) - {"traffic", "fading"}
    if unknown:
        name = sorted(unknown)[0]
        raise ScenarioError(f"unknown parameter {name!r}", name)
    raw = {PARAMS[k][0]: to_si(k, v) for k, v in merged.items() if k in PARAMS}
    raw["traffic"] = parse_traffic(merged["traffic"])
    raw["fading"] = parse_fading(merged["fading"])
    return build_scenario(raw)


def read_ini(paths: Iterable[str | Path]) -> configparser.ConfigParser:
    """Read INI files, failing loudly on missing ones."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep parameter names case-sensitive
    for p in paths:
        p = Path(p)
        if not p.is_file():
            raise FileNotFoundError(f"config file not found: {p}")
        cp.read(p, encoding="utf-8")
    return cp
