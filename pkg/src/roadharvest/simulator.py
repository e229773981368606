"""Slot-level Monte Carlo of the cycle-based harvest/transmit policy.

Vehicles cross ``x_ehd - ell`` at times drawn from the traffic model. Each
crossing starts a cycle: harvest slots with every vehicle frozen at the
midpoint of the segment it covers in that slot, then one transmit slot for
every slot that starts before the next crossing. The battery evolves per
cycle, which is exact because harvesting only ever adds energy and
transmitting only ever removes it.

Two harvesting models are available. :class:`ClosestOnly` credits each cycle
with the full ``L``-slot pass of the vehicle that opened it, even when the
next vehicle arrives before that pass ends; this is the model the analysis
is built on. :class:`AllWithin` is the physical picture: the harvest phase
of a cycle ends when the next vehicle crosses, and every vehicle within the
cutoff contributes in every harvest slot.

Three independent random streams (traffic, fading, decoding) are spawned
from the configuration seed, so toggling energy quantization leaves every
draw unchanged and paired comparisons share their randomness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .scenario import Scenario, decoding_probability

__all__ = [
    "ClosestOnly",
    "AllWithin",
    "SimConfig",
    "SimOutcome",
    "run_simulation",
    "quantization_error",
    "replicate",
]

_EPS = 1e-9
_CHUNK = 1 << 20


@dataclass(frozen=True)
class ClosestOnly:
    """Harvest only from the vehicle that opened the cycle, over its whole pass."""

    label = "closest_only"


@dataclass(frozen=True)
class AllWithin:
    """Harvest from every vehicle within ``cutoff`` metres along the road."""

    cutoff: float = 50.0

    @property
    def label(self) -> str:
        return f"all_within({self.cutoff:g})"


@dataclass(frozen=True)
class SimConfig:
    """Run description.

    ``initial_quanta`` is the battery level at the first crossing, in units
    of ``E_tx``. ``Qs`` sets the black-out threshold in seconds; without it
    no black-outs are tallied.
    """

    scenario: Scenario
    n_cycles: int = 100_000
    seed: int = 0
    harvest_sources: ClosestOnly | AllWithin = field(default_factory=AllWithin)
    quantize_energy: bool = True
    decode_mode: str = "bernoulli"
    Qs: float | None = None
    initial_quanta: float = 0.0

    def __post_init__(self):
        if self.n_cycles < 1:
            raise ValueError(f"n_cycles must be positive, got {self.n_cycles}")
        if self.decode_mode not in ("bernoulli", "expected"):
            raise ValueError(f"decode_mode must be 'bernoulli' or 'expected', got {self.decode_mode!r}")
        if isinstance(self.harvest_sources, AllWithin) and self.harvest_sources.cutoff < self.scenario.ell:
            raise ValueError("harvest cutoff must not be shorter than the harvest distance")
        if not 0 <= self.initial_quanta <= self.scenario.derived.N_s:
            raise ValueError("initial battery level outside [0, N_s]")
        if self.Qs is not None and not self.Qs > 0:
            raise ValueError(f"Qs must be positive, got {self.Qs}")


@dataclass(frozen=True)
class SimOutcome:
    """Tallies of one replication. Energies in joules, times in seconds."""

    n_cycles: int
    delivered_pkts: float
    attempted_pkts: int
    elapsed_s: float
    S: float
    blackout_cycles: int | None
    max_silence_slots: int
    battery_start_hist: np.ndarray
    energy_harvested_J: float
    energy_quantization_loss_J: float
    energy_wasted_overflow_J: float
    energy_consumed_J: float
    initial_battery_J: float
    final_battery_J: float
    cycle_energy_J: np.ndarray = field(repr=False)
    seed: int = 0

    @property
    def throughput_bits_s(self) -> float:
        return self.S * self.delivered_pkts / self.elapsed_s

    @property
    def throughput_pkt_s(self) -> float:
        return self.delivered_pkts / self.elapsed_s

    @property
    def blackout_fraction(self) -> float | None:
        return None if self.blackout_cycles is None else self.blackout_cycles / self.n_cycles

    @property
    def battery_start_pmf(self) -> np.ndarray:
        return self.battery_start_hist / self.battery_start_hist.sum()

    def energy_balance(self) -> float:
        """Residual of the energy conservation identity (zero up to rounding)."""
        stored = self.energy_harvested_J - self.energy_quantization_loss_J
        return stored - self.energy_wasted_overflow_J - self.energy_consumed_J - (
            self.final_battery_J - self.initial_battery_J
        )


def _streams(seed: int):
    traffic, fading, decode = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(traffic), np.random.default_rng(fading), np.random.default_rng(decode)


def _crossings(s: Scenario, n: int, reach: float, rng: np.random.Generator) -> np.ndarray:
    """Crossing times of vehicles ``0..n`` plus enough followers to cover ``reach`` metres."""
    gaps = s.traffic.sample_gaps(n, rng)
    extra = []
    covered = 0.0
    while covered <= reach:
        more = s.traffic.sample_gaps(64, rng)
        extra.append(more)
        covered += more.sum()
    dist = np.concatenate([[0.0], np.cumsum(np.concatenate([gaps, *extra]))])
    return dist / s.v0


def _harvest(s: Scenario, cfg: SimConfig, t: np.ndarray, hp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Energy [J] collected in each cycle's harvest slots."""
    n = cfg.n_cycles
    T, v0, ell = s.T, s.v0, s.ell
    owner = np.repeat(np.arange(n), hp)
    first = np.cumsum(hp) - hp
    slot_in_cycle = np.arange(hp.sum()) - np.repeat(first, hp)
    tau = t[owner] + (slot_in_cycle + 0.5) * T  # slot midpoints

    def pos(idx):
        return -ell + v0 * (tau - t[idx])

    gain_scale = s.eta * T * s.Pv

    def received(x, g):
        return gain_scale * g / (s.w_off**2 + x * x) ** (s.alpha / 2.0)

    x_own = pos(owner)
    e = received(x_own, cfg.scenario.fading.power_gain(x_own.size, rng))
    if isinstance(cfg.harvest_sources, AllWithin):
        cut = cfg.harvest_sources.cutoff
        for sign in (-1, 1):  # vehicles ahead (already past), then vehicles behind
            j = 1
            while True:
                idx = owner + sign * j
                ok = (idx >= 0) & (idx < len(t))
                x = np.where(ok, pos(np.clip(idx, 0, len(t) - 1)), np.inf)
                near = np.abs(x) <= cut
                if not near.any():
                    break
                g = cfg.scenario.fading.power_gain(int(near.sum()), rng)
                e[near] += received(x[near], g)
                j += 1
    return np.bincount(owner, weights=e, minlength=n)


def _bernoulli_stream(rng: np.random.Generator, size: int, p: float) -> np.ndarray:
    out = np.empty(size, dtype=bool)
    for lo in range(0, size, _CHUNK):
        hi = min(size, lo + _CHUNK)
        out[lo:hi] = rng.random(hi - lo, dtype=np.float32) < p
    return out


def _blackouts(success_times: np.ndarray, t: np.ndarray, n: int, end: float, x: int, T: float):
    """Cycles hit by a silent window of at least ``x - 1`` slots, and the longest silence."""
    if success_times.size == 0:
        return n, int(round(end / T))
    bounds = np.concatenate([success_times, [end + 0.5 * T]])
    starts = bounds[:-1] + 0.5 * T  # first silent instant after a success
    stops = bounds[1:] - 0.5 * T
    silent = np.rint((stops - starts) / T).astype(np.int64)
    longest = int(silent.max())
    long_ = silent >= x - 1
    hit = np.zeros(n + 1, dtype=np.int64)
    a = np.searchsorted(t[:n], starts[long_] - _EPS * T, side="left")
    b = np.searchsorted(t[:n], stops[long_] - _EPS * T, side="left")
    spans = b > a
    np.add.at(hit, a[spans], 1)
    np.add.at(hit, b[spans], -1)
    lone = np.searchsorted(t[:n], starts[long_][~spans] + (x - 1) * T - _EPS * T, side="right") - 1
    marked = np.cumsum(hit)[:n] > 0
    marked[lone[(lone >= 0) & (lone < n)]] = True
    return int(marked.sum()), longest


def run_simulation(cfg: SimConfig) -> SimOutcome:
    """Simulate ``cfg.n_cycles`` cycles and tally throughput, energy and black-outs."""
    s = cfg.scenario
    d = s.derived
    n, L, N_s, E_tx, slot = cfg.n_cycles, d.L, d.N_s, d.E_tx, d.slot_length
    r_traffic, r_fading, r_decode = _streams(cfg.seed)

    physical = isinstance(cfg.harvest_sources, AllWithin)
    reach = cfg.harvest_sources.cutoff + s.ell if physical else 2.0 * s.ell
    t = _crossings(s, n, reach + slot, r_traffic)
    gaps = np.diff(t[: n + 1]) * s.v0
    # harvest slots (cut short by the next crossing only in the physical model),
    # then transmit slots that start before the next crossing
    hp = np.minimum(L, np.ceil(gaps / slot - _EPS)).astype(np.int64) if physical else np.full(n, L, dtype=np.int64)
    tp = np.ceil(np.maximum(gaps - 2.0 * s.ell, 0.0) / slot - _EPS).astype(np.int64)

    energy = _harvest(s, cfg, t, hp, r_fading)
    quanta = energy / E_tx
    if cfg.quantize_energy:
        quanta = np.floor(quanta + _EPS)
    q_loss = float((energy / E_tx - quanta).clip(min=0.0).sum()) * E_tx

    phi = float(cfg.initial_quanta)
    n_tx = np.empty(n, dtype=np.int64)
    hist = np.zeros(N_s + 1, dtype=np.int64)
    overflow = consumed = 0.0
    for q in range(n):
        hist[min(int(phi + _EPS), N_s)] += 1
        level = phi + quanta[q]
        if level > N_s:
            overflow += level - N_s
            level = float(N_s)
        k = min(int(tp[q]), int(level + _EPS))
        level = max(level - k, 0.0)
        consumed += k
        if tp[q] > k and level > 0.0:
            # a transmit slot with less than E_tx left empties the battery
            consumed += level
            level = 0.0
        n_tx[q] = k
        phi = level

    phi_s = decoding_probability(s)
    offsets = np.cumsum(tp) - tp
    ok = _bernoulli_stream(r_decode, int(tp.sum()), phi_s)
    slot_k = np.arange(ok.size) - np.repeat(offsets, tp)
    owner = np.repeat(np.arange(n), tp)
    success = ok & (slot_k < np.repeat(n_tx, tp))
    delivered = float(phi_s * n_tx.sum()) if cfg.decode_mode == "expected" else float(success.sum())

    elapsed = float(t[n] - t[0])
    blackout, longest = None, 0
    if cfg.Qs is not None:
        x = int(round(cfg.Qs / s.T))
        idx = np.flatnonzero(success)
        times = t[owner[idx]] + (L + slot_k[idx] + 0.5) * s.T
        blackout, longest = _blackouts(times, t, n, t[n], x, s.T)

    return SimOutcome(
        n_cycles=n,
        delivered_pkts=delivered,
        attempted_pkts=int(n_tx.sum()),
        elapsed_s=elapsed,
        S=s.S,
        blackout_cycles=blackout,
        max_silence_slots=longest,
        battery_start_hist=hist,
        energy_harvested_J=float(energy.sum()),
        energy_quantization_loss_J=q_loss,
        energy_wasted_overflow_J=overflow * E_tx,
        energy_consumed_J=consumed * E_tx,
        initial_battery_J=cfg.initial_quanta * E_tx,
        final_battery_J=phi * E_tx,
        cycle_energy_J=energy,
        seed=cfg.seed,
    )


def quantization_error(cfg: SimConfig) -> float:
    """Relative throughput change caused by rounding harvested energy down to quanta.

    Both runs share ``cfg.seed``. Returns ``nan`` when the continuous run
    delivers nothing.
    """
    quant = run_simulation(_with(cfg, quantize_energy=True))
    cont = run_simulation(_with(cfg, quantize_energy=False))
    if cont.delivered_pkts == 0:
        return math.nan
    return abs(quant.throughput_bits_s - cont.throughput_bits_s) / cont.throughput_bits_s


def _with(cfg: SimConfig, **changes) -> SimConfig:
    from dataclasses import replace

    return replace(cfg, **changes)


_METRICS = ("throughput_bits_s", "blackout_fraction", "energy_harvested_J", "energy_wasted_overflow_J")


def replicate(cfg: SimConfig, n_reps: int, seeds: Sequence[int] | None = None) -> dict[str, tuple[float, float]]:
    """Mean and 95% normal half-width of the main metrics over independent runs.

    Seeds are derived from ``cfg.seed`` unless given explicitly.
    """
    if n_reps < 2:
        raise ValueError("need at least two replications for a confidence interval")
    if seeds is None:
        children = np.random.SeedSequence(cfg.seed).spawn(n_reps)
        seeds = [int(c.generate_state(2, dtype=np.uint64)[0]) for c in children]
    if len(seeds) != n_reps:
        raise ValueError("number of seeds must equal n_reps")
    runs = [run_simulation(_with(cfg, seed=int(sd))) for sd in seeds]
    out = {}
    for name in _METRICS:
        vals = [getattr(r, name) for r in runs]
        if any(v is None for v in vals):
            continue
        v = np.asarray(vals, dtype=float)
        out[name] = (float(v.mean()), float(1.959963984540054 * v.std(ddof=1) / math.sqrt(n_reps)))
    return out
