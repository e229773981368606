"""Parameter grids, harvest-distance optimisation and figure data.

A :class:`SweepSpec` is a base scenario plus lists of values for the axes
that vary. Points are evaluated in a fixed order (traffic, fading, G, Pt,
S, ell with ell innermost) and optionally in worker processes; results are
always returned in grid order, so a sweep is a pure function of its spec.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .blackout import blackout_probability, blackout_query
from .energy_cdf import accuracy_metric, empirical_cdf, energy_cdf, segment_rates
from .metrics import efficiency, throughput
from .scenario import Platoon, Poisson, Rician, Scenario, ScenarioError
from .simulator import AllWithin, ClosestOnly, SimConfig, replicate, run_simulation

__all__ = [
    "SimSettings",
    "SweepSpec",
    "SweepRow",
    "Optimum",
    "UncertaintyRow",
    "TradeoffResult",
    "run_sweep",
    "optimal_ell",
    "optima",
    "price_of_uncertainty",
    "tradeoff_table",
    "accuracy_table",
    "quantization_table",
    "write_csv",
]

OUTPUTS = ("theta", "upsilon", "pbo", "sim_validation")


def _both_sources() -> tuple:
    return (ClosestOnly(), AllWithin(50.0))


@dataclass(frozen=True)
class SimSettings:
    """Simulation attached to a sweep.

    Each point is simulated once per entry of ``harvest_sources`` (at most
    one of each kind), with the same seed so the runs share their traffic.
    """

    n_cycles: int = 100_000
    seed: int = 0
    harvest_sources: tuple = field(default_factory=_both_sources)
    reps: int = 1

    def __post_init__(self):
        src = self.harvest_sources
        src = (src,) if isinstance(src, (ClosestOnly, AllWithin)) else tuple(src)
        kinds = [type(s) for s in src]
        if not src or len(set(kinds)) != len(kinds):
            raise ScenarioError("harvest sources must name each kind at most once", "sources")
        object.__setattr__(self, "harvest_sources", src)


@dataclass(frozen=True)
class SweepSpec:
    """Grid description. ``None`` for an axis keeps the base scenario's value.

    SI units throughout: ``ell`` in m, ``Pt`` in W, ``S`` in bit, ``G`` in J.
    """

    base: Scenario
    ell: tuple[float, ...] = tuple(float(v) for v in range(1, 11))
    Pt: tuple[float, ...] | None = None
    S: tuple[float, ...] | None = None
    G: tuple[float, ...] | None = None
    traffic: tuple | None = None
    fading: tuple | None = None
    outputs: tuple[str, ...] = ("theta",)
    Qs: float | None = None
    sim: SimSettings | None = None
    workers: int = 1

    def __post_init__(self):
        for name in ("ell", "Pt", "S", "G", "traffic", "fading"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(v)
                object.__setattr__(self, name, v)
                if not v:
                    raise ScenarioError(f"sweep axis {name!r} is empty", name)
        if not all(math.isfinite(x) for x in self.ell):
            raise ScenarioError("harvest distance grid must be finite", "ell")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise ScenarioError(f"unknown sweep output(s): {', '.join(sorted(bad))}", "outputs")
        if "pbo" in self.outputs:
            if self.Qs is None:
                raise ScenarioError("black-out output needs Qs", "Qs")
            if not all(isinstance(t, Platoon) for t in self.traffics):
                raise ScenarioError("black-out output is only available for platoon traffic", "traffic")
        if "sim_validation" in self.outputs and self.sim is None:
            object.__setattr__(self, "sim", SimSettings())

    @property
    def traffics(self) -> tuple:
        return self.traffic if self.traffic is not None else (self.base.traffic,)

    def points(self) -> list[dict]:
        axes = [
            ("traffic", self.traffics),
            ("fading", self.fading or (self.base.fading,)),
            ("G", self.G or (self.base.G_requested or self.base.G,)),
            ("Pt", self.Pt or (self.base.Pt,)),
            ("S", self.S or (self.base.S,)),
            ("ell", self.ell),
        ]
        names = [a for a, _ in axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in axes))]


@dataclass(frozen=True)
class SweepRow:
    ell_m: float
    ell_requested_m: float
    Pt_uW: float
    S_bit: float
    G_uJ: float
    traffic: str
    mean_dv_m: float
    fading: str
    theta_pkt_s: float
    theta_kbit_s: float
    upsilon_bits_per_J: float | None = None
    Qs_s: float | None = None
    P_BO_analytic: float | None = None
    theta_sim_kbit_s: float | None = None
    theta_sim_hw_kbit_s: float | None = None
    P_BO_sim: float | None = None
    theta_sim_all_kbit_s: float | None = None
    theta_sim_all_hw_kbit_s: float | None = None
    P_BO_sim_all: float | None = None

    def group_key(self) -> tuple:
        return (self.traffic, self.mean_dv_m, self.fading, self.G_uJ, self.Pt_uW, self.S_bit)

    def as_dict(self) -> dict:
        return asdict(self)


def _traffic_label(tr) -> str:
    return f"platoon(d0={tr.d0:g})" if isinstance(tr, Platoon) else f"poisson(mu={tr.mu:.6g})"


def _point_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _evaluate(job) -> SweepRow:
    spec, index, point = job
    s = spec.base.with_(**point)
    res = throughput(s)
    row = dict(
        ell_m=s.ell,
        ell_requested_m=float(point["ell"]),
        Pt_uW=s.Pt * 1e6,
        S_bit=s.S,
        G_uJ=s.G * 1e6,
        traffic=_traffic_label(s.traffic),
        mean_dv_m=s.traffic.mean_distance,
        fading=s.fading.label,
        theta_pkt_s=res.theta_pkt,
        theta_kbit_s=res.theta_kbit,
    )
    if "upsilon" in spec.outputs:
        row["upsilon_bits_per_J"] = efficiency(s, res).upsilon
    pbo_possible = "pbo" in spec.outputs and s.traffic.d0 > 2.0 * s.ell
    if "pbo" in spec.outputs:
        row["Qs_s"] = spec.Qs
        row["P_BO_analytic"] = (
            blackout_probability(blackout_query(s, spec.Qs), res.p_hat_B, res.phi_s) if pbo_possible else 1.0
        )
    if "sim_validation" in spec.outputs:
        sim = spec.sim
        for src in sim.harvest_sources:
            # closest_only mirrors the analysis; all_within is reported alongside
            suffix = "" if isinstance(src, ClosestOnly) else "_all"
            cfg = SimConfig(
                s,
                n_cycles=sim.n_cycles,
                seed=_point_seed(sim.seed, index),
                harvest_sources=src,
                Qs=spec.Qs if "pbo" in spec.outputs else None,
            )
            if sim.reps > 1:
                stats = replicate(cfg, sim.reps)
                mean, hw = (v / 1e3 for v in stats["throughput_bits_s"])
                row[f"theta_sim{suffix}_kbit_s"], row[f"theta_sim{suffix}_hw_kbit_s"] = mean, hw
                if "blackout_fraction" in stats:
                    row[f"P_BO_sim{suffix}"] = stats["blackout_fraction"][0]
            else:
                out = run_simulation(cfg)
                row[f"theta_sim{suffix}_kbit_s"] = out.throughput_bits_s / 1e3
                row[f"P_BO_sim{suffix}"] = out.blackout_fraction
    return SweepRow(**row)


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Evaluate every grid point; rows come back in grid order."""
    jobs = [(spec, i, p) for i, p in enumerate(spec.points())]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(_evaluate, jobs))
    return [_evaluate(j) for j in jobs]


@dataclass(frozen=True)
class Optimum:
    ell_m: float
    value: float
    degenerate: bool
    row: SweepRow


def _best(rows: Sequence[SweepRow], objective: str) -> Optimum:
    rows = sorted(rows, key=lambda r: r.ell_m)
    if objective == "theta":
        vals = [r.theta_kbit_s for r in rows]
        i = int(np.argmax(vals))  # first maximum, i.e. the smallest ell
        return Optimum(rows[i].ell_m, vals[i], all(v == 0.0 for v in vals), rows[i])
    if objective == "pbo":
        vals = [r.P_BO_analytic for r in rows]
        i = int(np.argmin(vals))
        return Optimum(rows[i].ell_m, vals[i], all(v == 1.0 for v in vals), rows[i])
    raise ValueError(f"objective must be 'theta' or 'pbo', got {objective!r}")


def optima(rows: Iterable[SweepRow], objective: str = "theta") -> dict[tuple, Optimum]:
    """Best harvest distance for every combination of the non-``ell`` axes."""
    groups: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        groups.setdefault(r.group_key(), []).append(r)
    return {k: _best(v, objective) for k, v in groups.items()}


def optimal_ell(spec: SweepSpec, objective: str = "theta") -> Optimum:
    """Grid search over ``spec.ell`` with every other axis fixed.

    Ties go to the smaller harvest distance. ``degenerate`` is set when the
    objective is flat at its worst value (zero throughput, or certain black-out).
    """
    if not spec.ell:
        raise ValueError("empty harvest distance grid")
    if objective == "pbo" and "pbo" not in spec.outputs:
        spec = replace(spec, outputs=tuple(spec.outputs) + ("pbo",))
    found = optima(run_sweep(spec), objective)
    if len(found) != 1:
        raise ValueError("optimal_ell needs every axis except ell to hold a single value")
    return next(iter(found.values()))


@dataclass(frozen=True)
class UncertaintyRow:
    mean_dv_m: float
    Pt_uW: float
    S_bit: float
    ell_contender_m: float
    ell_reference_m: float
    theta_contender_kbit_s: float
    theta_reference_kbit_s: float
    upsilon_contender_bits_per_J: float
    upsilon_reference_bits_per_J: float

    @property
    def theta_gain(self) -> float:
        return _gain(self.theta_contender_kbit_s, self.theta_reference_kbit_s)

    @property
    def upsilon_gain(self) -> float:
        return _gain(self.upsilon_contender_bits_per_J, self.upsilon_reference_bits_per_J)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(theta_gain=self.theta_gain, upsilon_gain=self.upsilon_gain)
        return d


def _gain(a: float, b: float) -> float:
    if b == 0.0:
        return 0.0 if a == 0.0 else math.inf
    return a / b - 1.0


def price_of_uncertainty(
    spec: SweepSpec,
    mean_spacings: Sequence[float],
    contender: Callable[[float], object] = Platoon,
    reference: Callable[[float], object] = lambda d: Poisson(1.0 / d),
) -> list[UncertaintyRow]:
    """Regular versus random traffic at equal mean spacing, each at its best ``ell``.

    The efficiency at the throughput-optimal ``ell`` is reported for both,
    together with the relative gains of the contender (platoon by default).
    """
    out = []
    for d in mean_spacings:
        found = {}
        for side, make in (("c", contender), ("r", reference)):
            sub = replace(spec, traffic=(make(d),), outputs=("theta", "upsilon"), sim=None)
            found[side] = optima(run_sweep(sub), "theta")
        for key in found["c"]:
            c = found["c"][key]
            r = next(v for k, v in found["r"].items() if k[2:] == key[2:])
            out.append(
                UncertaintyRow(
                    mean_dv_m=float(d),
                    Pt_uW=c.row.Pt_uW,
                    S_bit=c.row.S_bit,
                    ell_contender_m=c.ell_m,
                    ell_reference_m=r.ell_m,
                    theta_contender_kbit_s=c.value,
                    theta_reference_kbit_s=r.value,
                    upsilon_contender_bits_per_J=c.row.upsilon_bits_per_J,
                    upsilon_reference_bits_per_J=r.row.upsilon_bits_per_J,
                )
            )
    return out


@dataclass(frozen=True)
class TradeoffResult:
    rows: list[SweepRow]
    bound: float
    best: SweepRow | None
    unconstrained: SweepRow

    @property
    def feasible(self) -> bool:
        return self.best is not None

    @property
    def throughput_loss(self) -> float | None:
        if self.best is None or self.unconstrained.theta_kbit_s == 0.0:
            return None
        return 1.0 - self.best.theta_kbit_s / self.unconstrained.theta_kbit_s


def tradeoff_table(spec: SweepSpec, bound: float) -> TradeoffResult:
    """Throughput and black-out probability side by side, plus the best point with ``P_BO <= bound``."""
    if not 0.0 <= bound <= 1.0:
        raise ValueError(f"black-out bound must lie in [0, 1], got {bound}")
    if "pbo" not in spec.outputs:
        spec = replace(spec, outputs=tuple(spec.outputs) + ("pbo",))
    rows = run_sweep(spec)
    unconstrained = max(rows, key=lambda r: r.theta_kbit_s)
    ok = [r for r in rows if r.P_BO_analytic <= bound]
    best = max(ok, key=lambda r: r.theta_kbit_s) if ok else None
    return TradeoffResult(rows, bound, best, unconstrained)


def accuracy_table(
    base: Scenario, ells: Sequence[float], kappas_db: Sequence[float], n_draws: int = 10**6, seed: int = 0
) -> list[dict]:
    """Saddle-point CDF/cCDF accuracy against a Monte Carlo reference."""
    rows = []
    for i, (kdb, ell) in enumerate(itertools.product(kappas_db, ells)):
        s = base.with_(ell=ell, fading=Rician.from_db(kdb))
        approx = energy_cdf(s)
        ref = empirical_cdf(segment_rates(s), s.fading, n_draws, _point_seed(seed, i))
        rows.append(
            dict(
                ell_m=s.ell,
                kappa_dB=float(kdb),
                L=s.derived.L,
                accuracy_cdf=accuracy_metric(approx, ref, tail="cdf"),
                accuracy_ccdf=accuracy_metric(approx, ref, tail="ccdf"),
                n_draws=n_draws,
            )
        )
    return rows


def quantization_table(
    base: Scenario,
    ells: Sequence[float],
    traffics: Sequence,
    n_cycles: int = 100_000,
    seed: int = 0,
    harvest_sources: ClosestOnly | AllWithin = ClosestOnly(),
) -> list[dict]:
    """Paired quantized/continuous simulations over a grid."""
    rows = []
    for i, (tr, ell) in enumerate(itertools.product(traffics, ells)):
        s = base.with_(ell=ell, traffic=tr)
        cfg = SimConfig(s, n_cycles=n_cycles, seed=_point_seed(seed, i), harvest_sources=harvest_sources)
        q = run_simulation(replace(cfg, quantize_energy=True))
        c = run_simulation(replace(cfg, quantize_energy=False))
        err = math.nan if c.delivered_pkts == 0 else abs(q.throughput_bits_s / c.throughput_bits_s - 1.0)
        rows.append(
            dict(
                ell_m=s.ell,
                traffic=_traffic_label(tr),
                mean_dv_m=tr.mean_distance,
                theta_quantized_kbit_s=q.throughput_bits_s / 1e3,
                theta_continuous_kbit_s=c.throughput_bits_s / 1e3,
                quant_error=err,
            )
        )
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def write_csv(target, rows: Sequence, header: Sequence[str] = (), columns: Sequence[str] | None = None) -> str:
    """Write rows (dicts or dataclasses) as CSV preceded by ``#`` comment lines.

    ``target`` is a path, a text stream or ``None`` (only return the text).
    Columns whose values are all empty are dropped unless named explicitly.
    """
    dicts = [r.as_dict() if hasattr(r, "as_dict") else dict(r) for r in rows]
    if columns is None:
        columns = list(dicts[0]) if dicts else []
        columns = [c for c in columns if any(d.get(c) is not None for d in dicts)]
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for d in dicts:
        w.writerow([_fmt(d.get(c)) for c in columns])
    text = buf.getvalue()
    if target is None:
        return text
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def row_fields() -> list[str]:
    return [f.name for f in fields(SweepRow)]
