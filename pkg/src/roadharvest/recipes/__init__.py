"""Versioned parameter grids for every figure-style data set.

Each ``*.ini`` file in this directory names a ``kind`` of computation and
pins its scenario overrides and grid in presentation units (see
:mod:`roadharvest.config`). :func:`run_recipe` turns a recipe into CSV rows
plus ``#`` header lines recording the inputs.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .. import __version__
from ..config import (
    DEFAULTS,
    parse_fading,
    parse_list,
    parse_number,
    parse_traffic,
    read_ini,
    scenario_from_params,
    to_si,
)
from ..scenario import Platoon, Poisson, ScenarioError
from ..simulator import AllWithin, ClosestOnly
from ..sweep import (
    SimSettings,
    SweepSpec,
    accuracy_table,
    price_of_uncertainty,
    quantization_table,
    run_sweep,
    tradeoff_table,
)

__all__ = ["Recipe", "list_recipes", "load_recipe", "run_recipe", "parse_sources"]

KINDS = ("sweep", "accuracy", "quantization", "uncertainty", "tradeoff")
QUICK_CYCLES = 2_000
QUICK_DRAWS = 10_000


@dataclass(frozen=True)
class Recipe:
    name: str
    kind: str
    title: str
    options: dict = field(default_factory=dict)
    scenario: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    accuracy: dict = field(default_factory=dict)


def _natural(name: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


def list_recipes() -> list[str]:
    files = resources.files(__name__).iterdir()
    return sorted((p.name[:-4] for p in files if p.name.endswith(".ini")), key=_natural)


def load_recipe(name: str | Path) -> Recipe:
    """Load a bundled recipe by name (``fig5``) or any recipe file by path."""
    path = Path(name)
    if path.suffix != ".ini":
        if str(name) not in list_recipes():
            raise ScenarioError(f"unknown recipe {name!r}; available: {', '.join(list_recipes())}", "recipe")
        with resources.as_file(resources.files(__name__) / f"{name}.ini") as p:
            cp = read_ini([p])
        path = Path(f"{name}.ini")
    else:
        cp = read_ini([path])
    if not cp.has_section("figure"):
        raise ScenarioError(f"recipe {path} lacks a [figure] section", "figure")
    opts = dict(cp["figure"])
    kind = opts.pop("kind", "sweep")
    if kind not in KINDS:
        raise ScenarioError(f"recipe {path}: unknown kind {kind!r}", "kind")
    section = lambda s: dict(cp[s]) if cp.has_section(s) else {}  # noqa: E731
    return Recipe(
        name=path.stem,
        kind=kind,
        title=opts.pop("title", path.stem),
        options=opts,
        scenario=section("scenario"),
        grid=section("grid"),
        sim=section("sim"),
        accuracy=section("accuracy"),
    )


def parse_sources(text: str):
    """``closest_only`` or ``all_within[:CUTOFF_M]``; a comma list gives a tuple."""
    if "," in text:
        return tuple(parse_sources(part) for part in text.split(",") if part.strip())
    kind, _, arg = text.strip().partition(":")
    if kind == "closest_only":
        return ClosestOnly()
    if kind == "all_within":
        return AllWithin(parse_number(arg, "cutoff") if arg else 50.0)
    raise ScenarioError(f"unknown harvest sources {text!r} (use closest_only or all_within[:CUTOFF])", "sources")


_AXES = {
    "ell": lambda v: parse_number(v, "ell"),
    "Pt": lambda v: to_si("Pt", v),
    "S": lambda v: to_si("S", v),
    "G": lambda v: to_si("G", v),
    "traffic": parse_traffic,
    "fading": parse_fading,
}


def _grid(recipe: Recipe) -> dict:
    out = {}
    for key, text in recipe.grid.items():
        if key in _AXES:
            out[key] = tuple(_AXES[key](v) for v in parse_list(text, key))
        elif key not in ("kappa", "mean_spacing"):
            raise ScenarioError(f"recipe {recipe.name}: unknown grid axis {key!r}", key)
    return out


def _sim_settings(recipe: Recipe, quick: bool, seed: int | None) -> SimSettings:
    s = recipe.sim
    return SimSettings(
        n_cycles=QUICK_CYCLES if quick else int(s.get("n_cycles", 100_000)),
        seed=int(s.get("seed", 0)) if seed is None else seed,
        harvest_sources=parse_sources(s.get("sources", "closest_only, all_within:50")),
        reps=int(s.get("reps", 1)),
    )


def run_recipe(
    recipe: Recipe | str,
    overrides: dict | None = None,
    *,
    quick: bool = False,
    seed: int | None = None,
    workers: int = 1,
) -> tuple[list, list[str], list[str] | None]:
    """Evaluate a recipe.

    Returns ``(rows, header_lines, columns)``; ``columns`` is ``None`` when
    every non-empty field should be written. ``overrides`` (presentation
    units) take precedence over the recipe's scenario section. ``quick``
    shrinks Monte Carlo sizes for smoke runs and is recorded in the header.
    """
    if isinstance(recipe, str):
        recipe = load_recipe(recipe)
    params = dict(recipe.scenario)
    params.update(overrides or {})
    base = scenario_from_params(params)
    resolved = dict(DEFAULTS)
    resolved.update(params)
    header = [f"roadharvest {__version__}", f"recipe {recipe.name} ({recipe.kind}): {recipe.title}"]
    header += [f"scenario {k} = {v}" for k, v in resolved.items()]
    header += [f"grid {k} = {v}" for k, v in recipe.grid.items()]
    header += [f"option {k} = {v}" for k, v in recipe.options.items()]
    if quick:
        header.append("quick = true (reduced Monte Carlo sizes)")
    grid = _grid(recipe)
    columns = None

    if recipe.kind == "accuracy":
        draws = QUICK_DRAWS if quick else int(float(recipe.accuracy.get("draws", 10**6)))
        sd = int(recipe.accuracy.get("seed", 0)) if seed is None else seed
        header.append(f"seed = {sd}")
        kappas = [parse_number(v, "kappa") for v in parse_list(recipe.grid.get("kappa", "10"), "kappa")]
        rows = accuracy_table(base, grid.get("ell", (base.ell,)), kappas, n_draws=draws, seed=sd)
    elif recipe.kind == "quantization":
        sim = _sim_settings(recipe, quick, seed)
        header.append(f"seed = {sim.seed}")
        src = sim.harvest_sources
        if len(src) != 1:
            raise ScenarioError("quantization recipes take a single harvest source", "sources")
        header.append(f"sources = {src[0].label}")
        rows = quantization_table(
            base, grid.get("ell", (base.ell,)), grid.get("traffic", (base.traffic,)), sim.n_cycles, sim.seed, src[0]
        )
    elif recipe.kind == "uncertainty":
        spacings = [parse_number(v, "mean_spacing") for v in parse_list(recipe.grid["mean_spacing"], "mean_spacing")]
        grid.pop("traffic", None)
        spec = SweepSpec(base, outputs=("theta", "upsilon"), workers=workers, **grid)
        rows = price_of_uncertainty(spec, spacings, contender=Platoon, reference=lambda d: Poisson(1.0 / d))
    else:
        outputs = tuple(o.strip() for o in recipe.options.get("outputs", "theta").split(","))
        Qs = parse_number(recipe.options["Qs"], "Qs") if "Qs" in recipe.options else None
        sim = None
        if "sim_validation" in outputs:
            sim = _sim_settings(recipe, quick, seed)
            header.append(f"seed = {sim.seed}")
            labels = ", ".join(src.label for src in sim.harvest_sources)
            header.append(f"sim n_cycles = {sim.n_cycles}, sources = {labels}")
        spec = SweepSpec(base, outputs=outputs, Qs=Qs, sim=sim, workers=workers, **grid)
        if recipe.kind == "tradeoff":
            bound = parse_number(recipe.options.get("bound", "1e-3"), "bound")
            res = tradeoff_table(replace(spec, outputs=tuple(set(outputs) | {"pbo"})), bound)
            rows = []
            for r in res.rows:
                d = r.as_dict()
                d.update(feasible=r.P_BO_analytic <= bound, selected=r is res.best, unconstrained_max=r is res.unconstrained)
                rows.append(d)
            if res.best is None:
                rows.append({"note": "infeasible"})
                header.append(f"no grid point meets P_BO <= {bound:g}")
            else:
                header.append(f"throughput loss of best feasible point = {res.throughput_loss:.6f}")
            columns = [
                "ell_m", "Pt_uW", "S_bit", "G_uJ", "traffic", "fading", "theta_kbit_s", "Qs_s",
                "P_BO_analytic", "feasible", "selected", "unconstrained_max", "note",
            ]
        else:
            rows = run_sweep(spec)
    return rows, header, columns
