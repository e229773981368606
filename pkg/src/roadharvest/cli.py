"""Command-line front end.

Parameters are read from INI files (``[scenario]`` section, presentation
units) and overridden by flags. Every command echoes the resolved record as
``#`` lines ahead of its CSV output; ``--save-config`` writes the same record
as an INI file that reproduces the run when passed back with ``--config``.

Exit status: 0 success, 1 numerical failure, 2 usage or parameter error.
"""
from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .blackout import blackout_probability, blackout_query
from .config import DEFAULTS, PARAMS, parse_list, parse_number, read_ini, scenario_from_params
from .energy_cdf import NumericalError, accuracy_metric, empirical_cdf, energy_cdf, ks_distance, segment_rates
from .metrics import efficiency, throughput
from .recipes import _AXES, list_recipes, load_recipe, parse_sources, run_recipe
from .scenario import ScenarioError
from .simulator import SimConfig, run_simulation
from .sweep import SimSettings, SweepSpec, run_sweep, write_csv

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# parameter resolution
# --------------------------------------------------------------------------


def _add_scenario_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("scenario (flags override --config files)")
    for name, (_, unit, _) in PARAMS.items():
        g.add_argument(f"--{name.replace('_', '-')}", dest=f"p_{name}", metavar=unit.upper() or "X",
                       help=f"{name} [{unit}] (default {DEFAULTS[name]})" if unit else f"{name} (default {DEFAULTS[name]})")
    g.add_argument("--traffic", dest="p_traffic", metavar="MODEL",
                   help="poisson[:MU] or platoon[:D0] (default %s)" % DEFAULTS["traffic"])
    g.add_argument("--mu", type=str, help="Poisson intensity [vehicles/m]; implies --traffic poisson")
    g.add_argument("--d0", type=str, help="platoon spacing [m]; implies --traffic platoon")
    g.add_argument("--fading", dest="p_fading", metavar="MODEL",
                   help="rician[:KAPPA_DB] or rayleigh (default %s)" % DEFAULTS["fading"])
    g.add_argument("--kappa", type=str, help="Rice factor [dB]; implies --fading rician")
    p.add_argument("-c", "--config", action="append", default=[], metavar="FILE", help="INI file(s), later wins")
    p.add_argument("-o", "--output", metavar="FILE", help="write CSV here instead of stdout")
    p.add_argument("--save-config", metavar="FILE", help="write the resolved parameters as an INI file")


def _resolve(args) -> dict[str, str]:
    params = dict(DEFAULTS)
    cp = read_ini(args.config) if args.config else None
    if cp is not None and cp.has_section("scenario"):
        params.update(dict(cp["scenario"]))
    for name in list(PARAMS) + ["traffic", "fading"]:
        v = getattr(args, f"p_{name}", None)
        if v is not None:
            params[name] = v
    if args.mu is not None and args.d0 is not None:
        raise UsageError("--mu and --d0 select different traffic models")
    kind = params["traffic"].partition(":")[0]
    if args.mu is not None:
        if kind == "platoon" and args.p_traffic:
            raise UsageError("--mu given with platoon traffic")
        params["traffic"] = f"poisson:{args.mu}"
    elif args.d0 is not None:
        if kind == "poisson" and args.p_traffic:
            raise UsageError("--d0 given with Poisson traffic")
        params["traffic"] = f"platoon:{args.d0}"
    elif args.p_traffic and ":" not in args.p_traffic:
        params["traffic"] = {"poisson": DEFAULTS["traffic"], "platoon": "platoon:50"}.get(args.p_traffic, args.p_traffic)
    if args.kappa is not None:
        params["fading"] = f"rician:{args.kappa}"
    return params


def _header(params: dict[str, str], command: str, extra=()) -> list[str]:
    lines = [f"roadharvest {__version__}", f"command {command}"]
    lines += [f"scenario {k} = {v}" for k, v in params.items()]
    return lines + list(extra)


def _save_config(path, params: dict[str, str]):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("[scenario]\n")
        for k, v in params.items():
            fh.write(f"{k} = {v}\n")


def _emit(args, rows, header, columns=None):
    if args.output:
        write_csv(args.output, rows, header, columns)
    else:
        write_csv(sys.stdout, rows, header, columns)


def _setup(args, command):
    params = _resolve(args)
    s = scenario_from_params(params)
    if args.save_config:
        _save_config(args.save_config, params)
    notes = []
    if s.ell_snapped:
        notes.append(f"ell snapped from {s.ell_requested:g} m to {s.ell:g} m")
    if s.G_snapped:
        notes.append(f"G snapped from {s.G_requested * 1e6:g} uJ to {s.G * 1e6:g} uJ")
    for n in notes:
        print(f"note: {n}", file=sys.stderr)
    return params, s, _header(params, command, notes)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_throughput(args) -> int:
    params, s, header = _setup(args, "throughput")
    res = throughput(s)
    if args.dump_matrix:
        np.savetxt(args.dump_matrix, res.chain.M, delimiter=",", fmt="%.17g")
    row = dict(
        ell_m=s.ell, Pt_uW=s.Pt * 1e6, S_bit=s.S, traffic=params["traffic"], mean_dv_m=s.traffic.mean_distance,
        N_s=s.derived.N_s, L=s.derived.L, phi_s=res.phi_s, theta_pkt_s=res.theta_pkt, theta_kbit_s=res.theta_kbit,
        reducible_chain=res.pi.reducible,
    )
    _emit(args, [row], header)
    return EXIT_OK


def cmd_efficiency(args) -> int:
    params, s, header = _setup(args, "efficiency")
    res = throughput(s)
    eff = efficiency(s, res)
    row = dict(
        ell_m=s.ell, Pt_uW=s.Pt * 1e6, S_bit=s.S, traffic=params["traffic"], mean_dv_m=s.traffic.mean_distance,
        theta_kbit_s=res.theta_kbit, epsilon_W=eff.epsilon, upsilon_bits_per_J=eff.upsilon,
    )
    _emit(args, [row], header)
    return EXIT_OK


def cmd_blackout(args) -> int:
    params, s, header = _setup(args, "blackout")
    Qs = parse_number(args.Qs, "Qs")
    try:
        q = blackout_query(s, Qs)
    except ScenarioError as e:
        raise UsageError(str(e)) from None
    res = throughput(s)
    p = blackout_probability(q, res.p_hat_B, res.phi_s)
    row = dict(ell_m=s.ell, Pt_uW=s.Pt * 1e6, S_bit=s.S, Qs_s=Qs, x_slots=q.x, N_slots=q.N, N_H=q.N_H,
               P_BO_analytic=p)
    _emit(args, [row], header)
    return EXIT_OK


def cmd_simulate(args) -> int:
    params, s, header = _setup(args, "simulate")
    sources = parse_sources(args.sources)
    if isinstance(sources, tuple):
        raise UsageError("simulate takes a single harvest source")
    cfg = SimConfig(
        s,
        n_cycles=args.cycles,
        seed=args.seed,
        harvest_sources=sources,
        quantize_energy=not args.continuous,
        decode_mode=args.decode,
        Qs=parse_number(args.Qs, "Qs") if args.Qs else None,
    )
    header += [f"seed = {args.seed}", f"cycles = {args.cycles}", f"sources = {cfg.harvest_sources.label}",
               f"quantize_energy = {str(cfg.quantize_energy).lower()}", f"decode = {cfg.decode_mode}"]
    out = run_simulation(cfg)
    row = dict(
        seed=out.seed, n_cycles=out.n_cycles, delivered_pkts=out.delivered_pkts, attempted_pkts=out.attempted_pkts,
        elapsed_s=out.elapsed_s, throughput_kbit_s=out.throughput_bits_s / 1e3, Qs_s=cfg.Qs,
        blackout_cycles=out.blackout_cycles, blackout_fraction=out.blackout_fraction,
        max_silence_slots=out.max_silence_slots if cfg.Qs else None,
        energy_harvested_J=out.energy_harvested_J, energy_wasted_overflow_J=out.energy_wasted_overflow_J,
        energy_quantization_loss_J=out.energy_quantization_loss_J, energy_consumed_J=out.energy_consumed_J,
        final_battery_J=out.final_battery_J,
    )
    _emit(args, [row], header)
    if args.hist:
        write_csv(args.hist, [dict(quanta=k, cycles=int(c)) for k, c in enumerate(out.battery_start_hist)],
                  header + ["battery level at cycle start"])
    return EXIT_OK


def _sweep_axes(args, cp) -> dict[str, str]:
    axes = dict(cp["grid"]) if cp is not None and cp.has_section("grid") else {}
    for item in args.grid or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--grid expects KEY=VALUES, got {item!r}")
        axes[key.strip()] = val.strip()
    for key in axes:
        if key not in _AXES:
            raise UsageError(f"unknown sweep axis {key!r} (choose from {', '.join(_AXES)})")
    return axes


def cmd_sweep(args) -> int:
    params, s, header = _setup(args, "sweep")
    cp = read_ini(args.config) if args.config else None
    axes = _sweep_axes(args, cp)
    grid = {k: tuple(_AXES[k](v) for v in parse_list(text, k)) for k, text in axes.items()}
    grid.setdefault("ell", tuple(float(v) for v in range(1, 11)))
    outputs = tuple(o.strip() for o in args.outputs.split(","))
    Qs = parse_number(args.Qs, "Qs") if args.Qs else None
    sim = None
    if "sim_validation" in outputs:
        sim = SimSettings(n_cycles=args.cycles, seed=args.seed, harvest_sources=parse_sources(args.sources))
        header.append(f"seed = {args.seed}")
        header.append("sources = " + ", ".join(src.label for src in sim.harvest_sources))
    header += [f"grid {k} = {v}" for k, v in axes.items()] + [f"outputs = {','.join(outputs)}"]
    try:
        spec = SweepSpec(s, outputs=outputs, Qs=Qs, sim=sim, workers=args.workers, **grid)
    except ScenarioError as e:
        raise UsageError(str(e)) from None
    _emit(args, run_sweep(spec), header)
    return EXIT_OK


def cmd_validate_cdf(args) -> int:
    params, s, header = _setup(args, "validate-cdf")
    approx = energy_cdf(s)
    ref = empirical_cdf(segment_rates(s), s.fading, args.draws, args.seed)
    header.append(f"seed = {args.seed}")
    row = dict(
        ell_m=s.ell, L=s.derived.L, fading=s.fading.label, draws=args.draws,
        accuracy_cdf=accuracy_metric(approx, ref, tail="cdf"),
        accuracy_ccdf=accuracy_metric(approx, ref, tail="ccdf"),
        accuracy_cdf_max=accuracy_metric(approx, ref, tail="cdf", reduce="max"),
        ks_distance=ks_distance(approx, ref),
        mean_analytic_J=approx.mean, mean_empirical_J=ref.sample_mean,
    )
    _emit(args, [row], header)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.list or not args.figures:
        for name in list_recipes():
            print(f"{name:10s} {load_recipe(name).title}")
        return EXIT_OK
    names = list_recipes() if args.figures == ["all"] else args.figures
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    overrides = {}
    for item in args.set or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = val.strip()
    for name in names:
        rows, header, columns = run_recipe(name, overrides, quick=args.quick, seed=args.seed, workers=args.workers)
        path = out_dir / f"{Path(name).stem}.csv"
        write_csv(path, rows, header, columns)
        print(f"wrote {path} ({len(rows)} rows)", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roadharvest", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"roadharvest {__version__}")
    p.add_argument("--debug", action="store_true", help="print tracebacks on errors")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sp = sub.add_parser("throughput", help="analytic throughput of one configuration")
    _add_scenario_flags(sp)
    sp.add_argument("--dump-matrix", metavar="FILE", help="write the battery transition matrix as CSV")
    sp.set_defaults(func=cmd_throughput)

    sp = sub.add_parser("efficiency", help="RF energy density and bits per joule")
    _add_scenario_flags(sp)
    sp.set_defaults(func=cmd_efficiency)

    sp = sub.add_parser("blackout", help="per-cycle black-out probability (platoon traffic)")
    _add_scenario_flags(sp)
    sp.add_argument("--Qs", default="2", help="AoI threshold [s] (default 2)")
    sp.set_defaults(func=cmd_blackout)

    sp = sub.add_parser("simulate", help="slot-level Monte Carlo run")
    _add_scenario_flags(sp)
    sp.add_argument("--cycles", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sources", default="all_within:50",
                    help="all_within[:CUTOFF_M] (physical, default) or closest_only (the analytic model)")
    sp.add_argument("--continuous", action="store_true", help="do not round harvested energy down to packets")
    sp.add_argument("--decode", choices=("bernoulli", "expected"), default="bernoulli")
    sp.add_argument("--Qs", help="also count black-outs for this AoI threshold [s]")
    sp.add_argument("--hist", metavar="FILE", help="write the battery-start histogram as CSV")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="grid evaluation, one CSV row per point")
    _add_scenario_flags(sp)
    sp.add_argument("--grid", action="append", metavar="AXIS=VALUES",
                    help="axis values, e.g. ell=1:10, Pt=20,40 or traffic=platoon:25,platoon:50")
    sp.add_argument("--outputs", default="theta", help="comma list of theta, upsilon, pbo, sim_validation")
    sp.add_argument("--Qs", help="AoI threshold [s] for pbo")
    sp.add_argument("--cycles", type=int, default=100_000, help="simulated cycles per point")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sources", default="closest_only,all_within:50",
                    help="harvest models to simulate for sim_validation (comma list)")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate-cdf", help="saddle-point CDF against Monte Carlo")
    _add_scenario_flags(sp)
    sp.add_argument("--draws", type=int, default=10**6)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_validate_cdf)

    sp = sub.add_parser("reproduce", help="run bundled figure recipes")
    sp.add_argument("figures", nargs="*", help="recipe names (fig2 ... fig14, tradeoff) or 'all'")
    sp.add_argument("--list", action="store_true", help="list recipes and exit")
    sp.add_argument("--out-dir", default=".", help="directory for the CSV files")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a scenario parameter")
    sp.add_argument("--seed", type=int, help="override the recipe seed")
    sp.add_argument("--quick", action="store_true", help="small Monte Carlo sizes for a smoke run")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_reproduce)
    return p


def _origin(exc: BaseException) -> str:
    """Innermost package module involved in an exception, for error messages."""
    mod = "cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("roadharvest."):
            mod = name.split(".", 1)[1]
    return mod


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ScenarioError, FileNotFoundError) as e:
        if args.debug:
            traceback.print_exc()
        field = getattr(e, "field_name", None)
        where = f" (parameter {field!r})" if field else ""
        print(f"roadharvest {args.command}: error in {_origin(e)}{where}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, FloatingPointError, ArithmeticError) as e:
        if args.debug:
            traceback.print_exc()
        print(f"roadharvest {args.command}: numerical failure in {_origin(e)}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        if args.debug:
            traceback.print_exc()
        print(f"roadharvest {args.command}: invalid input in {_origin(e)}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
