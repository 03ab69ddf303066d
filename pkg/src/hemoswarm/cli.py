"""Command line entry point: run scenarios, print the power table, validate configs."""

from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import click

from . import __version__
from .circuit import build_circuit, load_dataset
from .params import ConfigError, PhysiologyParams, RobotSpec, ScenarioConfig, load_config, scenario_metrics
from .policies import Fraction, MarkovDataModel, NearWallOff, Unlimited, effective_active_fraction, markov_stationary
from .storage import (
    InfeasibleDesign,
    ReservoirDemand,
    TankDesign,
    TransportRequirements,
    optimize_transport,
    reservoir_design,
)
from .transport import SolverError, integrate_capillary_resident, integrate_loop, total_dissipation
from .walldepletion import ConvergenceError, VesselCase, vessel_peclet, wall_trace_compare

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

# commonly quoted share of robots with full storage, reported next to the chain's own value
REFERENCE_FULL_FRACTION = 0.7

CAVEATS = {
    "circulating": [
        "Small-vessel transit times come from the bundled branching table; results depend on it.",
        "Robot number density is uniform per blood volume with no small-vessel density reduction.",
        "Average and minimum power are sensitive to the body capillary transit time (capillary_transit_time).",
    ],
    "capillary_resident": [
        "Robot number density in capillaries is 20 times the blood-wide value.",
    ],
    "storage_design": [
        "Lung collection assumes isolated-robot diffusion-limited absorption (no neighbour competition).",
    ],
}


def _count_label(n: float) -> str:
    return f"{n:.3g}".replace("+", "")


# --------------------------------------------------------------------------
# scenario runners; each returns (summary dict, {filename: text})


def _loop_row(args):
    spec, phys, policy, options, dataset_path = args
    dataset = load_dataset(dataset_path)
    circuit = build_circuit(
        dataset,
        phys,
        capillary_transit_time=options.get("capillary_transit_time", 1.0),
        capillary_length=options.get("capillary_length", 1e-3),
    )
    trace = integrate_loop(circuit, spec, policy, phys, sample_step=options.get("sample_step", 0.05))
    return trace


def _counts(cfg: ScenarioConfig) -> list[float]:
    return [float(c) for c in cfg.options.get("counts", [cfg.robots.count])]


def _run_circulating(cfg: ScenarioConfig, jobs: int):
    counts = _counts(cfg)
    args = [(cfg.robots.with_count(n), cfg.physiology, cfg.policy, cfg.options, cfg.circuit_dataset) for n in counts]
    traces = _map(_loop_row, args, jobs)
    rows, files = [], {}
    for n, tr in zip(counts, traces):
        spec = cfg.robots.with_count(n)
        name = f"trace_{_count_label(n)}.csv"
        rows.append({
            "count": n,
            "trace": name,
            **tr.summary(),
            "total_dissipation_W": total_dissipation(tr, spec),
            "avg_power_unlimited_W": tr.avg_power_unlimited,
            "scenario_metrics": scenario_metrics(spec, cfg.physiology),
        })
        if cfg.write_trace:
            files[name] = tr.to_csv()
    return {"rows": rows}, files


def _run_capillary(cfg: ScenarioConfig, jobs: int):
    rows, files = [], {}
    for n in _counts(cfg):
        tr = integrate_capillary_resident(
            cfg.robots.with_count(n),
            cfg.policy,
            cfg.physiology,
            capillary_speed=cfg.options.get("capillary_speed", 1e-3),
            length=cfg.options.get("capillary_length", 1e-3),
        )
        name = f"capillary_{_count_label(n)}.csv"
        rows.append({
            "count": n,
            "trace": name,
            "entry_c_plasma": tr.entry_c,
            "exit_c_plasma": float(tr.c[-1]),
            "exit_saturation": float(tr.sat[-1]),
            "avg_power_W": tr.avg_power,
            "heating_density_W_per_m3": tr.heating_density,
        })
        if cfg.write_trace:
            files[name] = tr.to_csv()
    return {"rows": rows}, files


def _run_wall(cfg: ScenarioConfig, jobs: int):
    vessel = dict(cfg.options.get("vessel", {}))
    band = vessel.pop("band", 0.3e-3)
    fraction = vessel.pop("fraction", 0.5)
    for key in ("n_r", "n_x"):
        if key in vessel:
            vessel[key] = int(vessel[key])
    if cfg.robot_count_set:
        vessel["robot_count"] = cfg.robots.count
    try:
        cases = [
            VesselCase(policy=Unlimited(), **vessel),
            VesselCase(policy=NearWallOff(band), **vessel),
            VesselCase(policy=Fraction(fraction), **vessel),
        ]
    except ValueError as exc:
        raise ConfigError("scenario.vessel", str(exc)) from exc
    cmp = wall_trace_compare(cases, cfg.physiology)
    inlet = cases[0].inlet_concentration
    summary = {
        "peclet": vessel_peclet(cases[0], cfg.physiology),
        "outlet_wall": {name: float(c[-1]) for name, c in cmp.curves.items()},
        "outlet_wall_relative": {name: float(c[-1] / inlet) if inlet else 0.0 for name, c in cmp.curves.items()},
        "grid": {"n_r": cases[0].n_r, "n_x": cases[0].n_x},
        "trace": "wall_traces.csv",
    }
    files = {"wall_traces.csv": cmp.to_csv()}
    return summary, files


def _run_storage(cfg: ScenarioConfig, jobs: int):
    t_opts = dict(cfg.options.get("transport", {}))
    n_r = int(t_opts.pop("n_r", 200))
    n_f = int(t_opts.pop("n_f", 200))
    r_opts = dict(cfg.options.get("reservoir", {}))
    try:
        req = TransportRequirements(**t_opts)
        demand = ReservoirDemand(**{k: r_opts.pop(k) for k in ("robots", "power", "window") if k in r_opts})
        own = r_opts.pop("own_power", 10e-12)
        tank = TankDesign(
            r_opts.get("robot_radius", 1e-6),
            r_opts.get("storage_fraction", 0.8),
            r_opts.get("wall_thickness", 20e-9),
            basis="interior",
        )
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from exc
    spec = cfg.robots
    design = optimize_transport(req, spec, cfg.physiology, n_r=n_r, n_f=n_f)
    reservoir = reservoir_design(demand, tank, cfg.physiology, spec, own_power=own)
    return {"transport": design.to_dict(), "reservoir": reservoir}, {}


def _run_markov(cfg: ScenarioConfig, jobs: int):
    opts = dict(cfg.options.get("markov", {}))
    for key in ("capacity", "transmit_limit"):
        if key in opts:
            opts[key] = int(opts[key])
    model = MarkovDataModel(**opts)
    res = markov_stationary(model)
    return {
        "distribution": [float(p) for p in res.distribution],
        "full_fraction": res.full_fraction,
        "effective_active_fraction": effective_active_fraction(res),
        "skin_arrivals_at_transmit_limit": res.skin_at_limit,
        "residual": res.residual,
        "iterations": res.iterations,
        "reference_full_fraction": REFERENCE_FULL_FRACTION,
        "reference_effective_active_fraction": effective_active_fraction(REFERENCE_FULL_FRACTION),
    }, {}


RUNNERS = {
    "circulating": _run_circulating,
    "capillary_resident": _run_capillary,
    "wall_depletion": _run_wall,
    "storage_design": _run_storage,
    "markov": _run_markov,
}


def _map(fn, args, jobs):
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]


def build_report(cfg: ScenarioConfig, summary: dict, files: dict) -> dict:
    dataset = load_dataset(cfg.circuit_dataset)
    return {
        "scenario_id": cfg.scenario_id,
        "kind": cfg.scenario_kind,
        "parameters": cfg.echo(),
        "summary": summary,
        "dataset": {"version": dataset.version, "sha256": dataset.sha256},
        "tool_version": __version__,
        "artifacts": sorted(files),
        "caveats": CAVEATS.get(cfg.scenario_kind, []),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_json_default) + "\n"


def run_scenario(cfg: ScenarioConfig, out_dir: Path, jobs: int = 1) -> dict:
    summary, files = RUNNERS[cfg.scenario_kind](cfg, jobs)
    report = build_report(cfg, summary, files)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)
    (out_dir / "report.json").write_text(dumps_report(report))
    return report


# --------------------------------------------------------------------------
# commands


@click.group()
@click.version_option(__version__, prog_name="hemoswarm")
def main():
    """Power available to oxygen-consuming robots in the bloodstream."""


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(1), help="Parallel table rows.")
def run(config, out_dir, jobs):
    """Run the scenario described by CONFIG and write report.json plus traces."""
    try:
        cfg = load_config(config)
        target = Path(out_dir) if out_dir else (cfg.output_dir or Path("out") / cfg.scenario_id)
        report = run_scenario(cfg, target, jobs)
    except (SolverError, ConvergenceError, InfeasibleDesign) as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    except (ValueError, OSError) as exc:
        # ConfigError is a ValueError; so are geometry and dataset problems
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"{report['scenario_id']}: wrote {target / 'report.json'}")


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
def validate(config):
    """Check CONFIG without running it."""
    try:
        cfg = load_config(config)
    except (ValueError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"ok: {cfg.scenario_kind} scenario '{cfg.scenario_id}'")


def _parse_counts(ctx, param, value):
    try:
        counts = [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated numbers, e.g. 1e10,1e11")
    if not counts or any(c < 0 or math.isnan(c) for c in counts):
        raise click.BadParameter("need at least one non-negative count")
    return counts


def power_table(counts, phys: PhysiologyParams | None = None, capillary_transit_time: float = 1.0, jobs: int = 1):
    phys = phys or PhysiologyParams()
    opts = {"capillary_transit_time": capillary_transit_time}
    traces = _map(_loop_row, [(RobotSpec(count=n), phys, Unlimited(), opts, None) for n in counts], jobs)
    rows = []
    for n, tr in zip(counts, traces):
        rows.append({
            "count": n,
            "avg_power_W": tr.avg_power,
            "min_power_W": None if tr.depleted else tr.min_power,
            "total_dissipation_W": total_dissipation(tr),
        })
    return rows


@main.command("table-power")
@click.option("--counts", default="1e10,1e11,1e12", show_default=True, callback=_parse_counts)
@click.option("--hematocrit", type=click.FloatRange(0, 1, min_open=True, max_open=True), help="Overall hematocrit.")
@click.option("--capillary-transit", default=1.0, show_default=True, type=click.FloatRange(0, min_open=True),
              help="Body capillary transit time (s).")
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(1))
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of a text table.")
def table_power(counts, hematocrit, capillary_transit, jobs, as_json):
    """Average and minimum robot power and total dissipation per robot count."""
    phys = PhysiologyParams()
    if hematocrit is not None:
        phys = phys.with_overrides(overall_hematocrit=hematocrit)
    try:
        rows = power_table(counts, phys, capillary_transit, jobs)
    except (SolverError, ValueError) as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    if as_json:
        click.echo(json.dumps(rows, sort_keys=True, indent=2))
        return
    click.echo(f"{'robots':>10}  {'avg (pW)':>9}  {'min (pW)':>9}  {'dissipation (W)':>15}")
    for r in rows:
        low = "none" if r["min_power_W"] is None else f"{r['min_power_W'] * 1e12:.0f}"
        click.echo(f"{r['count']:>10.3g}  {r['avg_power_W'] * 1e12:>9.0f}  {low:>9}  {r['total_dissipation_W']:>15.1f}")


if __name__ == "__main__":
    main()
