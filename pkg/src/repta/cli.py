"""Command line entry point: ``repta <command> [options]``.

Commands
    size    size one scenario and write its schedule
    robust  size, then robust tank sizing for each beta
    price   size, then inner prices
    run     size -> robust -> price -> assessment, one report
    bench   the four benchmark scenarios against the proposed one
    sweep   sensitivity over the ammonia scheduling period
    fit     fit the transition time constant to observed flows

Exit codes: 0 optimal, 2 infeasible, 3 solver limit, 4 configuration error,
1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, economics
from .ammonia import AmmoniaError, fit_t_trans, kg_to_nm3
from .config import ConfigError, RunConfig, check_run, load_config
from .milp import ConfigurationError, SolveOptions
from .pricing import PricingInfeasibleError, price
from .profiles import ProfileError, load_profiles, synthetic_pair
from .robust import solve_robust
from .sizing import (
    SCENARIOS, TABLE_V_COLUMNS, InfeasibleError, Overrides, SolverLimitError, electrolyzer_flh,
    exchange_rates, run_benchmark, size,
)

log = logging.getLogger("repta")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_CONFIG = 0, 1, 2, 3, 4


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def exit_code(self) -> int:
        c = self.cause
        if isinstance(c, (ConfigError, ConfigurationError, ProfileError, AmmoniaError, FileNotFoundError)):
            return EXIT_CONFIG
        if isinstance(c, (InfeasibleError, PricingInfeasibleError)):
            return EXIT_INFEASIBLE
        if isinstance(c, SolverLimitError):
            return EXIT_LIMIT
        return EXIT_ERROR

    def report(self) -> dict:
        out = {"stage": self.stage, "error": type(self.cause).__name__, "message": str(self.cause)}
        for attr in ("family", "best_er"):
            if getattr(self.cause, attr, None) is not None:
                out[attr] = getattr(self.cause, attr)
        return out


class ReportValidationError(RuntimeError):
    pass


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


# -- configuration -------------------------------------------------------------


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def resolve_config(args) -> RunConfig:
    run = load_config(args.config)
    changes = {}
    if getattr(args, "out", None):
        changes["out_dir"] = Path(args.out)
    for flag, key in (("seed", "seed"), ("gap", "gap"), ("time_limit", "time_limit"), ("scenario", "scenario"),
                      ("jobs", "jobs"), ("backend", "backend")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    if getattr(args, "beta", None):
        changes["betas"] = args.beta
    if getattr(args, "dtas", None):
        changes["sweep"] = args.dtas
    if getattr(args, "plot", False):
        changes["plot"] = True
    if getattr(args, "hours", None):
        changes["system"] = run.system.replace(n_hours=args.hours)
    run = run.replace(**changes)
    if run.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {run.scenario!r}; choose from {', '.join(SCENARIOS)}")
    check_run(run)
    return run


def load_inputs(run: RunConfig):
    n = run.system.n_hours
    if run.profiles is not None:
        return load_profiles(run.profiles, n, run.system.dt)
    return synthetic_pair(run.wind_flh, run.solar_flh, run.seed, n, run.system.dt)


def solve_options(run: RunConfig) -> SolveOptions:
    return SolveOptions(gap=run.gap, time_limit=run.time_limit, backend=run.backend)


# -- output helpers ------------------------------------------------------------------


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return None if math.isnan(value) or math.isinf(value) else value
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


def write_rows(path: Path, rows: list, columns=None) -> Path:
    columns = list(columns or rows[0].keys())
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in columns})
    return path


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else f"{float(value):.10g}"
    return value


def _out_dir(run: RunConfig) -> Path:
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _map(fn, items, jobs: int):
    """Ordered map, fanned out to worker processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# -- report pieces ---------------------------------------------------------------


def sizing_summary(sized) -> dict:
    cfg = sized.cfg
    out = {"status": sized.status.value, "gap": sized.gap, "wall_time_s": sized.wall_time}
    out.update(sized.capacities.to_dict())
    out["DTR_1e4_RMB_per_yr"] = sized.dtr_annual_1e4
    out["ER"] = sized.dtr / sum(sized.invest.values())
    out["m_NH3_t"] = sized.m_nh3
    out["r_AS"] = sized.r_as
    out["FLH_AE"] = electrolyzer_flh(sized.schedule, sized.capacities) / cfg.year_fraction
    out.update({f"rate_{k}": v for k, v in exchange_rates(sized.schedule).items()})
    if sized.binding_box:
        out["binding_search_bounds"] = list(sized.binding_box)
    return out


def validate_report(sized, outcome=None):
    """Self-check run before anything is written."""
    if sized.violations:
        raise ReportValidationError(f"schedule fails verification: {sized.violations[0]}")
    recomputed = economics.stage1_revenue(sized.schedule, sized.capacities, sized.cfg)
    if abs(recomputed - sized.dtr) > 1e-6 * max(1.0, abs(sized.dtr)):
        raise ReportValidationError(f"ledger recomputation {recomputed:.6f} disagrees with DTR {sized.dtr:.6f}")
    if outcome is not None:
        led = outcome.ledger
        if abs(led.total - sized.dtr) > 1e-6 * max(1.0, abs(sized.dtr)):
            raise ReportValidationError("inner prices changed total revenue")
        if outcome.violations:
            raise ReportValidationError(f"pricing solution fails verification: {outcome.violations[0]}")


def _robust_job(job):
    sized, beta, wind, solar, options = job
    return solve_robust(sized, beta, None, wind, solar, options)


def robust_rows(sized, betas, wind, solar, options, jobs) -> list:
    results = _map(_robust_job, [(sized, b, wind, solar, options) for b in betas], jobs)
    return [r.row() for r in results]


def _bench_job(job):
    scenario, cfg, wind, solar, options, grid = job
    return run_benchmark(scenario, cfg, wind, solar, options, grid)


def _sweep_job(job):
    dt_as, cfg, wind, solar, options = job
    sized = size(cfg.replace(dt_as=dt_as), wind, solar, None, options)
    validate_report(sized)
    row = {"dt_as_h": dt_as, "n_windows": sized.cfg.n_windows}
    row.update(sizing_summary(sized))
    return row


# -- commands ------------------------------------------------------------------------


def cmd_size(run: RunConfig, wind, solar) -> int:
    opts = solve_options(run)
    sized = _stage("size", size, run.system, wind, solar, Overrides.for_scenario(run.scenario), opts)
    _stage("validate", validate_report, sized)
    out = _out_dir(run)
    summary = {"scenario": run.scenario, **sizing_summary(sized)}
    write_json(out / "size.json", summary)
    sized.schedule.to_csv(out / "schedule.csv")
    if run.plot:
        from . import plotting

        plotting.schedule_figure(sized.schedule, out / "schedule.png")
    _echo(summary)
    return EXIT_OK


def cmd_robust(run: RunConfig, wind, solar) -> int:
    opts = solve_options(run)
    sized = _stage("size", size, run.system, wind, solar, Overrides.for_scenario(run.scenario), opts)
    _stage("validate", validate_report, sized)
    rows = _stage("robust", robust_rows, sized, run.betas, wind, solar, opts, run.jobs)
    out = _out_dir(run)
    write_rows(out / "robust.csv", rows)
    if run.plot:
        from . import plotting

        plotting.robust_figure(rows, out / "robust.png")
    _echo(rows)
    return EXIT_OK


def cmd_price(run: RunConfig, wind, solar) -> int:
    opts = solve_options(run)
    sized = _stage("size", size, run.system, wind, solar, Overrides.for_scenario(run.scenario), opts)
    outcome = _stage("price", price, sized, run.system, run.price_grid, opts)
    _stage("validate", validate_report, sized, outcome)
    out = _out_dir(run)
    rep = outcome.report
    keys = ("p_Inner", "p_H2_Inner", "E_AE_Inner", "E_AS_Inner", "ER_RG", "ER_AEHS", "ER_AS", "deviation_sum")
    write_json(out / "price.json", {k: rep[k] for k in keys})
    _echo({k: rep[k] for k in keys})
    return EXIT_OK


def cmd_run(run: RunConfig, wind, solar) -> int:
    opts = solve_options(run)
    sized = _stage("size", size, run.system, wind, solar, Overrides.for_scenario(run.scenario), opts)
    rows = _stage("robust", robust_rows, sized, run.betas, wind, solar, opts, run.jobs) if run.betas else []
    outcome = _stage("price", price, sized, run.system, run.price_grid, opts)
    _stage("validate", validate_report, sized, outcome)
    summary = sizing_summary(sized)
    table = {"scenario": run.scenario, "p_Inner": outcome.prices.p_inner, "p_H2_Inner": outcome.prices.p_h2_inner}
    table.update({k: summary[k] for k in TABLE_V_COLUMNS if k in summary})
    report = {
        "version": __version__,
        "scenario": run.scenario,
        "horizon_h": run.system.horizon_hours,
        "seed": run.seed,
        "sizing": summary,
        "robust": rows,
        "pricing": outcome.report,
        "ledger": outcome.ledger.to_dict(),
        "table": {k: table.get(k) for k in TABLE_V_COLUMNS},
    }
    out = _out_dir(run)
    write_json(out / "report.json", report)
    sized.schedule.to_csv(out / "schedule.csv")
    if rows:
        write_rows(out / "robust.csv", rows)
    if run.plot:
        from . import plotting

        plotting.schedule_figure(sized.schedule, out / "schedule.png")
        if rows:
            plotting.robust_figure(rows, out / "robust.png")
    _echo(report["table"])
    return EXIT_OK


def cmd_bench(run: RunConfig, wind, solar) -> int:
    jobs = [(s, run.system, wind, solar, solve_options(run), run.price_grid) for s in SCENARIOS]
    rows = _stage("bench", _map, _bench_job, jobs, run.jobs)
    out = _out_dir(run)
    columns = list(TABLE_V_COLUMNS) + [k for k in rows[0] if k not in TABLE_V_COLUMNS]
    write_rows(out / "bench.csv", rows, columns)
    if run.plot:
        from . import plotting

        plotting.bench_figure(rows, out / "bench.png")
    _echo([{k: r[k] for k in ("scenario", "DTR_1e4_RMB_per_yr", "ER")} for r in rows])
    return EXIT_OK


def cmd_sweep(run: RunConfig, wind, solar) -> int:
    jobs = [(d, run.system, wind, solar, solve_options(run)) for d in run.sweep_periods()]
    rows = _stage("sweep", _map, _sweep_job, jobs, run.jobs)
    out = _out_dir(run)
    write_rows(out / "sweep.csv", rows)
    if run.plot:
        from . import plotting

        plotting.sweep_figure(rows, out / "sweep.png")
    _echo([{k: r[k] for k in ("dt_as_h", "C_W", "C_S", "C_AE", "C_HS", "DTR_1e4_RMB_per_yr")} for r in rows])
    return EXIT_OK


def read_trajectory(path: Path) -> np.ndarray:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if "flow" not in (reader.fieldnames or ()):
            raise ConfigError(f"{path}: needs a 'flow' column")
        try:
            return np.array([float(row["flow"]) for row in reader])
        except ValueError:
            raise ConfigError(f"{path}: non-numeric flow value") from None


def cmd_fit(args, run: RunConfig) -> int:
    data = _stage("config", read_trajectory, args.data)
    q_k, q_k1 = args.q_from, args.q_to
    if run.flow_unit == "kg/h" or args.unit == "kg/h":
        data, q_k, q_k1 = kg_to_nm3(data), float(kg_to_nm3(q_k)), float(kg_to_nm3(q_k1))
    t_hat, rmse = _stage("fit", fit_t_trans, data, q_k, q_k1, args.dt)
    rated = run.system.q_h2_rated
    result = {"T_trans_h": t_hat, "rmse_Nm3_per_h": rmse, "rmse_share_of_rated": rmse / rated, "samples": len(data)}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "fit.json", result)
    _echo(result)
    return EXIT_OK


def _echo(data):
    print(json.dumps(_plain(data), indent=2))


# -- argument parsing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run file (defaults apply when omitted)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for synthetic profiles")
    common.add_argument("--gap", type=float, help="relative MIP gap")
    common.add_argument("--time-limit", type=float, dest="time_limit", help="solver time limit per solve (s)")
    common.add_argument("--backend", choices=("highs", "bnb"), help="MILP backend")
    common.add_argument("--hours", type=int, help="horizon length in steps (overrides the config)")
    common.add_argument("--jobs", type=int, help="worker processes for independent runs")
    common.add_argument("--plot", action="store_true", help="also render PNG figures")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="repta", description="Sizing and pricing of renewable power to ammonia.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("size", "size one scenario"), ("robust", "robust tank sizing over beta"), ("price", "inner prices"),
        ("run", "full pipeline"), ("bench", "benchmark scenarios"), ("sweep", "ammonia flexibility sweep"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        if name in ("size", "robust", "price", "run"):
            p.add_argument("--scenario", choices=SCENARIOS)
        if name in ("robust", "run"):
            p.add_argument("--beta", type=_floats, help="comma-separated revenue sacrifice levels")
        if name == "sweep":
            p.add_argument("--dtas", type=_floats, help="comma-separated scheduling periods (h)")
    fit = sub.add_parser("fit", parents=[common], help="fit the ammonia transition time constant")
    fit.add_argument("--data", type=Path, required=True, help="CSV with a 'flow' column, one row per step")
    fit.add_argument("--from", type=float, required=True, dest="q_from", help="old setpoint")
    fit.add_argument("--to", type=float, required=True, dest="q_to", help="new setpoint")
    fit.add_argument("--dt", type=float, default=1.0, help="sampling interval (h)")
    fit.add_argument("--unit", choices=("Nm3/h", "kg/h"), default="Nm3/h")
    return parser


COMMANDS = {"size": cmd_size, "robust": cmd_robust, "price": cmd_price, "run": cmd_run,
            "bench": cmd_bench, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        run = _stage("config", resolve_config, args)
        if args.command == "fit":
            return cmd_fit(args, run)
        wind, solar = _stage("config", load_inputs, run)
        return COMMANDS[args.command](run, wind, solar)
    except StageError as err:
        print(json.dumps(_plain(err.report())), file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
