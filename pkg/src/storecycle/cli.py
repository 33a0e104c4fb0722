"""Command-line entry point tying the toolkit together.

Commands: simulate, equilibrium, udensity, fit, sweep.  Exit codes:
0 success, 1 input error, 2 numerical failure, 3 equilibrium divergence.
All floating-point output uses 17 significant digits so files round-trip
losslessly; identical config and seed produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import sys
from datetime import date
from pathlib import Path

import numpy as np

from .calibration import DELTA_DEFAULT, FixedInputs, aggregate, fit, ingest, model_curve
from .cashflow import CashFlowParams, cash_flow, curve_metrics, parameter_sweep
from .config import load_config, load_scene
from .equilibrium import conversion_rate, solve_equilibrium
from .errors import ConfigError, FixedPointDivergence, StoreCycleError
from .spatial import equivalent_density, potential_customers_closed_form

__all__ = ["main"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _to_json(obj, indent=0) -> str:
    """JSON with floats at 17 significant digits and sorted keys."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{inner}"{k}": {_to_json(obj[k], indent + 1)}' for k in sorted(obj)
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{inner}{_to_json(v, indent + 1)}" for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format(float(obj), ".17g")
    if obj is None:
        return "null"
    return '"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _write_json(path: str, obj) -> None:
    Path(path).write_text(_to_json(obj) + "\n")


def _sibling(path: str, suffix: str) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


def read_cash_flow_csv(path: str) -> list[tuple[date, float]]:
    """Read a `date,cash_flow` CSV; malformed rows are reported by number."""
    rows = []
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "cash_flow"]:
            raise ConfigError(f"{path}: expected header 'date,cash_flow'")
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ConfigError(f"{path}: row {i}: expected two columns")
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError:
                raise ConfigError(f"{path}: row {i}: bad date {row[0]!r} (want YYYY-MM-DD)")
            try:
                v = float(row[1])
            except ValueError:
                raise ConfigError(f"{path}: row {i}: bad cash flow {row[1]!r}")
            rows.append((d, v))
    return rows


def _build_cash_flow_params(cfg) -> CashFlowParams:
    cfg.require("scene", "curve", "theta")
    u_eff = cfg.effective_density()
    curve = cfg.curve.effective(cfg.policy) if cfg.policy is not None else cfg.curve
    return CashFlowParams(
        u_eff=u_eff,
        delta=cfg.scene.delta,
        k=cfg.scene.focal.speed,
        theta=cfg.theta,
        curve=curve,
    )


def cmd_simulate(config_path: str, t_max: float, output: str) -> int:
    cfg = load_config(config_path)
    params = _build_cash_flow_params(cfg)
    ts = np.arange(0.0, float(t_max) + 1.0)
    n = potential_customers_closed_form(params.u_eff, params.delta, params.k, ts)
    beta = conversion_rate(params.curve, ts)
    cf = np.asarray(n) * params.theta * np.asarray(beta)
    with open(output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "potential_customers", "conversion_rate", "cash_flow"])
        for row in zip(ts, np.asarray(n), np.asarray(beta), cf):
            writer.writerow([_fmt(float(v)) for v in row])
    metrics = curve_metrics(params)
    _write_json(_sibling(output, ".metrics.json"), metrics.to_dict())
    return 0


def cmd_equilibrium(config_path: str, output: str) -> int:
    cfg = load_config(config_path)
    cfg.require("population", "trad", "drift", "investments")
    solution = solve_equilibrium(
        cfg.population, cfg.trad, cfg.drift, cfg.transform(), cfg.investments,
        damping=cfg.damping, tol=cfg.equilibrium_tol,
        theta_bounds=cfg.theta_bounds, restart_seed=cfg.seed,
    )
    _write_json(output, solution.to_dict())
    return 0


def cmd_udensity(scene_path: str) -> int:
    scene = load_scene(scene_path)
    u_prime = equivalent_density(scene)
    out = {
        "u": scene.density,
        "u_prime": u_prime,
        "long_run_flow": 2.0 * np.pi * u_prime / scene.delta**2,
    }
    sys.stdout.write(_to_json(out) + "\n")
    return 0


def cmd_fit(
    csv_path: str,
    output: str,
    delta: float,
    u_prime: float,
    theta: float,
    frequency: str = "daily",
    fitted_csv: str | None = None,
) -> int:
    rows = read_cash_flow_csv(csv_path)
    series = ingest(rows)
    if frequency != "daily":
        series = aggregate(series, frequency)
    fixed = FixedInputs(delta=delta, u_prime=u_prime, theta=theta)
    result = fit(series, fixed)
    doc = {
        "estimates": {"k": result.k_hat, "nu": result.nu_hat, "beta0": result.beta0_hat},
        "scaled": result.scaled(),
        "std_errors": result.std_errors.tolist(),
        "covariance": [row.tolist() for row in result.covariance],
        "adj_r2": result.adj_r2,
        "f_statistic": result.f_statistic,
        "n_obs": result.n_obs,
        "lifespan_days": result.lifespan_days,
        "boundary_estimate": result.boundary_estimate,
        "ssr": result.ssr,
        "fixed": {"delta": delta, "u_prime": u_prime, "theta": theta},
        "frequency": frequency,
    }
    _write_json(output, doc)
    if fitted_csv is not None:
        t = series.model_times()
        fitted = model_curve(fixed, result.k_hat, result.nu_hat, result.beta0_hat, t)
        with open(fitted_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "observed", "fitted"])
            for ti, ob, fi in zip(t, series.values, fitted):
                writer.writerow([_fmt(float(ti)), _fmt(float(ob)), _fmt(float(fi))])
    return 0


def cmd_sweep(config_path: str, axis: str, values: list[float], output: str) -> int:
    cfg = load_config(config_path)
    base = _build_cash_flow_params(cfg)
    table = parameter_sweep(base, axis, values)
    with open(output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "t", "cash_flow"])
        for entry in table:
            for ti, ci in zip(entry["t"], entry["cash_flow"]):
                writer.writerow([_fmt(entry["value"]), _fmt(float(ti)), _fmt(float(ci))])
    metrics = [
        {"value": entry["value"], **entry["metrics"].to_dict()} for entry in table
    ]
    _write_json(_sibling(output, ".metrics.json"), {"axis": axis, "results": metrics})
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storecycle",
        description="Simulate and calibrate the structural store cash-flow model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="cash-flow curve from a scenario config")
    p.add_argument("config")
    p.add_argument("--t-max", type=float, default=1500.0)
    p.add_argument("--output", required=True, help="CSV path; metrics JSON written alongside")

    p = sub.add_parser("equilibrium", help="solve the style-market equilibrium")
    p.add_argument("config")
    p.add_argument("--output", required=True)

    p = sub.add_parser("udensity", help="competing-equivalent foot traffic density")
    p.add_argument("scene")

    p = sub.add_parser("fit", help="NLS calibration of (k, nu, beta0) from a CSV")
    p.add_argument("csv")
    p.add_argument("--output", required=True)
    p.add_argument("--delta", type=float, default=DELTA_DEFAULT)
    p.add_argument("--u-prime", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--frequency", choices=["daily", "weekly", "monthly"], default="daily")
    p.add_argument("--fitted-csv", default=None)

    p = sub.add_parser("sweep", help="curve metrics along one parameter axis")
    p.add_argument("config")
    p.add_argument("--axis", choices=["u", "nu", "k"], required=True)
    p.add_argument("--values", required=True, help="comma-separated positive values")
    p.add_argument("--output", required=True, help="CSV path; metrics JSON written alongside")

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.t_max, args.output)
        if args.command == "equilibrium":
            return cmd_equilibrium(args.config, args.output)
        if args.command == "udensity":
            return cmd_udensity(args.scene)
        if args.command == "fit":
            return cmd_fit(
                args.csv, args.output, args.delta, args.u_prime, args.theta,
                frequency=args.frequency, fitted_csv=args.fitted_csv,
            )
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            return cmd_sweep(args.config, args.axis, values, args.output)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except FixedPointDivergence as exc:
        sys.stderr.write(f"equilibrium divergence: {exc}\n")
        return 3
    except StoreCycleError as exc:
        sys.stderr.write(f"numerical failure ({type(exc).__name__}): {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
