"""Command-line entry point: ``intermodal <subcommand> --config run.toml``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 equilibrium
solver failure, 5 estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .econometrics import (
    DesignError,
    EstimationError,
    estimate_panel,
    report,
    report_csv,
)
from .equilibrium import (
    DegenerateSystemError,
    comparative_statics_report,
    iterate_to_equilibrium,
    solve_closed_form,
)
from .instruments import InstrumentError
from .model import PricePair, foc_residual
from .montecarlo import MonteCarloConfig, run_montecarlo
from .panel import SchemaError, VARIABLES, generate_panel, read_csv, write_csv

log = logging.getLogger("intermodal")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4
EXIT_ESTIMATION = 5


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(f"cannot create output directory {out}: {exc.strerror}", EXIT_CONFIG)
    return out


def _seed(args: argparse.Namespace, config: RunConfig) -> int:
    return args.seed if args.seed is not None else config.seed


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- equilibrium


def cmd_equilibrium(config: RunConfig, args: argparse.Namespace) -> int:
    p1, p2, env = config.modes()
    solver = config.solver
    try:
        closed = solve_closed_form(p1, p2, env)
    except DegenerateSystemError as exc:
        raise CommandError(str(exc), EXIT_SOLVER)
    if closed.stability_product >= 1:
        raise CommandError(
            f"unstable system: stability product s1*s2 = {closed.stability_product:.6g} >= 1; "
            "best-response iteration does not contract and the equilibrium is not unique-stable",
            EXIT_SOLVER,
        )
    it = iterate_to_equilibrium(
        p1, p2, env, PricePair(*solver.start), solver.damping, solver.tol, solver.max_iter
    )
    residuals = [
        foc_residual(p1, p2, closed.prices, env, 1),
        foc_residual(p2, p1, closed.prices, env, 2),
    ]
    lines = [
        f"coach price     p1* = {closed.prices.p1:.12g}",
        f"airline price   p2* = {closed.prices.p2:.12g}",
        f"coach quantity  q1* = {closed.quantities.q1:.12g}",
        f"airline quantity q2* = {closed.quantities.q2:.12g}",
        f"stability product s1*s2 = {closed.stability_product:.12g}",
        f"FOC residuals = {residuals[0]:.3e}, {residuals[1]:.3e}",
        f"best-response iteration: converged={it.converged} iterations={it.iterations} "
        f"p1={it.prices.p1:.12g} p2={it.prices.p2:.12g}",
    ]
    print("\n".join(lines))
    payload = {
        "prices": {"p1": closed.prices.p1, "p2": closed.prices.p2},
        "quantities": {"q1": closed.quantities.q1, "q2": closed.quantities.q2},
        "stability_product": closed.stability_product,
        "foc_residuals": residuals,
        "max_relative_foc_residual": closed.max_foc_residual,
        "iteration": {
            "converged": it.converged,
            "iterations": it.iterations,
            "prices": {"p1": it.prices.p1, "p2": it.prices.p2},
            "message": it.message,
        },
    }
    _write_json(_out_dir(args) / "equilibrium.json", payload)
    if not it.converged:
        raise CommandError(f"best-response iteration failed: {it.message}", EXIT_SOLVER)
    return EXIT_OK


# ---------------------------------------------------------------- shock

SHOCK_COLUMNS = (
    "scenario",
    "kind",
    "target_mode",
    "phi_multiplier",
    "beta_own_delta",
    "beta_cross_delta",
    "old_p1",
    "old_p2",
    "new_p1",
    "new_p2",
    "pct_change_p1",
    "pct_change_p2",
    "ok",
    "error",
)


def _num(x: float | None) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def cmd_shock(config: RunConfig, args: argparse.Namespace) -> int:
    p1, p2, env = config.modes()
    scenarios = config.scenarios()
    try:
        rows = comparative_statics_report(p1, p2, env, scenarios)
    except DegenerateSystemError as exc:
        raise CommandError(f"base calibration: {exc}", EXIT_SOLVER)
    path = _out_dir(args) / config.shock.output
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SHOCK_COLUMNS)
        for i, row in enumerate(rows):
            sc = row.scenario
            writer.writerow(
                [
                    sc.name or f"scenario{i + 1}",
                    sc.kind,
                    sc.target_mode,
                    _num(sc.phi_multiplier),
                    _num(sc.beta_own_delta),
                    _num(sc.beta_cross_delta),
                    _num(row.old_prices.p1 if row.old_prices else None),
                    _num(row.old_prices.p2 if row.old_prices else None),
                    _num(row.new_prices.p1 if row.new_prices else None),
                    _num(row.new_prices.p2 if row.new_prices else None),
                    _num(row.pct_change_p1),
                    _num(row.pct_change_p2),
                    "true" if row.ok else "false",
                    row.error,
                ]
            )
            status = (
                f"{row.pct_change_p1:+.4f}% / {row.pct_change_p2:+.4f}%" if row.ok else f"FAILED: {row.error}"
            )
            print(f"{sc.name or f'scenario{i + 1}'}: {status}")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------- generate


def cmd_generate(config: RunConfig, args: argparse.Namespace) -> int:
    gen = config.generate
    dgp = config.dgp(_seed(args, config))
    try:
        panel = generate_panel(dgp, gen.n_cities, gen.n_months)
    except ValueError as exc:
        raise CommandError(config.locate(("generate",), str(exc)), EXIT_CONFIG)
    path = _out_dir(args) / gen.output
    try:
        write_csv(panel, path)
    except OSError as exc:
        raise CommandError(f"cannot write {path}: {exc.strerror}", EXIT_DATA)
    print(f"wrote {panel.n_obs} rows to {path}")
    return EXIT_OK


# ---------------------------------------------------------------- estimate


def _read_inflation(path: Path, months: Sequence[str]) -> np.ndarray:
    """Monthly inflation (percent) aligned to ``months`` from a ``month,inflation`` CSV."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"month", "inflation"} <= set(reader.fieldnames):
                raise SchemaError(f"{path}: line 1: columns 'month' and 'inflation' required")
            values = {}
            for record in reader:
                try:
                    values[record["month"].strip()] = float(record["inflation"])
                except (TypeError, ValueError):
                    raise SchemaError(
                        f"{path}: line {reader.line_num}, column 'inflation': "
                        f"non-numeric value {record['inflation']!r}"
                    ) from None
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read: {exc.strerror}") from None
    missing = [m for m in months if m not in values]
    if missing:
        raise SchemaError(f"{path}: no inflation rate for month {missing[0]!r}")
    return np.array([values[m] for m in months])


def _panel_path(config: RunConfig, args: argparse.Namespace) -> Path:
    if config.estimate.panel is not None:
        return config.resolve_input(config.estimate.panel)
    return Path(args.out) / config.generate.output


def cmd_estimate(config: RunConfig, args: argparse.Namespace) -> int:
    est = config.estimate
    spec = config.design()
    path = _panel_path(config, args)
    try:
        panel = read_csv(path)
        if est.inflation_csv:
            inflation = _read_inflation(config.resolve_input(est.inflation_csv), panel.time_ids)
            per_row = np.tile(inflation, panel.n_cities)
            panel = panel.replace_columns(
                **{name: panel.column(name) - per_row for name in VARIABLES}
            )
    except FileNotFoundError:
        raise CommandError(f"panel file not found: {path}", EXIT_DATA)
    except SchemaError as exc:
        raise CommandError(str(exc), EXIT_DATA)
    grouping = [tuple(g) for g in est.grouping] if est.grouping else None
    try:
        result = estimate_panel(panel, spec, est.method, grouping=grouping, hac_lags=est.hac_lags)
    except (DesignError, InstrumentError) as exc:
        raise CommandError(config.locate(("estimate",), str(exc)), EXIT_CONFIG)
    except (EstimationError, np.linalg.LinAlgError) as exc:
        raise CommandError(f"estimation failed: {exc}", EXIT_ESTIMATION)

    text = report(result, spec.dependent)
    out = _out_dir(args)
    (out / f"{est.output_prefix}.txt").write_text(text, encoding="utf-8")
    (out / f"{est.output_prefix}.csv").write_text(report_csv(result), encoding="utf-8")
    payload = result.to_dict()
    payload["panel"] = {"cities": list(panel.city_ids), "n_months": panel.n_months}
    _write_json(out / f"{est.output_prefix}.json", payload)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------- montecarlo


def cmd_montecarlo(config: RunConfig, args: argparse.Namespace) -> int:
    mc = config.montecarlo
    try:
        study = MonteCarloConfig(
            dgp=config.dgp(0),
            n_cities=config.generate.n_cities,
            n_months=config.generate.n_months,
            replications=mc.replications,
            design=config.design(),
            grouping=tuple(tuple(g) for g in config.estimate.grouping)
            if config.estimate.grouping
            else None,
            hac_lags=config.estimate.hac_lags,
            instrument_mode=mc.instrument_mode,
            invalid_strength=mc.invalid_strength,
            estimators=tuple(mc.estimators),
            test_level=mc.test_level,
        )
    except ValueError as exc:
        raise CommandError(config.locate(("montecarlo",), str(exc)), EXIT_CONFIG)
    summary = run_montecarlo(study, _seed(args, config), threads=args.threads)
    for index, error in summary.failures:
        log.warning("replication %d failed: %s", index, error)

    out = _out_dir(args)
    _write_json(out / f"{mc.output_prefix}.json", summary.as_dict())
    with open(out / f"{mc.output_prefix}.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["estimator", "coefficient", "truth", "mean", "sd", "mc_se", "bias", "z_score"])
        for kind, coefs in summary.estimates.items():
            for name, s in coefs.items():
                writer.writerow(
                    [kind, name, _num(s.truth), _num(s.mean), _num(s.sd), _num(s.mc_se),
                     _num(s.bias), _num(s.z_score)]
                )
    print(f"replications: {summary.succeeded}/{summary.replications} succeeded")
    for kind, coefs in summary.estimates.items():
        for name, s in coefs.items():
            truth = "" if s.truth is None else f" truth={s.truth:.4f} z={s.z_score:+.2f}"
            print(f"{kind:>5} {name:<10} mean={s.mean:.5f} sd={s.sd:.5f}{truth}")
    if summary.hansen_rejection_rate is not None:
        print(f"Hansen J rejection rate at {mc.test_level:g}: {summary.hansen_rejection_rate:.3f}")
    if summary.anderson_rejection_rate is not None:
        print(f"Anderson rejection rate at {mc.test_level:g}: {summary.anderson_rejection_rate:.3f}")
    if summary.succeeded == 0:
        raise CommandError("every replication failed", EXIT_ESTIMATION)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "equilibrium": cmd_equilibrium,
    "shock": cmd_shock,
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "montecarlo": cmd_montecarlo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intermodal",
        description="Coach/airline Bertrand model and panel GMM pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for montecarlo")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
