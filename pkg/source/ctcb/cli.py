"""Command-line entry point: ``ctcb <command> [options]``.

Exit codes: 0 success, 1 calibration above tolerance or a solver failure,
2 usage or input error, 3 empty conditional selection.
"""

import argparse
import logging as log
import sys
from pathlib import Path
from typing import Callable, Optional, Self, TypeVar

import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

import ctcb

from . import setup
from .calibration import CalibConfig, calibrate, write_calibration
from .config import OutputFormat, Product
from .domain import Estimate, ModelFunctions, StructuralParams, Trade
from .errors import CtcbError, EmptySelectionError, SolverError
from .market_data import MarketSnapshot, load_snapshot
from .model import HullWhiteDual
from .moment_matching import (
    DEFAULT_MATCH_PATHS,
    compare,
    load_continuous_example,
    load_dsge_example,
    matching_residuals,
)
from .monte_carlo import SimConfig, dump_paths, simulate
from .scenarios import inflation_delta, run_hedge_scenario, run_stress, trade_payoff, trade_pv
from .support.documents import HedgeDocument, ModelFunctionsDocument, StressDocument, StructuralParamsDocument
from .support.store import get_bundled_file, get_output_dir

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_EMPTY = 0, 1, 2, 3
DEFAULT_SNAPSHOT = "market_2012-12-07.csv"
DEFAULT_STRUCTURAL = "structural_params.json"
DEFAULT_DSGE_EXAMPLE = "moment_match_dsge.json"
DEFAULT_CONTINUOUS_EXAMPLE = "moment_match_continuous.json"
DEFAULT_CLI_PATHS = 20_000

D = TypeVar("D", bound=BaseModel)


class RunConfig(BaseModel):
    """Input files and output settings shared by every command."""

    model_config = ConfigDict(extra="forbid")

    command: str
    snapshot: Optional[Path] = None
    structural: Optional[Path] = None
    config: Optional[Path] = None
    model: Optional[Path] = None
    trades: Optional[Path] = None
    out: Optional[str] = None
    run: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV  # noqa: A003

    @model_validator(mode="after")
    def _files_exist(self: Self) -> Self:
        for name in ("snapshot", "structural", "config", "model", "trades"):
            path = getattr(self, name)
            if path is not None and not path.is_file():
                raise ValueError(f"--{name} file not found: {path}")
        return self

    @classmethod
    def from_args(cls: type[Self], args: argparse.Namespace) -> Self:
        """Collect the file options, falling back to the bundled reference data."""
        snapshot = args.snapshot or get_bundled_file(DEFAULT_SNAPSHOT)
        structural = args.structural or get_bundled_file(DEFAULT_STRUCTURAL)
        return cls(
            command=args.command,
            snapshot=snapshot,
            structural=structural,
            config=getattr(args, "config", None),
            model=getattr(args, "model", None),
            trades=getattr(args, "trades", None),
            out=args.out,
            run=args.run,
            format=args.format,
        )

    def output_dir(self: Self) -> Path:
        """Directory the command writes to; created on demand."""
        return get_output_dir(self.command, self.out, self.run)


def _read_document(path: Path, document: type[D]) -> D:
    log.debug("Reading %s from %s", document.__name__, path)
    return document.model_validate_json(path.read_text())


def _structural(run: RunConfig) -> StructuralParams:
    return _read_document(run.structural, StructuralParamsDocument).to_domain()


def _calib_config(run: RunConfig) -> CalibConfig:
    return _read_document(run.config, CalibConfig) if run.config else CalibConfig()


def _model(run: RunConfig, snapshot: MarketSnapshot, structural: StructuralParams) -> ModelFunctions:
    """Model functions from --model, else a fresh calibration on the snapshot."""
    if run.model is not None:
        return _read_document(run.model, ModelFunctionsDocument).to_domain(structural)
    log.info("No --model given; calibrating on %s", run.snapshot)
    return calibrate(snapshot, structural, _calib_config(run)).raise_for_residuals().funcs


def _write_table(frame: pd.DataFrame, run: RunConfig, stem: str) -> Path:
    path = run.output_dir() / f"{stem}.{run.format.value}"
    if run.format is OutputFormat.JSON:
        path.write_text(frame.to_json(orient="records", indent=2))
    else:
        frame.to_csv(path, index=False)
    log.info("Wrote %s", path)
    return path


def cmd_calibrate(args: argparse.Namespace) -> int:
    """Calibrate on a snapshot and write the model functions, residuals and report."""
    run = RunConfig.from_args(args)
    config = _calib_config(run)
    result = calibrate(load_snapshot(run.snapshot), _structural(run), config)
    paths = write_calibration(result, run.output_dir())
    for message in result.diagnostics:
        print(f"diagnostic: {message}")
    print(f"max abs reprice error {result.max_abs_error:.3e} (tolerance {config.residual_tol:.0e})")
    print("\n".join(f"wrote {p}" for p in paths))
    return EXIT_OK if result.converged() else EXIT_FAILED


def _trade_from_args(args: argparse.Namespace) -> Trade:
    return Trade(
        product=Product(args.product),
        maturity=args.maturity,
        strike=args.strike,
        kind=args.kind,
        start=args.start,
        frequency=args.frequency,
        notional=args.notional,
        position=args.position,
    )


def cmd_price(args: argparse.Namespace) -> int:
    """Closed-form price of one trade, optionally cross-checked by Monte Carlo."""
    run = RunConfig.from_args(args)
    snapshot, structural = load_snapshot(run.snapshot), _structural(run)
    funcs = _model(run, snapshot, structural)
    trade = _trade_from_args(args)
    row = {"trade": trade.name, "pv": trade_pv(trade, funcs, structural, snapshot.nominal)}
    if args.mc:
        config = SimConfig(n_paths=args.paths or DEFAULT_CLI_PATHS, horizon=trade.maturity, seed=args.seed)
        paths = simulate(funcs, structural, config)
        dual = HullWhiteDual.from_model(snapshot.nominal, structural, funcs)
        estimate = Estimate.from_samples(trade_payoff(trade, paths, dual))
        row |= {"mc_pv": estimate.value, "mc_stderr": estimate.stderr, "z_score": estimate.z_score(row["pv"])}
    frame = pd.DataFrame([row])
    print(frame.to_string(index=False))
    _write_table(frame, run, "price")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """Simulate the economy and write the paths with per-date averages."""
    run = RunConfig.from_args(args)
    snapshot, structural = load_snapshot(run.snapshot), _structural(run)
    funcs = _model(run, snapshot, structural)
    config = _read_document(args.sim_config, SimConfig) if args.sim_config else SimConfig()
    overrides = {"n_paths": args.paths, "seed": args.seed if args.seed_given else None}
    config = SimConfig.model_validate(config.model_dump() | {k: v for k, v in overrides.items() if v is not None})
    paths = simulate(funcs, structural, config)
    dump_paths(paths, run.output_dir() / "paths.csv")
    later = paths.times[1:]
    summary = pd.DataFrame(
        {
            "time": later,
            "mean_short_rate": [paths.short_rate(t).mean() for t in later],
            "mean_inflation_rate": [paths.inflation_rate(t).mean() for t in later],
            "mean_growth_rate": [paths.growth_rate(t).mean() for t in later],
        }
    )
    print(summary.to_string(index=False))
    _write_table(summary, run, "summary")
    return EXIT_OK


def cmd_stress(args: argparse.Namespace) -> int:
    """Recalibrate under each shock scenario and report PVs and inflation deltas."""
    run = RunConfig.from_args(args)
    if run.trades is None:
        raise ValueError("stress needs --trades with a trade list")
    document = _read_document(run.trades, StressDocument)
    scenarios = dict(document.scenarios)
    if args.shock:
        scenarios["command_line"] = args.shock
    trades = [trade.to_domain() for trade in document.trades]
    report = run_stress(load_snapshot(run.snapshot), _structural(run), trades, scenarios, _calib_config(run))
    print(report.to_string(index=False))
    _write_table(report, run, "stress")
    return EXIT_OK


def cmd_hedge(args: argparse.Namespace) -> int:
    """Rank hedge candidates by their payoff per unit premium on the paths meeting --condition."""
    run = RunConfig.from_args(args)
    if run.trades is None:
        raise ValueError("hedge needs --trades with the client trade and candidates")
    document = _read_document(run.trades, HedgeDocument)
    snapshot, structural = load_snapshot(run.snapshot), _structural(run)
    funcs = _model(run, snapshot, structural)
    report = run_hedge_scenario(
        funcs,
        structural,
        snapshot.nominal,
        document.client.to_domain(),
        [trade.to_domain() for trade in document.candidates],
        args.condition,
        SimConfig(n_paths=args.paths or DEFAULT_CLI_PATHS, seed=args.seed),
    )
    print(f"{report.scenario.selected} of {report.scenario.total} paths meet '{args.condition}'")
    print(report.scenario.statistics.to_string(index=False))
    print(report.candidates.to_string(index=False))
    for message in report.warnings:
        print(f"warning: {message}")
    _write_table(report.scenario.statistics, run, "conditional_statistics")
    _write_table(report.candidates, run, "hedge_candidates")
    return EXIT_OK


def cmd_inflation_delta(args: argparse.Namespace) -> int:
    """PV change per basis point of breakeven shift for the trades in --trades."""
    run = RunConfig.from_args(args)
    if run.trades is None:
        raise ValueError("delta needs --trades with a trade list")
    trades = [trade.to_domain() for trade in _read_document(run.trades, StressDocument).trades]
    structural, config = _structural(run), _calib_config(run)
    result = calibrate(load_snapshot(run.snapshot), structural, config).raise_for_residuals()
    deltas = inflation_delta(trades, result, structural, config, args.bp)
    frame = pd.DataFrame({"trade": list(deltas), "inflation_delta": list(deltas.values())})
    print(frame.to_string(index=False))
    _write_table(frame, run, "inflation_delta")
    return EXIT_OK


def cmd_moment_match(args: argparse.Namespace) -> int:
    """Compare one-period statistics of the toy economy and the continuous-time model."""
    run = RunConfig.from_args(args)
    dsge = load_dsge_example(args.dsge or get_bundled_file(DEFAULT_DSGE_EXAMPLE))
    continuous = load_continuous_example(args.continuous or get_bundled_file(DEFAULT_CONTINUOUS_EXAMPLE))
    table = compare(dsge, continuous, args.paths or DEFAULT_MATCH_PATHS, args.seed)
    residuals = matching_residuals(dsge, continuous)
    with pd.option_context("display.float_format", "{:.4%}".format):
        print(table.to_string())
    print("\n".join(f"{name} residual: {value:.6g}" for name, value in residuals.items()))
    _write_table(table.reset_index(), run, "moments")
    _write_table(pd.DataFrame([residuals]), run, "matching_residuals")
    return EXIT_OK


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--snapshot", type=Path, help="Market snapshot CSV or JSON (default: bundled Dec 2012)")
    parent.add_argument("--structural", type=Path, help="Structural parameters JSON (default: bundled)")
    parent.add_argument("--config", type=Path, help="Calibration config JSON")
    parent.add_argument("--out", help="Output directory (default: $CTCB_DATA/<command>)")
    parent.add_argument("--run", help="Run name, a subdirectory of the command's store when --out is not given")
    parent.add_argument("--format", type=OutputFormat, choices=list(OutputFormat), default=OutputFormat.CSV)
    parent.add_argument("--seed", type=int, help="Random seed")
    parent.add_argument("--paths", type=int, help="Monte Carlo paths")
    parent.add_argument("--log-level", help="Logging level (default: $CTCB_LOG_LEVEL or WARNING)")
    return parent


def _trade_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--product", required=True, choices=[p.value for p in Product])
    parser.add_argument("--maturity", type=float, required=True, help="Final payment date in years")
    parser.add_argument("--strike", type=float, required=True, help="Strike as a decimal rate")
    parser.add_argument("--kind", help="call/put or payer/receiver; implied for caplets, floorlets, caps and floors")
    parser.add_argument("--start", type=float, help="Fixing date or swaption expiry in years")
    parser.add_argument("--frequency", type=float, default=1.0)
    parser.add_argument("--notional", type=float, default=1.0)
    parser.add_argument("--position", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    """Parser for every ctcb command."""
    parser = argparse.ArgumentParser(prog="ctcb", description=ctcb.__summary__)
    parser.add_argument("--version", action="version", version=f"ctcb {ctcb.__version_str__}")
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    calib = commands.add_parser("calibrate", parents=[common], help=cmd_calibrate.__doc__)
    calib.set_defaults(handler=cmd_calibrate)

    price = commands.add_parser("price", parents=[common], help=cmd_price.__doc__)
    price.add_argument("--model", type=Path, help="Model functions JSON (default: calibrate on the snapshot)")
    price.add_argument("--mc", action="store_true", help="Add a Monte Carlo estimate and its z-score")
    _trade_options(price)
    price.set_defaults(handler=cmd_price)

    sim = commands.add_parser("simulate", parents=[common], help=cmd_simulate.__doc__)
    sim.add_argument("--model", type=Path, help="Model functions JSON (default: calibrate on the snapshot)")
    sim.add_argument("--sim-config", type=Path, help="Simulation config JSON")
    sim.set_defaults(handler=cmd_simulate)

    stress = commands.add_parser("stress", parents=[common], help=cmd_stress.__doc__)
    stress.add_argument("--trades", type=Path, required=True, help="Trades and scenarios JSON")
    stress.add_argument("--shock", action="append", help="key=value or key=*value; repeatable, forms one scenario")
    stress.set_defaults(handler=cmd_stress)

    delta = commands.add_parser("delta", parents=[common], help=cmd_inflation_delta.__doc__)
    delta.add_argument("--trades", type=Path, required=True, help="Trades JSON")
    delta.add_argument("--bp", type=float, default=1.0, help="Breakeven bump in basis points")
    delta.set_defaults(handler=cmd_inflation_delta)

    hedge = commands.add_parser("hedge", parents=[common], help=cmd_hedge.__doc__)
    hedge.add_argument("--model", type=Path, help="Model functions JSON (default: calibrate on the snapshot)")
    hedge.add_argument("--trades", type=Path, required=True, help="Client trade and hedge candidates JSON")
    hedge.add_argument("--condition", required=True, help="Path condition such as 'inflation@10<0'")
    hedge.set_defaults(handler=cmd_hedge)

    moments = commands.add_parser("moment-match", parents=[common], help=cmd_moment_match.__doc__)
    moments.add_argument("--dsge", type=Path, help="Toy-economy example JSON (default: bundled)")
    moments.add_argument("--continuous", type=Path, help="Continuous-time example JSON (default: bundled)")
    moments.set_defaults(handler=cmd_moment_match)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Run one command and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    setup.init(args.log_level)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = SimConfig().seed
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except EmptySelectionError as e:
        log.error("%s: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EMPTY
    except SolverError as e:
        log.error("%s: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED
    except (CtcbError, ValidationError, ValueError, FileNotFoundError) as e:
        log.error("%s: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
