"""Stress tests and scenario-driven hedging on top of the calibrated model."""

import logging as log
from dataclasses import dataclass, field, replace
from typing import Optional, Self

import numpy as np
import pandas as pd
from opentelemetry import trace

import ctcb

from .calibration import CalibConfig, CalibLog, CalibResult, calibrate, derive_growth_drift, fit_breakevens
from .config import Measure, OptionKind, Product, SwaptionKind
from .domain import ModelFunctions, StepFunction, StructuralParams, Trade
from .errors import CtcbError, ModelError
from .inflation_pricing import inflation_delta as breakeven_delta
from .inflation_pricing import yoy_option, zc_option, zciis_value
from .ir_pricing import SwapSchedule, cap_floor, caplet_floorlet, swaption
from .market_data import MarketSnapshot, NominalCurve
from .model import HullWhiteDual
from .monte_carlo import ScenarioReport, SimConfig, SimPaths, conditional_scenario, forward_libor_paths, simulate

tracer = trace.get_tracer(__name__, ctcb.__version_str__)

STRUCTURAL_KEYS = ("delta", "Omega", "h_x", "h_p", "x_bar", "p_bar")
CURVE_KEYS = ("nominal", "breakeven")


def _option_kind(trade: Trade) -> OptionKind:
    defaults = {Product.CAPLET: OptionKind.CALL, Product.CAP: OptionKind.CALL}
    defaults |= {Product.FLOORLET: OptionKind.PUT, Product.FLOOR: OptionKind.PUT}
    if trade.product in defaults:
        return defaults[trade.product]
    return OptionKind(trade.kind or OptionKind.CALL.value)


def _fixing(trade: Trade) -> float:
    """Fixing date of single-period products."""
    return trade.maturity - trade.frequency if trade.start is None else trade.start


def _schedule(trade: Trade) -> SwapSchedule:
    """Periods of caps, floors and the swaption's underlying swap."""
    start = trade.frequency if trade.start is None else trade.start
    if trade.product is Product.SWAPTION and trade.start is None:
        raise ModelError("A swaption needs its expiry as the trade start")
    return SwapSchedule.regular(start, trade.maturity - start, trade.strike, trade.frequency)


def trade_pv(trade: Trade, funcs: ModelFunctions, structural: StructuralParams, curve: NominalCurve) -> float:
    """Closed-form present value including notional and position."""
    dual = HullWhiteDual.from_model(curve, structural, funcs)
    T, K = trade.maturity, trade.strike
    match trade.product:
        case Product.ZC_OPTION:
            pv = zc_option(0.0, T, K, _option_kind(trade), funcs, structural, curve).discounted
        case Product.YOY_OPTION:
            pv = yoy_option(0.0, _fixing(trade), T, K, _option_kind(trade), funcs, structural, curve).discounted
        case Product.ZCIIS:
            pv = zciis_value(0.0, T, K, 1.0, funcs, structural, curve)
        case Product.CAPLET | Product.FLOORLET:
            pv = caplet_floorlet(_option_kind(trade), 0.0, _fixing(trade), T, K, 1.0, curve, dual)
        case Product.CAP | Product.FLOOR:
            pv = cap_floor(_option_kind(trade), 0.0, _schedule(trade), K, 1.0, curve, dual)
        case Product.SWAPTION:
            pv = swaption(SwaptionKind(trade.kind or SwaptionKind.PAYER.value), _schedule(trade), curve, dual)
    return trade.position * trade.notional * pv


def trade_payoff(trade: Trade, paths: SimPaths, dual: HullWhiteDual) -> np.ndarray:
    """Per-path cash flows discounted with the simulated bank account, including notional and position."""
    if paths.measure is not Measure.Q:
        raise ModelError("Path-wise trade payoffs are discounted with the bank account and need Q paths")
    T, K = trade.maturity, trade.strike
    match trade.product:
        case Product.ZC_OPTION:
            flow = np.maximum(_option_kind(trade).omega * (paths.index_ratio(T) - (1.0 + K) ** T), 0.0)
            value = paths.bank_discount(T) * flow
        case Product.YOY_OPTION:
            ratio = paths.index_ratio(T) / paths.index_ratio(_fixing(trade))
            value = paths.bank_discount(T) * np.maximum(_option_kind(trade).omega * (ratio - 1.0 - K), 0.0)
        case Product.ZCIIS:
            value = paths.bank_discount(T) * (paths.index_ratio(T) - (1.0 + K) ** T)
        case Product.CAPLET | Product.FLOORLET:
            value = _period_payoff(paths, dual, _fixing(trade), T, K, _option_kind(trade))
        case Product.CAP | Product.FLOOR:
            schedule = _schedule(trade)
            starts = np.concatenate(([schedule.expiry], schedule.payment_times[:-1]))
            value = sum(
                _period_payoff(paths, dual, T1, T2, K, _option_kind(trade))
                for T1, T2 in zip(starts, schedule.payment_times, strict=True)
            )
        case Product.SWAPTION:
            schedule = _schedule(trade)
            bonds = dual.bond_price(schedule.expiry, schedule.payment_times, paths.short_rate(schedule.expiry))
            omega = 1.0 if SwaptionKind(trade.kind or SwaptionKind.PAYER.value) is SwaptionKind.PAYER else -1.0
            value = paths.bank_discount(schedule.expiry) * np.maximum(omega * (1.0 - bonds @ schedule.coupons), 0.0)
    return trade.position * trade.notional * np.asarray(value)


def _period_payoff(
    paths: SimPaths, dual: HullWhiteDual, T1: float, T2: float, K: float, kind: OptionKind
) -> np.ndarray:
    tau = T2 - T1
    if tau <= 0:
        raise ModelError(f"Accrual period must be positive, got [{T1}, {T2}]")
    libor = forward_libor_paths(paths, dual, T1, tau)
    return paths.bank_discount(T2) * tau * np.maximum(kind.omega * (libor - K), 0.0)


def _parse_assignment(assignment: str) -> tuple[str, bool, float]:
    """``key=value`` (additive) or ``key=*value`` (multiplicative)."""
    key, sep, raw = assignment.partition("=")
    key, raw = key.strip(), raw.strip()
    if not sep or not raw:
        raise ModelError(f"Shock '{assignment}' is not of the form key=value or key=*value")
    multiplicative = raw.startswith("*")
    try:
        value = float(raw.lstrip("*"))
    except ValueError as e:
        raise ModelError(f"Shock '{assignment}' has a non-numeric value") from e
    if key not in STRUCTURAL_KEYS + CURVE_KEYS:
        raise ModelError(f"Unknown shock key '{key}'; expected one of {STRUCTURAL_KEYS + CURVE_KEYS}")
    if multiplicative and key in CURVE_KEYS:
        raise ModelError(f"Curve shock '{key}' is a parallel shift and cannot be multiplicative")
    return key, multiplicative, value


def apply_shock(
    structural: StructuralParams, snapshot: MarketSnapshot, assignments: list[str]
) -> tuple[StructuralParams, MarketSnapshot]:
    """Shocked structural parameters and curves; curve shocks are parallel shifts in decimals."""
    changes: dict[str, float] = {}
    shifts = {"nominal": 0.0, "breakeven": 0.0}
    for assignment in assignments:
        key, multiplicative, value = _parse_assignment(assignment)
        if key in CURVE_KEYS:
            shifts[key] += value
            continue
        current = changes.get(key, getattr(structural, key))
        changes[key] = current * value if multiplicative else current + value
    log.debug("Shock %s: structural %s, curve shifts %s", assignments, changes, shifts)
    shocked = structural.shocked(**changes) if changes else structural
    if shifts["nominal"] or shifts["breakeven"]:
        snapshot = snapshot.shifted(nominal=shifts["nominal"], breakeven=shifts["breakeven"])
    return shocked, snapshot


def refit_breakevens(
    snapshot: MarketSnapshot, structural: StructuralParams, funcs: ModelFunctions, config: Optional[CalibConfig] = None
) -> ModelFunctions:
    """Model functions with a_I refitted to the snapshot's breakevens and every volatility held.

    The growth drift is derived again so the economy keeps repricing the nominal curve.
    """
    config = config or CalibConfig()
    calib_log = CalibLog()
    a_I = fit_breakevens(snapshot, structural, funcs, config, calib_log)
    funcs = funcs.replace(a_I=StepFunction(np.arange(a_I.size, dtype=float), a_I))
    a_X = derive_growth_drift(snapshot, structural, funcs, config.growth_drift, config, calib_log)
    return funcs.replace(a_X=a_X).with_derived(structural)


def inflation_delta(
    trades: list[Trade],
    result: CalibResult,
    structural: StructuralParams,
    config: Optional[CalibConfig] = None,
    bp: float = 1.0,
) -> dict[str, float]:
    """PV change per basis point of a parallel breakeven shift, inflation drift refitted and volatilities held."""
    deltas = {}
    for trade in trades:

        def price(snapshot: MarketSnapshot, trade: Trade = trade) -> float:
            funcs = refit_breakevens(snapshot, structural, result.funcs, config)
            return trade_pv(trade, funcs, structural, snapshot.nominal)

        deltas[trade.name] = breakeven_delta(price, result.snapshot, bp)
    return deltas


@tracer.start_as_current_span("run_stress")
def run_stress(
    snapshot: MarketSnapshot,
    structural: StructuralParams,
    trades: list[Trade],
    scenarios: dict[str, list[str]],
    config: Optional[CalibConfig] = None,
) -> pd.DataFrame:
    """Recalibrate under each scenario and reprice the trades next to the base run.

    Failures, a calibration outside tolerance included, are reported in the ``status`` column of the
    failing scenario and the run carries on. A failing base run raises.
    """
    if not trades:
        raise ModelError("A stress run needs at least one trade")
    rows = []
    base: dict[str, tuple[float, float]] = {}
    for name, assignments in {"base": [], **scenarios}.items():
        try:
            shocked, shocked_snapshot = apply_shock(structural, snapshot, assignments)
            result = calibrate(shocked_snapshot, shocked, config).raise_for_residuals()
            deltas = inflation_delta(trades, result, shocked, config)
            for trade in trades:
                pv = trade_pv(trade, result.funcs, shocked, result.snapshot.nominal)
                if name == "base":
                    base[trade.name] = (pv, deltas[trade.name])
                base_pv, base_delta = base.get(trade.name, (np.nan, np.nan))
                rows.append(
                    {
                        "scenario": name,
                        "trade": trade.name,
                        "pv": pv,
                        "inflation_delta": deltas[trade.name],
                        "base_pv": base_pv,
                        "base_inflation_delta": base_delta,
                        "pv_change": pv - base_pv,
                        "max_calibration_error": result.max_abs_error,
                        "status": "ok",
                    }
                )
            trace.get_current_span().add_event("scenario done", {"scenario": name})
        except (CtcbError, ValueError) as e:
            log.error("Stress scenario %s failed: %s", name, e)
            if name == "base":
                raise
            rows.extend({"scenario": name, "trade": trade.name, "status": f"failed: {e}"} for trade in trades)
    return pd.DataFrame(rows)


@dataclass(frozen=True, eq=False)
class HedgeReport:
    """Conditional statistics of the client trade, the candidates and the Libor fixings."""

    scenario: ScenarioReport
    candidates: pd.DataFrame
    """trade, premium, conditional_payoff, payoff_per_premium, hedge_ratio, rank."""
    warnings: list[str] = field(default_factory=list)

    @property
    def best(self: Self) -> str:
        """Candidate with the highest conditional payoff per unit premium."""
        return str(self.candidates.iloc[0]["trade"])


@tracer.start_as_current_span("run_hedge_scenario")
def run_hedge_scenario(
    funcs: ModelFunctions,
    structural: StructuralParams,
    curve: NominalCurve,
    client: Trade,
    candidates: list[Trade],
    condition: str,
    sim_config: SimConfig,
) -> HedgeReport:
    """Simulate under Q and compare hedge candidates on the paths meeting ``condition``.

    The hedge ratio of a candidate is the conditional mean of the client's discounted payoff over the
    candidate's; holding minus that many units offsets the client trade on average in the scenario.

    Raises:
        ModelError: no candidates, or a simulation measure other than Q.
        EmptySelectionError: no path meets the condition.
    """
    if not candidates:
        raise ModelError("A hedge scenario needs at least one hedge candidate")
    if sim_config.measure is not Measure.Q:
        raise ModelError("Hedge scenarios are simulated under Q")
    horizon = max(t.maturity for t in [client, *candidates])
    if sim_config.grid is None and sim_config.horizon < horizon:
        sim_config = sim_config.model_copy(update={"horizon": horizon})
    paths = simulate(funcs, structural, sim_config)
    dual = HullWhiteDual.from_model(curve, structural, funcs)

    target = trade_payoff(client, paths, dual)
    fixings = np.arange(1.0, np.floor(horizon))
    quantities = {f"libor_{t:g}y": forward_libor_paths(paths, dual, float(t)) for t in fixings}
    quantities[client.name] = target
    payoffs = {trade.name: trade_payoff(trade, paths, dual) for trade in candidates}
    quantities.update(payoffs)
    report = conditional_scenario(paths, condition, quantities)

    means = report.statistics.set_index("quantity")["conditional_mean"]
    rows = []
    warnings = list(report.warnings)
    for trade in candidates:
        premium = trade_pv(trade, funcs, structural, curve)
        conditional = float(means[trade.name])
        ratio = float(means[client.name]) / conditional if conditional != 0.0 else np.nan
        if conditional == 0.0:
            warnings.append(f"{trade.name} pays nothing in the scenario; no hedge ratio")
        rows.append(
            {
                "trade": trade.name,
                "premium": premium,
                "conditional_payoff": conditional,
                "payoff_per_premium": conditional / premium if premium != 0.0 else np.nan,
                "hedge_ratio": ratio,
            }
        )
    table = pd.DataFrame(rows).sort_values("payoff_per_premium", ascending=False, na_position="last")
    table["rank"] = np.arange(1, len(table) + 1)
    log.info("Hedge scenario '%s': %s of %s paths selected", condition, report.selected, report.total)
    return HedgeReport(replace(report, warnings=warnings), table.reset_index(drop=True), warnings)
