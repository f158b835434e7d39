"""Monte Carlo simulation of the economy and pricing of path functionals.

All model coefficients are deterministic step functions, so the state
(m_I, log I, m_X, log X, ∫n) is conditionally Gaussian step to step. Each step is
drawn from its exact law; there is no discretisation bias.
"""

import logging as log
import operator
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Self

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from opentelemetry import trace
from pydantic import BaseModel, ConfigDict, Field, model_validator

import ctcb

from .config import ENV_VAR_CTCB_THREADS, Measure, OptionKind, SwaptionKind
from .constants import DEFAULT_BLOCK_SIZE, DEFAULT_PATHS, DEFAULT_SEED, INTEGRATION_STEP, MIN_CONDITIONAL_PATHS
from .domain import Estimate, ModelFunctions, StructuralParams
from .errors import EmptySelectionError, ModelError
from .inflation_pricing import JumpSpec
from .ir_pricing import LognormalLaw, SwapSchedule
from .market_data import NominalCurve
from .model import HullWhiteDual, bond_vol_function, inverse_zeta_integral, short_rate_from_drifts
from .support.quadrature import midpoint_grid

tracer = trace.get_tracer(__name__, ctcb.__version_str__)

STATE = ("m_I", "log_index", "m_X", "log_growth", "log_bank")
M_I, LOG_INDEX, M_X, LOG_GROWTH, LOG_BANK = range(len(STATE))


class SimConfig(BaseModel):
    """Simulation settings."""

    model_config = ConfigDict(extra="forbid")

    n_paths: int = Field(default=DEFAULT_PATHS, ge=2)
    horizon: float = Field(default=10.0, gt=0)
    grid: Optional[list[float]] = None
    """Explicit simulation times; an annual grid to ``horizon`` when omitted."""
    steps_per_year: int = Field(default=1, ge=1)
    seed: int = DEFAULT_SEED
    measure: Measure = Measure.Q
    forward_maturity: Optional[float] = None
    """T* of the forward measure."""
    antithetic: bool = False
    block_size: int = Field(default=DEFAULT_BLOCK_SIZE, ge=2)
    threads: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check(self: Self) -> Self:
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float)
            if grid.size == 0 or grid[0] < 0 or np.any(np.diff(grid) <= 0):
                raise ValueError("grid must be strictly increasing and non-negative")
        if self.measure is Measure.FORWARD:
            if self.forward_maturity is None:
                raise ValueError("the forward measure needs forward_maturity")
            if self.times()[-1] > self.forward_maturity + 1e-12:
                raise ValueError("the simulation grid must end at or before forward_maturity")
        if self.antithetic and (self.n_paths % 2 or self.block_size % 2):
            raise ValueError("antithetic sampling needs even n_paths and block_size")
        return self

    def times(self: Self) -> np.ndarray:
        """Simulation times starting at 0."""
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float)
            return grid if grid[0] == 0.0 else np.concatenate(([0.0], grid))
        n = int(np.ceil(self.horizon * self.steps_per_year - 1e-9))
        return np.minimum(np.arange(n + 1) / self.steps_per_year, self.horizon)

    def worker_count(self: Self) -> int:
        """Threads from the config, else CTCB_THREADS, else 1."""
        return self.threads or int(os.environ.get(ENV_VAR_CTCB_THREADS, "1"))


@dataclass(frozen=True, eq=False)
class StepLaw:
    """x(t1) = transition @ x(t0) + mean + root @ N(0, I)."""

    t0: float
    t1: float
    transition: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    root: np.ndarray


def _drift_kappa(
    nodes: np.ndarray,
    funcs: ModelFunctions,
    structural: StructuralParams,
    measure: Measure,
    forward_maturity: Optional[float],
) -> np.ndarray:
    """Drift of the Brownian motion: 0 under P, -λ under Q, σ_P(·,T*) - λ under the T*-forward measure."""
    if measure is Measure.P:
        return np.zeros((nodes.size, funcs.dim))
    kappa = -funcs.lam(nodes)
    if measure is Measure.FORWARD:
        if forward_maturity is None:
            raise ModelError("The forward measure needs a maturity")
        kappa = kappa + bond_vol_function(structural, funcs)(nodes, forward_maturity)
    return kappa


def step_law(
    t0: float,
    t1: float,
    funcs: ModelFunctions,
    structural: StructuralParams,
    measure: Measure = Measure.Q,
    forward_maturity: Optional[float] = None,
    step: float = INTEGRATION_STEP,
) -> StepLaw:
    """Exact Gaussian law of the state at t1 given the state at t0."""
    if t1 <= t0:
        raise ModelError(f"Step needs t0 < t1, got {t0}, {t1}")
    h_p, h_x, dt = structural.h_p, structural.h_x, t1 - t0
    nodes, weights = midpoint_grid(t0, t1, step)
    b_I, b_X, s_I, s_X = funcs.b_I(nodes), funcs.b_X(nodes), funcs.s_I(nodes), funcs.s_X(nodes)
    kappa = _drift_kappa(nodes, funcs, structural, measure, forward_maturity)
    d_I = funcs.a_I(nodes) + np.einsum("ij,ij->i", b_I, kappa)
    d_X = funcs.a_X(nodes) + np.einsum("ij,ij->i", b_X, kappa)
    remaining = (t1 - nodes)[:, None]
    kernel = inverse_zeta_integral(nodes, t1, structural)

    loadings = np.stack(
        [b_I, remaining * b_I + s_I, b_X, remaining * b_X + s_X, -kernel[:, None] * (h_p * b_I + h_x * b_X)], axis=1
    )
    cov = np.einsum("k,kin,kjn->ij", weights, loadings, loadings)
    mean = np.array(
        [
            weights @ d_I,
            weights @ (remaining[:, 0] * d_I + np.einsum("ij,ij->i", s_I, kappa) - 0.5 * np.sum(s_I**2, axis=1)),
            weights @ d_X,
            weights @ (remaining[:, 0] * d_X + np.einsum("ij,ij->i", s_X, kappa) - 0.5 * np.sum(s_X**2, axis=1)),
            -(weights @ (kernel * (h_p * d_I + h_x * d_X))),
        ]
    )
    z0 = float(inverse_zeta_integral(t0, t1, structural))
    transition = np.eye(len(STATE))
    transition[LOG_INDEX, M_I] = dt
    transition[LOG_GROWTH, M_X] = dt
    transition[LOG_BANK, M_I] = -z0 * h_p
    transition[LOG_BANK, M_X] = -z0 * h_x

    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    return StepLaw(t0, t1, transition, mean, cov, root)


@dataclass(frozen=True, eq=False)
class SimPaths:
    """Simulated states, shape (paths, times, 5) in the order of ``STATE``."""

    times: np.ndarray
    state: np.ndarray
    structural: StructuralParams
    measure: Measure
    forward_maturity: Optional[float] = None
    antithetic: bool = False

    @property
    def n_paths(self: Self) -> int:
        """Number of paths."""
        return self.state.shape[0]

    def column(self: Self, t: float) -> int:
        """Grid index of time t."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9:
            raise ModelError(f"Time {t} is not on the simulation grid {self.times.tolist()}")
        return idx

    def value(self: Self, name: str, t: float) -> np.ndarray:
        """State variable ``name`` at time t across paths."""
        return self.state[:, self.column(t), STATE.index(name)]

    def index_ratio(self: Self, t: float) -> np.ndarray:
        """I(t)/I(0)."""
        return np.exp(self.value("log_index", t))

    def growth_ratio(self: Self, t: float) -> np.ndarray:
        """X(t)/X(0)."""
        return np.exp(self.value("log_growth", t))

    def short_rate(self: Self, t: float) -> np.ndarray:
        """n(t) from the expected drifts."""
        return short_rate_from_drifts(t, self.value("m_I", t), self.value("m_X", t), self.structural)

    def bank_discount(self: Self, t: float) -> np.ndarray:
        """exp(-∫_0^t n)."""
        return np.exp(-self.value("log_bank", t))

    def inflation_rate(self: Self, t: float) -> np.ndarray:
        """Annualised realised inflation (I(t)/I(0))^{1/t} - 1."""
        return np.expm1(self.value("log_index", t) / t)

    def growth_rate(self: Self, t: float) -> np.ndarray:
        """Annualised realised growth."""
        return np.expm1(self.value("log_growth", t) / t)


def _simulate_block(
    laws: list[StepLaw], x0: np.ndarray, n: int, seed: int, block: int, antithetic: bool
) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    out = np.empty((n, len(laws) + 1, len(STATE)))
    out[:, 0] = x0
    for k, law in enumerate(laws):
        if antithetic:
            half = rng.standard_normal((n // 2, len(STATE)))
            draws = np.empty((n, len(STATE)))
            draws[0::2], draws[1::2] = half, -half
        else:
            draws = rng.standard_normal((n, len(STATE)))
        out[:, k + 1] = out[:, k] @ law.transition.T + law.mean + draws @ law.root.T
    return out


@tracer.start_as_current_span("simulate")
def simulate(funcs: ModelFunctions, structural: StructuralParams, config: SimConfig) -> SimPaths:
    """Simulate the economy on the configured grid.

    Paths are produced in blocks; block b draws from the stream SeedSequence(seed, spawn_key=(b,)), so the
    result does not depend on the number of threads.
    """
    times = config.times()
    laws = [
        step_law(t0, t1, funcs, structural, config.measure, config.forward_maturity)
        for t0, t1 in zip(times[:-1], times[1:], strict=True)
    ]
    x0 = np.array([funcs.m_I0, 0.0, funcs.m_X0, 0.0, 0.0])
    sizes = [min(config.block_size, config.n_paths - start) for start in range(0, config.n_paths, config.block_size)]
    log.info(
        "Simulating %s paths on %s steps under %s in %s blocks",
        config.n_paths,
        len(laws),
        config.measure.value,
        len(sizes),
    )
    blocks = Parallel(n_jobs=config.worker_count(), prefer="threads")(
        delayed(_simulate_block)(laws, x0, n, config.seed, b, config.antithetic) for b, n in enumerate(sizes)
    )
    trace.get_current_span().add_event("simulated", {"paths": config.n_paths, "steps": len(laws)})
    return SimPaths(
        times, np.concatenate(blocks, axis=0), structural, config.measure, config.forward_maturity, config.antithetic
    )


@dataclass(frozen=True)
class SimResult:
    """Monte Carlo price of one instrument."""

    name: str
    pv: float
    standard_error: float
    n_paths: int


Payoff = Callable[[SimPaths], np.ndarray]
"""Per-path cash flow, paid at a fixed time."""


def _pair_means(values: np.ndarray, antithetic: bool) -> np.ndarray:
    return values.reshape(-1, 2).mean(axis=1) if antithetic else values


def price_mc(
    payoff: Payoff,
    pay_time: float,
    paths: SimPaths,
    curve: Optional[NominalCurve] = None,
    name: str = "payoff",
) -> SimResult:
    """Present value of ``payoff`` paid at ``pay_time``.

    Under the T*-forward measure the value is P(0,T*) times the sample mean and the payment must fall on T*;
    under Q each path is discounted with exp(-∫n).
    """
    values = np.asarray(payoff(paths), dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ModelError(f"Payoff '{name}' is not finite on path {bad[0]}")
    if paths.measure is Measure.P:
        raise ModelError("Prices need the risk-neutral or a forward measure, not P")
    if paths.measure is Measure.FORWARD:
        if abs(pay_time - paths.forward_maturity) > 1e-9:
            raise ModelError(
                f"Payment at {pay_time} does not match the forward measure maturity {paths.forward_maturity}"
            )
        if curve is None:
            raise ModelError("Forward-measure prices need the nominal curve")
        discounted = float(curve.discount(pay_time)) * values
    else:
        discounted = paths.bank_discount(pay_time) * values
    estimate = Estimate.from_samples(_pair_means(discounted, paths.antithetic))
    log.debug("MC %s: %s +- %s", name, estimate.value, estimate.stderr)
    return SimResult(name, estimate.value, estimate.stderr, paths.n_paths)


_CONDITION = re.compile(r"^\s*(inflation|rate|growth)\s*@\s*([0-9.]+)\s*(<=|>=|<|>)\s*([-+0-9.eE]+)\s*(%?)\s*$")
_OPERATORS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}

Condition = Callable[[SimPaths], np.ndarray]


def parse_condition(text: str) -> Condition:
    """Path predicate from ``quantity@horizon op value``, e.g. ``inflation@10<0``.

    inflation and growth are annualised realised rates up to the horizon, rate is n(horizon);
    a trailing % divides the value by 100.
    """
    match = _CONDITION.match(text)
    if match is None:
        raise ModelError(f"Cannot parse condition '{text}'; expected (inflation|rate|growth)@T (<|<=|>|>=) value")
    quantity, horizon, op, value, percent = match.groups()
    horizon_f, threshold = float(horizon), float(value) / (100.0 if percent else 1.0)
    if horizon_f <= 0:
        raise ModelError(f"Condition horizon must be > 0, got {horizon_f}")
    compare = _OPERATORS[op]

    def condition(paths: SimPaths) -> np.ndarray:
        if quantity == "inflation":
            observed = paths.inflation_rate(horizon_f)
        elif quantity == "growth":
            observed = paths.growth_rate(horizon_f)
        else:
            observed = paths.short_rate(horizon_f)
        return compare(observed, threshold)

    return condition


@dataclass(frozen=True, eq=False)
class ScenarioReport:
    """Statistics of path quantities on the paths meeting a condition."""

    selected: int
    total: int
    statistics: pd.DataFrame
    hedge_ratio: Optional[float] = None
    warnings: list[str] = field(default_factory=list)


def conditional_scenario(
    paths: SimPaths,
    condition: Condition | str,
    quantities: Mapping[str, np.ndarray],
    target: Optional[np.ndarray] = None,
    hedge: Optional[np.ndarray] = None,
    quantiles: tuple[float, ...] = (0.05, 0.5, 0.95),
) -> ScenarioReport:
    """Conditional and unconditional means and conditional quantiles of ``quantities``.

    With ``target`` and ``hedge`` payoffs the hedge ratio is the ratio of their conditional means.

    Raises:
        EmptySelectionError: no path meets the condition.
    """
    predicate = parse_condition(condition) if isinstance(condition, str) else condition
    mask = np.asarray(predicate(paths), dtype=bool)
    selected = int(mask.sum())
    if selected == 0:
        raise EmptySelectionError(f"Condition {condition!r} selects no path out of {paths.n_paths}")
    warnings = []
    if selected < MIN_CONDITIONAL_PATHS:
        message = f"Condition selects only {selected} paths; conditional statistics are noisy"
        log.warning(message)
        warnings.append(message)
    rows = []
    for name, values in quantities.items():
        values = np.asarray(values, dtype=float)
        row = {"quantity": name, "conditional_mean": values[mask].mean(), "unconditional_mean": values.mean()}
        row.update({f"q{round(q * 100):02d}": np.quantile(values[mask], q) for q in quantiles})
        rows.append(row)
    hedge_ratio = None
    if target is not None and hedge is not None:
        hedge_mean = float(np.mean(np.asarray(hedge)[mask]))
        if hedge_mean == 0.0:
            warnings.append("Hedge payoff has zero conditional mean; no hedge ratio")
        else:
            hedge_ratio = float(np.mean(np.asarray(target)[mask])) / hedge_mean
    return ScenarioReport(selected, paths.n_paths, pd.DataFrame(rows), hedge_ratio, warnings)


def forward_libor_paths(paths: SimPaths, dual: HullWhiteDual, T: float, tau: float = 1.0) -> np.ndarray:
    """Libor fixing at T for [T, T+τ] from the simulated short rate and the dual's bond reconstruction."""
    bond = dual.bond_price(T, T + tau, paths.short_rate(T))
    return (1.0 / bond - 1.0) / tau


def dump_paths(paths: SimPaths, path: str | Path) -> None:
    """Write paths as a long CSV with columns path, time, I, X, n, m_I, m_X."""
    n, k = paths.n_paths, paths.times.size
    m_I, m_X = paths.state[:, :, M_I], paths.state[:, :, M_X]
    frame = pd.DataFrame(
        {
            "path": np.repeat(np.arange(n), k),
            "time": np.tile(paths.times, n),
            "I": np.exp(paths.state[:, :, LOG_INDEX]).ravel(),
            "X": np.exp(paths.state[:, :, LOG_GROWTH]).ravel(),
            "n": short_rate_from_drifts(paths.times[None, :], m_I, m_X, paths.structural).ravel(),
            "m_I": m_I.ravel(),
            "m_X": m_X.ravel(),
        }
    )
    frame.to_csv(path, index=False)
    log.info("Wrote %s path rows to %s", len(frame), path)


def sample_short_rate(dual: HullWhiteDual, T: float, n_paths: int, seed: int) -> np.ndarray:
    """Draws of n(T) under the T-forward measure of the Hull-White dual."""
    law = dual.forward_short_rate_law(T)
    return law.mean + law.stdev * np.random.default_rng(seed).standard_normal(n_paths)


def zbo_mc(
    kind: OptionKind, T1: float, T2: float, K: float, curve: NominalCurve, dual: HullWhiteDual, n_paths: int, seed: int
) -> Estimate:
    """Zero-bond option by sampling n(T1) under the T1-forward measure."""
    bond = dual.bond_price(T1, T2, sample_short_rate(dual, T1, n_paths, seed))
    estimate = Estimate.from_samples(np.maximum(kind.omega * (bond - K), 0.0))
    p1 = float(curve.discount(T1))
    return Estimate(p1 * estimate.value, p1 * estimate.stderr)


def swaption_mc(
    kind: SwaptionKind, schedule: SwapSchedule, curve: NominalCurve, dual: HullWhiteDual, n_paths: int, seed: int
) -> Estimate:
    """Swaption from the exercise value 1 - Σc_i P(T,T_i) sampled under the expiry-forward measure."""
    rates = sample_short_rate(dual, schedule.expiry, n_paths, seed)
    bonds = dual.bond_price(schedule.expiry, schedule.payment_times, rates)
    swap = 1.0 - bonds @ schedule.coupons
    omega = 1.0 if kind is SwaptionKind.PAYER else -1.0
    estimate = Estimate.from_samples(np.maximum(omega * swap, 0.0))
    p = float(curve.discount(schedule.expiry))
    return Estimate(p * estimate.value, p * estimate.stderr)


def sample_merton_log_index(law: LognormalLaw, jumps: JumpSpec, horizon: float, n_paths: int, seed: int) -> np.ndarray:
    """log I(T)/I(t): the diffusive law compensated by -hkτ plus an explicit compound Poisson sum."""
    rng = np.random.default_rng(seed)
    counts = rng.poisson(jumps.intensity * horizon, n_paths)
    diffusion = law.M - jumps.intensity * jumps.k * horizon + law.V * rng.standard_normal(n_paths)
    jump_sum = counts * jumps.mu_J + np.sqrt(counts) * jumps.delta_J * rng.standard_normal(n_paths)
    return diffusion + jump_sum
