"""Separable calibration of the model functions to a market snapshot.

The pipeline bootstraps annual buckets one maturity at a time: the nominal curve
through the Hull-White dual, rate volatilities from ATM caplets, inflation
volatilities from ATM zero-coupon options, the inflation drift from breakevens and
finally the growth drift from the curve's mean reversion level. Volatility
functions are stored as per-bucket magnitudes times unit-norm weight vectors; the
weights are chosen to hit instantaneous correlation targets.
"""

import logging as log
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Self

import numpy as np
import pandas as pd
from opentelemetry import trace
from opentelemetry.trace import Status, StatusCode
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import optimize
from scipy.special import ndtri

import ctcb

from .config import CalibStrategy, GrowthDriftMethod, LambdaPolicy, OptionKind
from .constants import (
    BROWNIAN_DIM,
    CALIBRATION_RESIDUAL_TOL,
    CORRELATION_TOL,
    DEFAULT_B_I_SHARE,
    DEFAULT_B_X_LEVEL,
    DEFAULT_CORRELATION_HORIZON,
    DEFAULT_CORRELATION_PASSES,
    DEFAULT_CORRELATION_TARGETS,
    DEFAULT_MULTI_STARTS,
    DEFAULT_S_X_LEVEL,
    DEFAULT_SEED,
    INTEGRATION_STEP,
    NEWTON_MAX_ITER,
    PRICE_TOL,
    ROOT_TOL,
)
from .domain import ModelFunctions, StepFunction, StructuralParams, VarianceWeights
from .errors import SolverError
from .inflation_pricing import zc_option, zciis_fair_strike
from .ir_pricing import caplet_floorlet
from .market_data import MarketSnapshot, NominalCurve, resample_annual
from .model import HullWhiteDual, hw_ansatz_from_curve, hw_theta, inverse_zeta_integral, model_discount_bond, zeta
from .support.documents import CalibReportDocument, ModelFunctionsDocument, WeightsDocument
from .support.quadrature import midpoint_grid
from .support.solvers import bracketed_root

tracer = trace.get_tracer(__name__, ctcb.__version_str__)

VOL_NAMES = ("b_I", "b_X", "s_I", "s_X")
CORRELATION_PAIRS = (("rate", "inflation"), ("rate", "growth"), ("inflation", "growth"))


class CalibConfig(BaseModel):
    """Calibration settings."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    strategy: CalibStrategy = CalibStrategy.NOMINAL_FIRST
    max_iter: int = Field(default=NEWTON_MAX_ITER, ge=1)
    price_tol: float = Field(default=PRICE_TOL, gt=0)
    residual_tol: float = Field(default=CALIBRATION_RESIDUAL_TOL, gt=0)
    step: float = Field(default=INTEGRATION_STEP, gt=0)
    horizon: Optional[int] = Field(default=None, ge=1)
    """Last annual pillar; the longest quoted maturity when omitted."""
    brownian_dim: int = Field(default=BROWNIAN_DIM, ge=1)
    correlation_targets: tuple[float, float, float] = DEFAULT_CORRELATION_TARGETS
    """ρ(rate, inflation), ρ(rate, growth), ρ(inflation, growth)."""
    correlation_horizon: float = Field(default=DEFAULT_CORRELATION_HORIZON, ge=0)
    """Years to expiry T-t weighting b_I and b_X in the index loadings; 0 keeps s_I and s_X only."""
    correlation_passes: int = Field(default=DEFAULT_CORRELATION_PASSES, ge=1)
    """Volatility fitting passes; correlation targeting runs between consecutive passes."""
    multi_starts: int = Field(default=DEFAULT_MULTI_STARTS, ge=1)
    seed: int = DEFAULT_SEED
    lambda_policy: LambdaPolicy = LambdaPolicy.ZERO
    lam: Optional[list[float]] = Field(default=None, alias="lambda")
    growth_drift: GrowthDriftMethod = GrowthDriftMethod.THETA
    b_I_share: float = Field(default=DEFAULT_B_I_SHARE, ge=0, le=1)
    b_X_level: float = Field(default=DEFAULT_B_X_LEVEL, ge=0)
    s_X_level: float = Field(default=DEFAULT_S_X_LEVEL, ge=0)
    weights: Optional[WeightsDocument] = None

    @field_validator("correlation_targets")
    @classmethod
    def _targets_in_range(cls: type[Self], value: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(abs(v) > 1 for v in value):
            raise ValueError("correlation targets must lie in [-1, 1]")
        return value

    def market_price_of_risk(self: Self) -> np.ndarray:
        """Constant λ vector per the lambda policy."""
        if self.lambda_policy is LambdaPolicy.ZERO:
            return np.zeros(self.brownian_dim)
        if self.lam is None or len(self.lam) != self.brownian_dim:
            raise ValueError(f"lambda_policy 'given' needs a lambda vector of length {self.brownian_dim}")
        return np.asarray(self.lam, dtype=float)

    def initial_weights(self: Self) -> VarianceWeights:
        """Configured weights, else the uniform split."""
        if self.weights is None:
            return VarianceWeights.uniform(self.brownian_dim)
        return VarianceWeights.from_raw(**self.weights.model_dump())


@dataclass(frozen=True)
class StepRecord:
    """One bootstrap solve."""

    step: str
    maturity: float
    iterations: int
    residual: float


@dataclass
class CalibLog:
    """Solves and non-fatal events of a calibration run."""

    steps: list[StepRecord] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    def record(self: Self, step: str, maturity: float, iterations: int, residual: float) -> None:
        """Add a solve."""
        self.steps.append(StepRecord(step, float(maturity), int(iterations), float(residual)))

    def warn(self: Self, message: str) -> None:
        """Log and keep a diagnostic."""
        log.warning(message)
        self.diagnostics.append(message)


@dataclass(frozen=True, eq=False)
class VolMagnitudes:
    """Per-bucket magnitudes of the volatility functions; bucket k covers [k, k+1)."""

    b_I: np.ndarray
    b_X: np.ndarray
    s_I: np.ndarray
    s_X: np.ndarray

    @classmethod
    def zeros(cls: type[Self], buckets: int) -> Self:
        """All magnitudes zero."""
        return cls(*(np.zeros(buckets) for _ in VOL_NAMES))

    def variance_totals(self: Self) -> dict[str, float]:
        """Bucket-averaged squared magnitudes."""
        return {name: float(np.mean(getattr(self, name) ** 2)) for name in VOL_NAMES}


def build_functions(
    mags: VolMagnitudes,
    weights: VarianceWeights,
    a_I: np.ndarray,
    a_X: StepFunction | np.ndarray,
    lam: np.ndarray,
    m_I0: float,
    m_X0: float,
) -> ModelFunctions:
    """Model functions from magnitudes on annual buckets and weight directions."""
    start = np.arange(mags.b_I.size, dtype=float)

    def vector(name: str) -> StepFunction:
        return StepFunction(start, getattr(mags, name)[:, None] * getattr(weights, name)[None, :])

    return ModelFunctions(
        a_I=StepFunction(start, a_I),
        a_X=a_X if isinstance(a_X, StepFunction) else StepFunction(start, a_X),
        b_I=vector("b_I"),
        b_X=vector("b_X"),
        s_I=vector("s_I"),
        s_X=vector("s_X"),
        lam=StepFunction.constant(lam),
        m_I0=m_I0,
        m_X0=m_X0,
        weights=weights,
    )


def _nonnegative_root(a: float, b: float, c: float) -> Optional[float]:
    """Largest root of ax² + bx + c when it is >= 0."""
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return None
    root = (-b + np.sqrt(disc)) / (2.0 * a)
    return max(float(root), 0.0) if root >= -1e-15 else None


def _bucket_moments(lo: float, hi: float, T: float, step: float) -> tuple[float, float, float]:
    """Σw, Σw(T-s), Σw(T-s)² on the quadrature nodes of [lo, hi)."""
    nodes, weights = midpoint_grid(lo, hi, step)
    remaining = T - nodes
    return float(weights.sum()), float(weights @ remaining), float(weights @ remaining**2)


def fit_nominal(snapshot: MarketSnapshot, structural: StructuralParams, dim: int = BROWNIAN_DIM) -> HullWhiteDual:
    """Hull-White dual reproducing the nominal curve: P(0,T) = A0(T)e^{-n(0)β(T)}."""
    dual = hw_ansatz_from_curve(snapshot.nominal, structural, dim=dim)
    mats = snapshot.maturities
    error = float(np.max(np.abs(dual.reconstruct_discount(mats) - snapshot.nominal.discount(mats))))
    log.debug("Nominal fit: max reconstruction error %s", error)
    return dual


def _caplet_at_integral(curve: NominalCurve, delta: float, T: float, strike: float, integral: float) -> float:
    """ATM caplet fixing at T when ∫_0^T σ*²e^{2δu}du equals ``integral``."""
    level = np.sqrt(max(integral, 0.0) / T)
    trial = HullWhiteDual(delta, curve, StepFunction.constant(np.array([level])), damped=True)
    return caplet_floorlet(OptionKind.CALL, 0.0, T, T + 1.0, strike, 1.0, curve, trial)


def _required_rate_integral(
    snapshot: MarketSnapshot,
    structural: StructuralParams,
    k: int,
    floor: float,
    config: CalibConfig,
    calib_log: CalibLog,
) -> float:
    """Cumulative rate variance integral up to caplet k that reprices its quote."""
    T = float(snapshot.quotes.caplet_maturities[k])
    market = float(snapshot.quotes.caplet_pv[k])
    strike = float(snapshot.caplet_strike(T))

    def excess(integral: float) -> float:
        return _caplet_at_integral(snapshot.nominal, structural.delta, T, strike, integral) - market

    if excess(floor) >= 0:
        if excess(floor) > config.price_tol:
            calib_log.warn(
                f"Caplet {T:g}y quote {market:.3e} below the value of earlier buckets; bucket variance floored at 0"
            )
        calib_log.record("rate_vol", T, 0, excess(floor))
        return floor
    hi = max(2.0 * floor, 1e-6)
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1e3:
            raise SolverError(f"Caplet {T:g}y quote {market} cannot be reached", residual=abs(excess(hi)))
    result = bracketed_root(excess, floor, hi, tol=ROOT_TOL * 1e-4, max_iter=config.max_iter)
    calib_log.record("rate_vol", T, result.iterations, excess(result.root))
    return result.root


def fit_rate_vols(
    snapshot: MarketSnapshot,
    structural: StructuralParams,
    mags: VolMagnitudes,
    weights: VarianceWeights,
    solve: str,
    config: CalibConfig,
    calib_log: CalibLog,
) -> VolMagnitudes:
    """Bootstrap b_I or b_X bucket by bucket from ATM caplets; the other function is held.

    Each bucket's squared short-rate loading |h_x b_X + h_p b_I|²/ζ(0)² solves the caplet
    price; the solved magnitude is the non-negative root of the resulting quadratic.
    """
    if solve not in ("b_I", "b_X"):
        raise ValueError(f"Rate volatilities solve b_I or b_X, not {solve}")
    held = "b_X" if solve == "b_I" else "b_I"
    h = {"b_I": structural.h_p, "b_X": structural.h_x}
    cos = float(weights.b_I @ weights.b_X)
    z0_sq = float(zeta(0.0, structural)) ** 2
    solved = getattr(mags, solve).copy()
    other = getattr(mags, held)
    cumulative, previous_t = 0.0, 0.0
    for k, T in enumerate(snapshot.quotes.caplet_maturities):
        integral = _required_rate_integral(snapshot, structural, k, cumulative, config, calib_log)
        loading_sq = (integral - cumulative) / (T - previous_t)
        y = other[k]
        root = _nonnegative_root(
            h[solve] ** 2, 2.0 * h[solve] * h[held] * cos * y, (h[held] * y) ** 2 - loading_sq * z0_sq
        )
        if root is None:
            calib_log.warn(f"{solve} bucket {T:g}y has no non-negative solution given {held}; floored at 0")
            root = 0.0
            integral = cumulative + (T - previous_t) * (h[held] * y) ** 2 / z0_sq
        solved[k] = root
        cumulative, previous_t = integral, float(T)
    return replace(mags, **{solve: solved})


def atm_inflation_variance(snapshot: MarketSnapshot, k: int, calib_log: CalibLog) -> float:
    """Total log-index variance implied by ATM zero-coupon option k.

    With the forward at the strike F=(1+K)^T the undiscounted price is F(2N(V/2)-1).
    """
    T = float(snapshot.quotes.zc_option_maturities[k])
    forward = float(snapshot.inflation.index_ratio(T))
    ratio = float(snapshot.quotes.zc_option_pv[k] / (snapshot.nominal.discount(T) * forward))
    if ratio >= 1.0:
        calib_log.warn(f"Inflation option {T:g}y is worth more than its forward; variance capped")
        ratio = 1.0 - 1e-12
    return float((2.0 * ndtri(0.5 * (1.0 + ratio))) ** 2)


def b_I_budget(snapshot: MarketSnapshot, config: CalibConfig, calib_log: CalibLog) -> float:
    """b_I magnitude carrying ``b_I_share`` of the first inflation option's variance."""
    T = float(snapshot.quotes.zc_option_maturities[0])
    _, _, q2 = _bucket_moments(0.0, T, T, config.step)
    return float(np.sqrt(config.b_I_share * atm_inflation_variance(snapshot, 0, calib_log) / q2))


def fit_inflation_vols(
    snapshot: MarketSnapshot,
    mags: VolMagnitudes,
    weights: VarianceWeights,
    free_b_I: bool,
    config: CalibConfig,
    calib_log: CalibLog,
) -> VolMagnitudes:
    """Bootstrap (b_I, s_I) so ∫_0^T|(T-s)b_I+s_I|² matches each ATM option's variance.

    With ``free_b_I`` the b_I magnitude starts maturity-constant at the budget, otherwise
    it is held. Either way b_I is lowered from a bucket whose variance it alone overshoots,
    so s_I stays real; s_I is floored only when earlier buckets already overshoot.
    """
    maturities = snapshot.quotes.zc_option_maturities
    cos = float(weights.b_I @ weights.s_I)
    b_I, s_I = mags.b_I.copy(), mags.s_I.copy()
    starts = np.concatenate(([0.0], maturities[:-1]))
    if free_b_I:
        b_I[:] = b_I_budget(snapshot, config, calib_log)
    for k, T in enumerate(maturities):
        target = atm_inflation_variance(snapshot, k, calib_log)
        prior = 0.0
        for j in range(k):
            q0, q1, q2 = _bucket_moments(starts[j], maturities[j], T, config.step)
            prior += b_I[j] ** 2 * q2 + 2.0 * b_I[j] * s_I[j] * cos * q1 + s_I[j] ** 2 * q0
        q0, q1, q2 = _bucket_moments(starts[k], T, T, config.step)
        root = _nonnegative_root(q0, 2.0 * b_I[k] * cos * q1, b_I[k] ** 2 * q2 + prior - target)
        if root is None:
            s_I[k] = 0.0
            if target >= prior:
                b_I[k:] = np.minimum(b_I[k:], np.sqrt((target - prior) / q2))
                calib_log.warn(f"b_I reduced from bucket {T:g}y to keep the inflation variance feasible")
            else:
                calib_log.warn(f"Inflation variance at {T:g}y is below earlier buckets' contribution; s_I floored at 0")
        else:
            s_I[k] = root
        achieved = prior + b_I[k] ** 2 * q2 + 2.0 * b_I[k] * s_I[k] * cos * q1 + s_I[k] ** 2 * q0
        calib_log.record("inflation_vol", T, 1, achieved - target)
    return replace(mags, b_I=b_I, s_I=s_I)


def fit_breakevens(
    snapshot: MarketSnapshot,
    structural: StructuralParams,
    funcs: ModelFunctions,
    config: CalibConfig,
    calib_log: CalibLog,
) -> np.ndarray:
    """a_I per bucket so the model's ZCIIS fair strike equals each market breakeven.

    log E^T[I(T)/I(0)] is linear in a_I with coefficient Σw(T-s) over the bucket.
    """
    maturities = snapshot.inflation.maturities
    starts = np.concatenate(([0.0], maturities[:-1]))
    a_I = np.zeros(maturities.size)
    for k, T in enumerate(maturities):
        trial = funcs.replace(a_I=StepFunction(np.arange(a_I.size, dtype=float), a_I))
        model = zciis_fair_strike(0.0, T, trial, structural)
        market = float(snapshot.inflation.breakeven(T))
        _, q1, _ = _bucket_moments(starts[k], T, T, config.step)
        a_I[k] = T * (np.log1p(market) - np.log1p(model)) / q1
        trial = funcs.replace(a_I=StepFunction(np.arange(a_I.size, dtype=float), a_I))
        calib_log.record("breakeven", T, 1, zciis_fair_strike(0.0, T, trial, structural) - market)
    return a_I


def _pillar_correction(
    snapshot: MarketSnapshot, structural: StructuralParams, funcs: ModelFunctions, config: CalibConfig
) -> StepFunction:
    """Annual additions to funcs.a_X that make the simulated economy reprice each pillar.

    log P is linear in a_X with coefficient h_x ∫ Z(u,T)du over the segment, so each solve is exact.
    """
    maturities = snapshot.maturities
    starts = np.concatenate(([0.0], maturities[:-1]))
    values = np.zeros(maturities.size)
    for k, T in enumerate(maturities):
        trial = funcs.replace(a_X=funcs.a_X + StepFunction(starts, values))
        model_log = np.log(model_discount_bond(T, structural, trial, config.step))
        gap = float(snapshot.nominal.log_discount(T)) - model_log
        nodes, weights = midpoint_grid(starts[k], T, config.step)
        values[k] = gap / (structural.h_x * float(weights @ inverse_zeta_integral(nodes, T, structural)))
    return StepFunction(starts, values)


def derive_growth_drift(
    snapshot: MarketSnapshot,
    structural: StructuralParams,
    funcs: ModelFunctions,
    method: GrowthDriftMethod,
    config: CalibConfig,
    calib_log: CalibLog,
) -> StepFunction:
    """a_X = -(ζθ + h_p a_I)/h_x with θ the curve's Hull-White mean reversion level.

    THETA evaluates θ at the midpoints of the integration grid, then adds an annual
    correction so each nominal pillar reprices; the forward jumps at the pillars leave a
    gap of order 1e-5 otherwise. PILLAR solves the annual segments from zero.
    """
    horizon = float(snapshot.maturities[-1])
    if method is GrowthDriftMethod.THETA:
        start = np.round(np.arange(0.0, horizon - 1e-9, config.step), 12)
        mid = start + 0.5 * config.step
        theta = hw_theta(mid, funcs, structural, snapshot.nominal, from_curve=True)
        base = StepFunction(start, -(zeta(mid, structural) * theta + structural.h_p * funcs.a_I(mid)) / structural.h_x)
        correction = _pillar_correction(snapshot, structural, funcs.replace(a_X=base), config)
        log.debug("Growth drift pillar correction up to %s", float(np.max(np.abs(correction.values))))
        a_X = base + correction
    else:
        a_X = _pillar_correction(snapshot, structural, funcs.replace(a_X=StepFunction.constant(0.0)), config)
    derived = funcs.replace(a_X=a_X)
    for T in snapshot.maturities:
        error = model_discount_bond(T, structural, derived, config.step) - float(snapshot.nominal.discount(T))
        calib_log.record(f"growth_drift_{method.value}", T, 1, error)
    return a_X


def model_correlations(
    mags: dict[str, float], weights: VarianceWeights, structural: StructuralParams, horizon: float
) -> np.ndarray:
    """Instantaneous correlations of dn, dI/I and dX/X for constant weights, in closed form.

    Each correlation is d<Y,Z>/sqrt(d<Y,Y>d<Z,Z>) with σ_n ∝ -(h_p b_I + h_x b_X) for the rate,
    (T-t)b_I + s_I for the price index and (T-t)b_X + s_X for output, T-t being ``horizon``.
    ``horizon`` 0 keeps only the local loadings s_I and s_X. ``mags`` holds the squared
    magnitude of each volatility function.
    """
    vol = {name: np.sqrt(mags[name]) * getattr(weights, name) for name in VOL_NAMES}
    loadings = np.stack(
        [
            -(structural.h_p * vol["b_I"] + structural.h_x * vol["b_X"]),
            horizon * vol["b_I"] + vol["s_I"],
            horizon * vol["b_X"] + vol["s_X"],
        ]
    )
    joint = loadings @ loadings.T
    sd = np.sqrt(np.clip(np.diag(joint), 0.0, None))
    scale = np.outer(sd, sd)
    corr = np.divide(joint, scale, out=np.zeros_like(joint), where=scale > 0)
    return np.array([corr[0, 1], corr[0, 2], corr[1, 2]])


def correlation_target(
    config: CalibConfig, totals: dict[str, float], structural: StructuralParams, calib_log: CalibLog
) -> tuple[VarianceWeights, np.ndarray]:
    """Unit-norm weights minimising the squared correlation errors.

    Each weight vector is a raw n-vector projected onto the sphere; the best of
    ``multi_starts`` local searches wins, the first starting from the configured weights.
    """
    dim = config.brownian_dim
    targets = np.asarray(config.correlation_targets)
    rng = np.random.default_rng(config.seed)

    def unpack(x: np.ndarray) -> VarianceWeights:
        raw = x.reshape(len(VOL_NAMES), dim)
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        return VarianceWeights(*(raw / np.where(norms > 0, norms, 1.0)))

    def objective(x: np.ndarray) -> float:
        if np.any(np.linalg.norm(x.reshape(len(VOL_NAMES), dim), axis=1) == 0):
            return 1e6
        achieved = model_correlations(totals, unpack(x), structural, config.correlation_horizon)
        return float(np.sum((achieved - targets) ** 2))

    initial = config.initial_weights()
    starts = [np.concatenate([getattr(initial, name) for name in VOL_NAMES])]
    starts += [rng.standard_normal(len(VOL_NAMES) * dim) for _ in range(config.multi_starts - 1)]
    best = None
    for x0 in starts:
        result = optimize.minimize(
            objective, x0, method="Nelder-Mead", options={"maxiter": 4000, "xatol": 1e-8, "fatol": 1e-12}
        )
        if best is None or result.fun < best.fun:
            best = result
    weights = unpack(best.x)
    achieved = model_correlations(totals, weights, structural, config.correlation_horizon)
    log.info("Correlation targeting: achieved %s for targets %s", achieved, targets)
    for (a, b), got, want in zip(CORRELATION_PAIRS, achieved, targets, strict=True):
        if abs(got - want) > CORRELATION_TOL:
            calib_log.warn(f"Correlation {a}/{b} reached {got:.4f} against target {want:.4f}")
    return weights, achieved


@dataclass(frozen=True, eq=False)
class CalibResult:
    """Calibrated functions with the verification reprice."""

    funcs: ModelFunctions
    dual: HullWhiteDual
    snapshot: MarketSnapshot
    residuals: pd.DataFrame
    """instrument, maturity, market, model, error."""
    steps: list[StepRecord]
    diagnostics: list[str]
    correlations: dict[str, float]
    consistency_error: float
    """Largest gap between the simulated economy's discount bonds and the curve."""
    residual_tol: float = CALIBRATION_RESIDUAL_TOL

    @property
    def max_abs_error(self: Self) -> float:
        """Largest absolute reprice error over the calibration instruments."""
        return float(self.residuals["error"].abs().max())

    def converged(self: Self, tol: Optional[float] = None) -> bool:
        """True when every instrument reprices within ``tol``, the run's tolerance by default."""
        return self.max_abs_error < (self.residual_tol if tol is None else tol)

    def raise_for_residuals(self: Self) -> Self:
        """Return the result when it converged.

        Raises:
            SolverError: an instrument reprices outside the run's tolerance.
        """
        if not self.converged():
            worst = self.residuals.loc[self.residuals["error"].abs().idxmax()]
            raise SolverError(
                f"Calibration did not reprice {worst['instrument']} {worst['maturity']:g}y "
                f"within {self.residual_tol:.0e}",
                residual=self.max_abs_error,
            )
        return self


def verify(snapshot: MarketSnapshot, structural: StructuralParams, funcs: ModelFunctions) -> pd.DataFrame:
    """Reprice every calibration instrument with the pricing modules."""
    curve = snapshot.nominal
    dual = HullWhiteDual.from_model(curve, structural, funcs)
    rows = []
    for T in snapshot.maturities:
        rows.append(("nominal", T, float(curve.discount(T)), float(dual.reconstruct_discount(T))))
    for T, pv in zip(snapshot.quotes.caplet_maturities, snapshot.quotes.caplet_pv, strict=True):
        strike = float(snapshot.caplet_strike(T))
        rows.append(("caplet", T, pv, caplet_floorlet(OptionKind.CALL, 0.0, T, T + 1.0, strike, 1.0, curve, dual)))
    for T, pv in zip(snapshot.quotes.zc_option_maturities, snapshot.quotes.zc_option_pv, strict=True):
        strike = float(snapshot.inflation.breakeven(T))
        model = zc_option(0.0, T, strike, OptionKind.CALL, funcs, structural, curve).discounted
        rows.append(("zc_option", T, pv, model))
    for T in snapshot.inflation.maturities:
        market = float(snapshot.inflation.breakeven(T))
        rows.append(("breakeven", T, market, zciis_fair_strike(0.0, T, funcs, structural)))
    frame = pd.DataFrame(rows, columns=["instrument", "maturity", "market", "model"])
    frame["error"] = frame["model"] - frame["market"]
    return frame


def _fit_vols(
    snap: MarketSnapshot,
    structural: StructuralParams,
    mags: VolMagnitudes,
    weights: VarianceWeights,
    config: CalibConfig,
    calib_log: CalibLog,
) -> VolMagnitudes:
    """One volatility pass in the configured order.

    Nominal-first caps the caplet-implied b_I at the budget and lets b_X carry the rest of
    the caplet variance in every bucket where b_I was lowered.
    """
    if config.strategy is CalibStrategy.NOMINAL_FIRST:
        mags = replace(mags, b_X=np.full(mags.b_X.size, config.b_X_level))
        mags = fit_rate_vols(snap, structural, mags, weights, "b_I", config, calib_log)
        implied = mags.b_I
        budget = b_I_budget(snap, config, calib_log)
        mags = replace(mags, b_I=np.minimum(implied, budget))
        mags = fit_inflation_vols(snap, mags, weights, False, config, calib_log)
        lowered = mags.b_I < implied
        if np.any(lowered):
            log.debug("b_I lowered below the caplet-implied level in %s buckets", int(lowered.sum()))
            refit = fit_rate_vols(snap, structural, mags, weights, "b_X", config, calib_log)
            mags = replace(mags, b_X=np.where(lowered, refit.b_X, mags.b_X))
        return mags
    mags = fit_inflation_vols(snap, mags, weights, True, config, calib_log)
    return fit_rate_vols(snap, structural, mags, weights, "b_X", config, calib_log)


@tracer.start_as_current_span("calibrate")
def calibrate(
    snapshot: MarketSnapshot, structural: StructuralParams, config: Optional[CalibConfig] = None
) -> CalibResult:
    """Run the full pipeline in the configured order and verify the result.

    Floors and unmet targets are collected as diagnostics and only solver failures raise. A result
    outside ``residual_tol`` is logged as an error; callers that need a usable model call
    :meth:`CalibResult.raise_for_residuals`.
    """
    config = config or CalibConfig()
    span = trace.get_current_span()
    calib_log = CalibLog()
    try:
        snap = resample_annual(snapshot, config.horizon)
        buckets = snap.maturities.size
        lam = config.market_price_of_risk()
        fit_nominal(snap, structural, config.brownian_dim)
        span.add_event("nominal fitted")

        weights = config.initial_weights()
        mags = replace(VolMagnitudes.zeros(buckets), s_X=np.full(buckets, config.s_X_level))
        achieved = model_correlations(mags.variance_totals(), weights, structural, config.correlation_horizon)
        for p in range(config.correlation_passes):
            mags = _fit_vols(snap, structural, mags, weights, config, calib_log)
            span.add_event("volatilities fitted", {"pass": p})
            if p < config.correlation_passes - 1:
                weights, achieved = correlation_target(config, mags.variance_totals(), structural, calib_log)
        if config.correlation_passes == 1:
            achieved = model_correlations(mags.variance_totals(), weights, structural, config.correlation_horizon)

        m_I0 = float(np.log1p(snap.inflation.breakeven(1.0)))
        m_X0 = -(float(zeta(0.0, structural)) * snap.nominal.short_rate() + structural.h_p * m_I0) / structural.h_x
        funcs = build_functions(mags, weights, np.zeros(buckets), np.zeros(buckets), lam, m_I0, m_X0)
        drifts = fit_breakevens(snap, structural, funcs, config, calib_log)
        funcs = funcs.replace(a_I=StepFunction(np.arange(buckets, dtype=float), drifts))
        span.add_event("breakevens fitted")
        funcs = funcs.replace(a_X=derive_growth_drift(snap, structural, funcs, config.growth_drift, config, calib_log))
        funcs = funcs.with_derived(structural)
        funcs.check_consistency(structural)
    except Exception as e:
        span.set_status(status=Status(StatusCode.ERROR))
        span.record_exception(e)
        log.error("Calibration failed: %s", e)
        raise

    residuals = verify(snap, structural, funcs)
    consistency = max(
        (abs(s.residual) for s in calib_log.steps if s.step.startswith("growth_drift")), default=0.0
    )
    result = CalibResult(
        funcs=funcs,
        dual=HullWhiteDual.from_model(snap.nominal, structural, funcs),
        snapshot=snap,
        residuals=residuals,
        steps=calib_log.steps,
        diagnostics=calib_log.diagnostics,
        correlations={f"{a}/{b}": float(v) for (a, b), v in zip(CORRELATION_PAIRS, achieved, strict=True)},
        consistency_error=float(consistency),
        residual_tol=config.residual_tol,
    )
    if not result.converged():
        message = f"Max reprice error {result.max_abs_error:.3e} exceeds tolerance {config.residual_tol:.0e}"
        log.error(message)
        result.diagnostics.append(message)
        span.set_status(status=Status(StatusCode.ERROR, message))
    log.info("Calibration done: max error %s, %s diagnostics", result.max_abs_error, len(result.diagnostics))
    span.add_event("calibration verified", {"max_abs_error": result.max_abs_error})
    return result


def calibrated_values(result: CalibResult) -> pd.DataFrame:
    """Per-maturity calibrated functions, one column per vector component."""
    funcs = result.funcs
    start = result.snapshot.maturities - 1.0
    table = {"maturity": result.snapshot.maturities, "a_I": funcs.a_I(start), "a_X": funcs.a_X(start + 0.5)}
    for name in VOL_NAMES:
        values = getattr(funcs, name)(start)
        for i in range(funcs.dim):
            table[f"{name}_{i + 1}"] = values[:, i]
    return pd.DataFrame(table)


def write_calibration(result: CalibResult, out_dir: str | Path) -> list[Path]:
    """Write model_functions.json, residuals.csv, calibrated_values.csv and report.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = ("model_functions.json", "residuals.csv", "calibrated_values.csv", "report.json")
    paths = [out_dir / name for name in names]
    paths[0].write_text(ModelFunctionsDocument.from_domain(result.funcs).model_dump_json(indent=2, by_alias=True))
    result.residuals.to_csv(paths[1], index=False)
    calibrated_values(result).to_csv(paths[2], index=False)
    report = CalibReportDocument(
        max_abs_error=result.max_abs_error,
        consistency_error=result.consistency_error,
        correlations=result.correlations,
        diagnostics=result.diagnostics,
        steps=len(result.steps),
    )
    paths[3].write_text(report.model_dump_json(indent=2))
    log.info("Calibration written to %s", out_dir)
    return paths
