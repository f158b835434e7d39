"""Discrete-time New Keynesian toy used for pricing.

Output gap and inflation follow ξ_i = A E_i ξ_{i+1} + C ε_i with shocks ε_i = (u_i, v_i, z_i),
and the central bank sets n_{i+1} = n̄(1 + δᵀξ_i). Expectations are inputs.
"""

import logging as log
from dataclasses import dataclass, field, replace
from typing import Optional, Self

import numpy as np
from opentelemetry import trace

import ctcb

from .config import ShockComponent
from .constants import DEFAULT_BLOCK_SIZE, LAMBDA_BRACKET
from .domain import Estimate
from .errors import ModelError, SolverError
from .market_data import MarketSnapshot

tracer = trace.get_tracer(__name__, ctcb.__version_str__)

_COMPONENTS = (ShockComponent.U, ShockComponent.V, ShockComponent.Z)


@dataclass(frozen=True)
class DsgeParams:
    """Structural parameters of the toy economy."""

    sigma: float
    """Relative risk aversion."""
    k: float
    """Price flexibility."""
    delta_pi: float
    delta_x: float
    beta: float
    """Subjective discount factor."""
    n_bar: float
    """Equilibrium nominal rate."""
    tau: tuple[float, ...] = (1.0,)
    """Year fractions τ_0, τ_1, ...; the last one repeats."""

    def __post_init__(self: Self) -> None:
        """Check ranges and a non-zero denominator."""
        if self.sigma < 0 or self.k < 0:
            raise ModelError(f"sigma and k must be >= 0, got {self.sigma}, {self.k}")
        if not 0 < self.beta <= 1:
            raise ModelError(f"beta must lie in (0, 1], got {self.beta}")
        object.__setattr__(self, "tau", tuple(float(t) for t in np.atleast_1d(self.tau)))
        if not self.tau or min(self.tau) <= 0:
            raise ModelError(f"Year fractions must be > 0, got {self.tau}")
        if self.denominator <= 0:
            raise ModelError(f"sigma + delta_x + k delta_pi must be > 0, got {self.denominator}")

    @classmethod
    def from_calvo(
        cls: type[Self],
        sigma: float,
        omega: float,
        beta: float,
        eta: float,
        delta_pi: float,
        delta_x: float,
        n_bar: float,
        tau: tuple[float, ...] = (1.0,),
    ) -> Self:
        """Derive k = (1-ω)(1-βω)(σ+η)/ω from the share ω of firms that keep their price."""
        if not 0 < omega <= 1:
            raise ModelError(f"Calvo share must lie in (0, 1], got {omega}")
        k = (1.0 - omega) * (1.0 - beta * omega) * (sigma + eta) / omega
        return cls(sigma, k, delta_pi, delta_x, beta, n_bar, tau)

    @property
    def denominator(self: Self) -> float:
        """σ + δ_x + kδ_π."""
        return self.sigma + self.delta_x + self.k * self.delta_pi

    @property
    def delta(self: Self) -> np.ndarray:
        """Taylor rule vector (δ_x, δ_π)."""
        return np.array([self.delta_x, self.delta_pi])

    def tau_at(self: Self, i: int) -> float:
        """τ_i."""
        return self.tau[min(i, len(self.tau) - 1)]


@dataclass(frozen=True, eq=False)
class ShockSpec:
    """Per-period laws of the shocks (u, v, z); arrays have one row per period and one column per shock."""

    var: np.ndarray
    mean: Optional[np.ndarray] = None
    skew: Optional[np.ndarray] = None
    """Centered third moments."""
    kurt: Optional[np.ndarray] = None
    """Centered fourth moments."""
    lam: Optional[np.ndarray] = None
    """Market prices of risk λ_i."""

    def __post_init__(self: Self) -> None:
        """Shape everything as (periods, 3) and check the moments."""
        var = np.atleast_2d(np.asarray(self.var, dtype=float))
        if var.shape[1] != 3:
            raise ModelError(f"Shock variances need three columns (u, v, z), got shape {var.shape}")
        if np.any(var < 0) or not np.all(np.isfinite(var)):
            raise ModelError("Shock variances must be finite and >= 0")
        object.__setattr__(self, "var", var)
        gaussian_kurt = self.kurt is None
        for name, default in (("mean", 0.0), ("skew", 0.0), ("lam", 0.0)):
            value = getattr(self, name)
            if value is None:
                arr = np.full(var.shape, default)
            else:
                arr = np.broadcast_to(np.asarray(value, dtype=float), var.shape)
            object.__setattr__(self, name, np.array(arr))
        kurt = 3.0 * var**2 if gaussian_kurt else np.broadcast_to(np.asarray(self.kurt, dtype=float), var.shape)
        object.__setattr__(self, "kurt", np.array(kurt))
        if not gaussian_kurt or np.any(self.skew != 0):
            positive = var > 0
            standard_kurt = np.divide(self.kurt, var**2, where=positive, out=np.zeros_like(var))
            standard_skew = np.divide(self.skew, var**1.5, where=positive, out=np.zeros_like(var))
            if np.any(positive & (standard_kurt < standard_skew**2 + 1.0 - 1e-12)):
                raise ModelError("Shock kurtosis is below skew² + 1 for some period")

    @classmethod
    def gaussian(
        cls: type[Self], var_u: float, var_v: float, var_z: float, periods: int = 1, lam: Optional[np.ndarray] = None
    ) -> Self:
        """Normal shocks with the same variances in every period."""
        return cls(np.tile([var_u, var_v, var_z], (periods, 1)), lam=None if lam is None else np.atleast_2d(lam))

    @property
    def periods(self: Self) -> int:
        """Number of periods."""
        return self.var.shape[0]

    def row(self: Self, i: int) -> int:
        """Row holding period i; the last period repeats."""
        return min(i, self.periods - 1)

    def risk_neutral_mean(self: Self, i: int) -> np.ndarray:
        """Shock means after the measure change, mean + λ."""
        r = self.row(i)
        return self.mean[r] + self.lam[r]

    def with_lambda(self: Self, lam: np.ndarray) -> Self:
        """Copy with market prices of risk replaced."""
        return replace(self, lam=np.atleast_2d(np.asarray(lam, dtype=float)))


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """ξ_i = A E_i ξ_{i+1} + K w_i with w = σu - v, equivalently C ε_i; inflation loads h on ε."""

    A: np.ndarray
    K: np.ndarray
    C: np.ndarray
    h: np.ndarray
    denominator: float


@dataclass(frozen=True, eq=False)
class ExpectationPath:
    """E_i x_{i+1} and E_i p_{i+1} for each period."""

    x_next: np.ndarray
    p_next: np.ndarray

    def __post_init__(self: Self) -> None:
        """Coerce to matching finite arrays."""
        x = np.atleast_1d(np.asarray(self.x_next, dtype=float))
        p = np.atleast_1d(np.asarray(self.p_next, dtype=float))
        if x.shape != p.shape or not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise ModelError("Expectation paths must be finite and of equal length")
        object.__setattr__(self, "x_next", x)
        object.__setattr__(self, "p_next", p)

    @classmethod
    def constant(cls: type[Self], x_next: float, p_next: float, periods: int = 1) -> Self:
        """The same expectations in every period."""
        return cls(np.full(periods, x_next), np.full(periods, p_next))

    def at(self: Self, i: int) -> np.ndarray:
        """E_i ξ_{i+1}."""
        r = min(i, self.x_next.size - 1)
        return np.array([self.x_next[r], self.p_next[r]])


@dataclass(frozen=True)
class Moments:
    """Mean, variance and centered third and fourth moments."""

    mean: float
    var: float
    skew3: float
    kurt4: float

    @property
    def stdev(self: Self) -> float:
        """Standard deviation."""
        return float(np.sqrt(self.var))


@dataclass(frozen=True)
class StabilityReport:
    """Stability of the system under the reaction function."""

    stable: bool
    closed_form: float
    """k(δ_π-1) + (1-β)δ_x; the system is stable when it is positive."""
    spectral_radius: float


def build_system(params: DsgeParams) -> SystemMatrices:
    """System matrices of the toy economy."""
    s, k, b, d = params.sigma, params.k, params.beta, params.denominator
    A = np.array([[s, 1.0 - b * params.delta_pi], [k * s, k + b * (s + params.delta_x)]]) / d
    K = np.array([1.0, k]) / d
    C = np.array([[s * K[0], -K[0], 0.0], [s * K[1], -K[1], 1.0]])
    h = np.array([s * K[1], -K[1], 1.0])
    return SystemMatrices(A, K, C, h, d)


def stability_check(params: DsgeParams) -> StabilityReport:
    """Closed-form stability condition with the spectral radius of A as a cross-check."""
    closed_form = params.k * (params.delta_pi - 1.0) + (1.0 - params.beta) * params.delta_x
    radius = float(np.max(np.abs(np.linalg.eigvals(build_system(params).A))))
    log.debug("Stability: closed form %s, spectral radius %s", closed_form, radius)
    return StabilityReport(closed_form > 0, float(closed_form), radius)


def rate_loadings(params: DsgeParams) -> np.ndarray:
    """Loadings n̄δᵀC of n_{i+1} on (u_i, v_i, z_i)."""
    return params.n_bar * params.delta @ build_system(params).C


def _linear_moments(mean: float, loadings: np.ndarray, shocks: ShockSpec, i: int) -> Moments:
    """Moments of mean + L·ε for independent shock components."""
    r = shocks.row(i)
    var = shocks.var[r]
    l2v = loadings**2 * var
    cross = 0.5 * (np.sum(l2v) ** 2 - np.sum(l2v**2))
    return Moments(
        mean=float(mean + loadings @ shocks.mean[r]),
        var=float(np.sum(l2v)),
        skew3=float(np.sum(loadings**3 * shocks.skew[r])),
        kurt4=float(np.sum(loadings**4 * shocks.kurt[r]) + 6.0 * cross),
    )


def inflation_mean(params: DsgeParams, expectations: ExpectationPath, i: int) -> float:
    """A₂₁E_i x_{i+1} + A₂₂E_i p_{i+1}."""
    return float(build_system(params).A[1] @ expectations.at(i))


def inflation_moments(params: DsgeParams, shocks: ShockSpec, expectations: ExpectationPath, i: int) -> Moments:
    """Moments of p_i."""
    return _linear_moments(inflation_mean(params, expectations, i), build_system(params).h, shocks, i)


def short_rate_mean(params: DsgeParams, expectations: ExpectationPath, i: int) -> float:
    """n̄(1 + δᵀA E_i ξ_{i+1})."""
    return float(params.n_bar * (1.0 + params.delta @ build_system(params).A @ expectations.at(i)))


def short_rate_moments(params: DsgeParams, shocks: ShockSpec, expectations: ExpectationPath, i: int) -> Moments:
    """Moments of n_{i+1}."""
    return _linear_moments(short_rate_mean(params, expectations, i), rate_loadings(params), shocks, i)


def rate_inflation_cov(params: DsgeParams, shocks: ShockSpec, i: int) -> float:
    """Cov(p_i, n_{i+1})."""
    return float(np.sum(build_system(params).h * rate_loadings(params) * shocks.var[shocks.row(i)]))


def rate_inflation_corr(params: DsgeParams, shocks: ShockSpec, i: int) -> float:
    """Corr(p_i, n_{i+1}); zero when either variance vanishes."""
    var = shocks.var[shocks.row(i)]
    var_p = float(np.sum(build_system(params).h ** 2 * var))
    var_n = float(np.sum(rate_loadings(params) ** 2 * var))
    if var_p == 0.0 or var_n == 0.0:
        return 0.0
    return rate_inflation_cov(params, shocks, i) / np.sqrt(var_p * var_n)


def measure_shift(shocks: ShockSpec) -> ShockSpec:
    """The shock laws under the pricing measure: means move by λ, variances and higher moments stay."""
    return replace(shocks, mean=shocks.mean + shocks.lam, lam=np.zeros_like(shocks.lam))


def radon_nikodym_weight(eps: np.ndarray, shocks: ShockSpec, i: int) -> np.ndarray:
    """Density of the pricing measure on draws ``eps`` (rows of (u, v, z)) of period i.

    exp(Σ_j ε_j λ_j/V_j - ½Σ_j λ_j²/V_j) moves the means of centred Gaussian shocks to λ and has unit
    expectation.
    """
    r = shocks.row(i)
    var, lam = shocks.var[r], shocks.lam[r]
    degenerate = var == 0
    if np.any(degenerate & (lam != 0)):
        raise ModelError("A shock with zero variance cannot carry a market price of risk")
    inv = np.divide(1.0, var, where=~degenerate, out=np.zeros_like(var))
    centred = np.atleast_2d(eps) - shocks.mean[r]
    return np.exp(centred @ (lam * inv) - 0.5 * np.sum(lam**2 * inv))


def _tau_pair(params: DsgeParams, i: int) -> tuple[float, float]:
    """(τ_i, τ_{i+1})."""
    return params.tau_at(i), params.tau_at(i + 1)


def nominal_df_approx(params: DsgeParams, shocks: ShockSpec, expectations: ExpectationPath, i: int) -> float:
    """E^Q[e^{-τ_{i+1} n_{i+1}}] for Gaussian shocks."""
    _, tau_next = _tau_pair(params, i)
    loadings = -tau_next * rate_loadings(params)
    c1 = -tau_next * short_rate_mean(params, expectations, i)
    var = shocks.var[shocks.row(i)]
    return float(np.exp(c1 + loadings @ shocks.risk_neutral_mean(i) + 0.5 * np.sum(loadings**2 * var)))


def _real_loadings(params: DsgeParams, i: int) -> np.ndarray:
    tau_i, tau_next = _tau_pair(params, i)
    return tau_i * build_system(params).h - tau_next * rate_loadings(params)


def real_df_approx(params: DsgeParams, shocks: ShockSpec, expectations: ExpectationPath, i: int) -> float:
    """E^Q[e^{-τ_{i+1} n_{i+1} + τ_i p_i}] for Gaussian shocks."""
    tau_i, tau_next = _tau_pair(params, i)
    b1 = tau_i * inflation_mean(params, expectations, i) - tau_next * short_rate_mean(params, expectations, i)
    loadings = _real_loadings(params, i)
    var = shocks.var[shocks.row(i)]
    return float(np.exp(b1 + loadings @ shocks.risk_neutral_mean(i) + 0.5 * np.sum(loadings**2 * var)))


@dataclass(frozen=True, eq=False)
class DiscountTargets:
    """One-period nominal and real discount factors read off the market."""

    times: np.ndarray
    nominal: np.ndarray
    real: np.ndarray


def discount_targets(snapshot: MarketSnapshot, params: DsgeParams, periods: int) -> DiscountTargets:
    """P(0,t_{i+1})/P(0,t_i) and P^R(0,t_{i+1})/P^R(0,t_i) with t_{i+1} = t_i + τ_{i+1}."""
    times = np.concatenate(([0.0], np.cumsum([params.tau_at(i + 1) for i in range(periods)])))
    nominal = np.concatenate(([1.0], snapshot.nominal.discount(times[1:])))
    real = np.concatenate(([1.0], snapshot.real_discount(times[1:])))
    return DiscountTargets(times, nominal[1:] / nominal[:-1], real[1:] / real[:-1])


@dataclass(frozen=True, eq=False)
class LambdaBootstrap:
    """Calibrated market prices of risk with per-period log-price residuals."""

    lam: np.ndarray
    residuals: np.ndarray
    diagnostics: list[str] = field(default_factory=list)


@tracer.start_as_current_span("bootstrap_lambda")
def bootstrap_lambda(
    snapshot: MarketSnapshot,
    params: DsgeParams,
    shocks: ShockSpec,
    expectations: ExpectationPath,
    periods: Optional[int] = None,
    pinned: ShockComponent = ShockComponent.U,
    pinned_value: float = 0.0,
) -> LambdaBootstrap:
    """Market prices of risk matching the nominal and real one-period discount factors, period by period.

    λ enters both log discount factors linearly, so each period is a 2x2 linear solve for the two free
    components once ``pinned`` is fixed. Solutions outside |λ| <= 10 are clipped and reported.

    Raises:
        SolverError: the free components do not determine both discount factors (pinning z).
    """
    periods = periods or shocks.periods
    targets = discount_targets(snapshot, params, periods)
    pin = _COMPONENTS.index(pinned)
    free = [j for j in range(3) if j != pin]
    lam = np.zeros((periods, 3))
    residuals = np.zeros((periods, 2))
    diagnostics: list[str] = []
    span = trace.get_current_span()
    base = shocks.with_lambda(np.zeros(3))
    for i in range(periods):
        rows = np.vstack([-params.tau_at(i + 1) * rate_loadings(params), _real_loadings(params, i)])
        zero_lambda = np.log(
            [nominal_df_approx(params, base, expectations, i), real_df_approx(params, base, expectations, i)]
        )
        rhs = np.log([targets.nominal[i], targets.real[i]]) - zero_lambda - rows[:, pin] * pinned_value
        system = rows[:, free]
        if abs(np.linalg.det(system)) <= 1e-14 * max(np.abs(system).max() ** 2, 1e-300):
            raise SolverError(
                f"Pinning lambda^{pinned.value} leaves a singular system in period {i}; pin another component",
                residual=float(np.abs(rhs).max()),
            )
        solution = np.zeros(3)
        solution[pin] = pinned_value
        solution[free] = np.linalg.solve(system, rhs)
        if np.any(np.abs(solution) > LAMBDA_BRACKET):
            message = f"Period {i}: no root within bracket |lambda| <= {LAMBDA_BRACKET}, got {solution.tolist()}"
            log.warning(message)
            diagnostics.append(message)
            solution = np.clip(solution, -LAMBDA_BRACKET, LAMBDA_BRACKET)
        lam[i] = solution
        residuals[i] = rows @ solution + zero_lambda - np.log([targets.nominal[i], targets.real[i]])
        span.add_event("period calibrated", {"period": i, "max_residual": float(np.abs(residuals[i]).max())})
    log.info("Bootstrapped market prices of risk over %s periods", periods)
    return LambdaBootstrap(lam, residuals, diagnostics)


@dataclass(frozen=True, eq=False)
class ShockVariances:
    """Variances of v and z implied by option variances, after flooring."""

    var_v: np.ndarray
    var_z: np.ndarray
    diagnostics: list[str] = field(default_factory=list)


def bootstrap_shock_variances(
    params: DsgeParams, rate_var: np.ndarray, infl_var: np.ndarray, var_u: float | np.ndarray = 0.0
) -> ShockVariances:
    """Var(v) and Var(z) reproducing the short-rate and inflation variances given Var(u).

    Negative solutions are floored at zero with a diagnostic.
    """
    system = build_system(params)
    k2, dk, dpi = system.K[1], params.delta @ system.K, params.delta_pi
    rate_var, infl_var = np.atleast_1d(rate_var).astype(float), np.atleast_1d(infl_var).astype(float)
    var_u = np.broadcast_to(np.asarray(var_u, dtype=float), rate_var.shape)
    matrix = np.array([[params.n_bar**2 * dk**2, params.n_bar**2 * dpi**2], [k2**2, 1.0]])
    if abs(np.linalg.det(matrix)) < 1e-300:
        raise SolverError("Short-rate and inflation variances do not separate v and z for these parameters")
    rhs = np.vstack(
        [rate_var - params.n_bar**2 * dk**2 * params.sigma**2 * var_u, infl_var - k2**2 * params.sigma**2 * var_u]
    )
    var_v, var_z = np.linalg.solve(matrix, rhs)
    diagnostics: list[str] = []
    for name, values in (("v", var_v), ("z", var_z)):
        for i in np.flatnonzero(values < 0):
            message = f"Period {i}: Var({name}) = {values[i]:.3e} floored to zero"
            log.warning(message)
            diagnostics.append(message)
    return ShockVariances(np.maximum(var_v, 0.0), np.maximum(var_z, 0.0), diagnostics)


@dataclass(frozen=True, eq=False)
class DsgeSample:
    """Simulated output gap, inflation and next short rate, shape (paths, periods)."""

    x: np.ndarray
    p: np.ndarray
    n_next: np.ndarray


def _standard_draws(n_paths: int, periods: int, seed: int, block_size: int) -> np.ndarray:
    blocks = [
        np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,))).standard_normal(
            (min(block_size, n_paths - start), periods, 3)
        )
        for b, start in enumerate(range(0, n_paths, block_size))
    ]
    return np.concatenate(blocks, axis=0)


@tracer.start_as_current_span("simulate_dsge")
def simulate_dsge(
    params: DsgeParams,
    shocks: ShockSpec,
    expectations: ExpectationPath,
    n_paths: int,
    seed: int,
    periods: Optional[int] = None,
    risk_neutral: bool = False,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> DsgeSample:
    """Draw Gaussian shocks and propagate them through the system.

    Under ``risk_neutral`` the shock means are shifted by λ. Paths are drawn in blocks; block b uses the stream
    SeedSequence(seed, spawn_key=(b,)), so a path keeps its shocks when n_paths grows.
    """
    if n_paths < 1:
        raise ModelError(f"n_paths must be >= 1, got {n_paths}")
    periods = periods or shocks.periods
    if np.any(shocks.skew != 0):
        log.warning("Non-zero shock skews are ignored by the Gaussian simulation")
    system = build_system(params)
    draws = _standard_draws(n_paths, periods, seed, block_size)
    x = np.empty((n_paths, periods))
    p = np.empty((n_paths, periods))
    for i in range(periods):
        r = shocks.row(i)
        mean = shocks.risk_neutral_mean(i) if risk_neutral else shocks.mean[r]
        eps = mean + draws[:, i] * np.sqrt(shocks.var[r])
        xi = system.A @ expectations.at(i) + eps @ system.C.T
        x[:, i], p[:, i] = xi[:, 0], xi[:, 1]
    n_next = params.n_bar * (1.0 + params.delta_x * x + params.delta_pi * p)
    trace.get_current_span().add_event("simulated", {"paths": n_paths, "periods": periods})
    return DsgeSample(x, p, n_next)


def exact_nominal_df_mc(
    params: DsgeParams, shocks: ShockSpec, expectations: ExpectationPath, i: int, n_paths: int, seed: int
) -> Estimate:
    """Brute-force E^Q[1/(1+τ_{i+1} n_{i+1})]."""
    sample = simulate_dsge(params, shocks, expectations, n_paths, seed, periods=i + 1, risk_neutral=True)
    return Estimate.from_samples(1.0 / (1.0 + params.tau_at(i + 1) * sample.n_next[:, i]))


def exact_real_df_mc(
    params: DsgeParams, shocks: ShockSpec, expectations: ExpectationPath, i: int, n_paths: int, seed: int
) -> Estimate:
    """Brute-force E^Q[(1+τ_i p_i)/(1+τ_{i+1} n_{i+1})]."""
    sample = simulate_dsge(params, shocks, expectations, n_paths, seed, periods=i + 1, risk_neutral=True)
    tau_i, tau_next = _tau_pair(params, i)
    return Estimate.from_samples((1.0 + tau_i * sample.p[:, i]) / (1.0 + tau_next * sample.n_next[:, i]))
