"""The continuous-time central bank model and its Hull-White dual.

With liquidity weight Z(T)=e^{δT} the short rate implied by the reaction function
follows a generalised Vasicek process with constant mean reversion δ and volatility
σ_n(t) = -(h_x b_X(t) + h_p b_I(t)) / ζ(t).
"""

import logging as log
from dataclasses import dataclass
from typing import Callable, Optional, Self

import numpy as np

from .config import Measure
from .constants import BROWNIAN_DIM, DERIVATIVE_STEP, INTEGRATION_STEP
from .domain import ArrayLike, ModelFunctions, StepFunction, StructuralParams
from .errors import ModelError
from .market_data import NominalCurve
from .support.quadrature import integrate, midpoint_grid

BondVolatility = Callable[[np.ndarray, float], np.ndarray]
"""σ_P(t, T) for an array of times t and one maturity T, shape (len(t), n)."""


@dataclass(frozen=True)
class GaussianLaw:
    """Mean and variance of a normal distribution."""

    mean: float
    variance: float

    @property
    def stdev(self: Self) -> float:
        """Standard deviation."""
        return float(np.sqrt(max(self.variance, 0.0)))


def liquidity_weight(T: ArrayLike, structural: StructuralParams) -> np.ndarray:
    """Z(T) = e^{δT}."""
    return np.exp(structural.delta * np.asarray(T, dtype=float))


def zeta(t: ArrayLike, structural: StructuralParams) -> np.ndarray:
    """ζ(t) = ∫_t^{t+Ω} Z(T) dT = e^{δt}(e^{δΩ}-1)/δ."""
    d = structural.delta
    return np.exp(d * np.asarray(t, dtype=float)) * np.expm1(d * structural.Omega) / d


def mean_reversion_speed(t: ArrayLike, structural: StructuralParams) -> np.ndarray:
    """[Z(t+Ω) - Z(t)] / ζ(t), which is δ for exponential Z."""
    t = np.asarray(t, dtype=float)
    return (liquidity_weight(t + structural.Omega, structural) - liquidity_weight(t, structural)) / zeta(t, structural)


def no_arb_gamma(structural: StructuralParams) -> float:
    """Natural money supply growth rate γ = h_p p̄ + h_x x̄."""
    return structural.gamma


def short_rate_from_drifts(t: ArrayLike, m_I: ArrayLike, m_X: ArrayLike, structural: StructuralParams) -> np.ndarray:
    """n(t) = -(h_p m_I + h_x m_X) / ζ(t)."""
    return -(structural.h_p * np.asarray(m_I) + structural.h_x * np.asarray(m_X)) / zeta(t, structural)


def short_rate_vol(t: ArrayLike, structural: StructuralParams, funcs: ModelFunctions) -> np.ndarray:
    """σ_n(t) componentwise; shape (n,) for scalar t, (len(t), n) for arrays."""
    z = zeta(t, structural)
    return -funcs.rate_loading(structural)(t) / (z[..., None] if np.ndim(z) else z)


def bond_vol(t: ArrayLike, T: ArrayLike, structural: StructuralParams, funcs: ModelFunctions) -> np.ndarray:
    """σ_P(t,T) = -σ_n(t) B(t,T) with B(t,T) = (1 - e^{-δ(T-t)})/δ."""
    b = hw_b(t, T, structural.delta)
    return -short_rate_vol(t, structural, funcs) * (b[..., None] if np.ndim(b) else b)


def hw_b(t: ArrayLike, T: ArrayLike, delta: float) -> np.ndarray:
    """B(t,T) = (1 - e^{-δ(T-t)})/δ."""
    return -np.expm1(-delta * (np.asarray(T, dtype=float) - np.asarray(t, dtype=float))) / delta


def bond_vol_function(structural: StructuralParams, funcs: ModelFunctions) -> BondVolatility:
    """The bond volatility the model prices with: the flat override when set, else the reaction-function one."""
    if funcs.bond_vol_override is not None:
        override = funcs.bond_vol_override

        def flat(t: np.ndarray, T: float) -> np.ndarray:
            return np.broadcast_to(override, (np.size(t), override.size)).copy()

        return flat
    return lambda t, T: bond_vol(np.atleast_1d(t), T, structural, funcs)


def money_supply_vol(t: ArrayLike, structural: StructuralParams, funcs: ModelFunctions) -> np.ndarray:
    """s_M(t) = h_p s_I(t) + h_x s_X(t)."""
    return structural.h_p * funcs.s_I(t) + structural.h_x * funcs.s_X(t)


def liquidity_vol(t: ArrayLike, structural: StructuralParams, funcs: ModelFunctions) -> np.ndarray:
    """s_L(t) = -Σ_P(t), the negated liquidity-weighted bond volatility."""
    return funcs.with_derived(structural).s_L(t)


def inverse_zeta_integral(u: ArrayLike, T: float, structural: StructuralParams) -> np.ndarray:
    """∫_u^T dv/ζ(v) = B(u,T)/ζ(u)."""
    return hw_b(u, T, structural.delta) / zeta(u, structural)


@dataclass(frozen=True, eq=False)
class HullWhiteDual:
    """Generalised Vasicek short rate equivalent to the CTCB model.

    σ_n(t) = loading(t)·e^{-δt} when ``damped`` (the CTCB case, loading = -(h_x b_X + h_p b_I)/ζ(0)),
    else loading(t). The curve fixes A(0,T) through the Ansatz β(T)=e^{-δT}.
    """

    delta: float
    curve: NominalCurve
    loading: StepFunction
    damped: bool = True
    step: float = INTEGRATION_STEP

    def __post_init__(self: Self) -> None:
        """Check the loading is a vector function."""
        if not self.loading.is_vector:
            raise ModelError("Hull-White loading must be a vector step function")
        if self.delta <= 0:
            raise ModelError(f"Mean reversion speed must be > 0, got {self.delta}")

    @classmethod
    def from_model(cls: type[Self], curve: NominalCurve, structural: StructuralParams, funcs: ModelFunctions) -> Self:
        """Dual of calibrated or given model functions."""
        z0 = float(zeta(0.0, structural))
        return cls(structural.delta, curve, funcs.rate_loading(structural) * (-1.0 / z0), damped=True)

    @classmethod
    def from_sigma(cls: type[Self], curve: NominalCurve, delta: float, sigma: StepFunction) -> Self:
        """Plain Hull-White with a vector step volatility."""
        return cls(delta, curve, sigma, damped=False)

    @property
    def a(self: Self) -> float:
        """Mean reversion speed."""
        return self.delta

    @property
    def n0(self: Self) -> float:
        """Initial short rate from the curve's short end."""
        return self.curve.short_rate()

    def sigma_n(self: Self, t: ArrayLike) -> np.ndarray:
        """Vector short-rate volatility."""
        t = np.asarray(t, dtype=float)
        vals = self.loading(t)
        if not self.damped:
            return vals
        decay = np.exp(-self.delta * t)
        return vals * (decay[..., None] if np.ndim(decay) else decay)

    def sigma_n_scalar(self: Self, t: ArrayLike) -> np.ndarray:
        """σ*_n(t), the Euclidean norm of σ_n(t)."""
        return np.linalg.norm(self.sigma_n(t), axis=-1)

    def beta(self: Self, T: ArrayLike) -> np.ndarray:
        """β(T) = e^{-δT}."""
        return np.exp(-self.delta * np.asarray(T, dtype=float))

    def beta_prime(self: Self, T: ArrayLike) -> np.ndarray:
        """β'(T)."""
        return -self.delta * self.beta(T)

    def b(self: Self, t: ArrayLike, T: ArrayLike) -> np.ndarray:
        """B(t,T)."""
        return hw_b(t, T, self.delta)

    def log_a0(self: Self, T: ArrayLike) -> np.ndarray:
        """log A(0,T) = log P(0,T) + n(0)β(T)."""
        return self.curve.log_discount(T) + self.n0 * self.beta(T)

    def a0(self: Self, T: ArrayLike) -> np.ndarray:
        """A(0,T) = P(0,T)/exp(-n(0)β(T))."""
        return np.exp(self.log_a0(T))

    def reconstruct_discount(self: Self, T: ArrayLike) -> np.ndarray:
        """P(0,T) = A(0,T) exp(-n(0)β(T))."""
        return self.a0(T) * np.exp(-self.n0 * self.beta(T))

    def sigma_integral(self: Self, t: float, T1: float) -> float:
        """∫_t^{T1} σ*(u)² e^{2δu} du, the core of every bond-option variance.

        Damped, the integrand is the squared loading norm and is integrated exactly.
        """
        if self.damped:
            return float(self.loading.map(lambda v: np.sum(v**2, axis=1)).integral(t, T1))
        return float(integrate(lambda u: self.sigma_n_scalar(u) ** 2 * np.exp(2.0 * self.delta * u), t, T1, self.step))

    def short_rate_variance(self: Self, s: float, t: float) -> float:
        """∫_s^t σ*(u)² e^{-2δ(t-u)} du."""
        return float(np.exp(-2.0 * self.delta * t) * self.sigma_integral(s, t))

    def forward_short_rate_law(self: Self, T: float) -> GaussianLaw:
        """Law of n(T) under the T-forward measure: mean f(0,T)."""
        return GaussianLaw(float(self.curve.forward_rate(T)), self.short_rate_variance(0.0, T))

    def bond_reconstruction(self: Self, T: float, S: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
        """(A(T,S), B(T,S)) with P(T,S) = A(T,S) e^{-n(T) B(T,S)}."""
        b = self.b(T, S)
        log_a = (
            self.curve.log_discount(S)
            - self.curve.log_discount(T)
            + b * self.curve.forward_rate(T)
            - 0.5 * b**2 * self.short_rate_variance(0.0, T)
        )
        return np.exp(log_a), b

    def bond_price(self: Self, T: float, S: ArrayLike, n: ArrayLike) -> np.ndarray:
        """P(T,S) given the short rate n(T); broadcasts over n."""
        a, b = self.bond_reconstruction(T, S)
        if np.ndim(S):
            return a * np.exp(-np.multiply.outer(np.asarray(n, dtype=float), b))
        return a * np.exp(-np.asarray(n) * b)

    def _d_log_a0(self: Self, t: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
        """First and second derivatives of log A0; one-sided near the origin."""
        c = np.maximum(t, h)
        f_minus, f_mid, f_plus = self.log_a0(c - h), self.log_a0(c), self.log_a0(c + h)
        first = (f_plus - f_minus) / (2.0 * h)
        second = (f_plus - 2.0 * f_mid + f_minus) / h**2
        near = t < h
        if np.any(near):
            first = np.where(near, (self.log_a0(t + h) - self.log_a0(t)) / h, first)
        return first, second

    def theta_curve(self: Self, t: ArrayLike, lam_dot_sigma: ArrayLike = 0.0, h: float = DERIVATIVE_STEP) -> np.ndarray:
        """Mean reversion level from the curve.

        θ(t) = λ·σ_n(t) - δ ∂log A0(t) - ∂²log A0(t) + β'(t)² ∫_0^t [σ*/β']² ds.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        first, second = self._d_log_a0(t, h)
        convexity = np.array([self.short_rate_variance(0.0, float(u)) for u in t])
        return np.asarray(lam_dot_sigma) - self.delta * first - second + convexity


def hw_ansatz_from_curve(
    curve: NominalCurve,
    structural: StructuralParams,
    funcs: Optional[ModelFunctions] = None,
    dim: int = BROWNIAN_DIM,
) -> HullWhiteDual:
    """Hull-White dual fitted to the nominal curve.

    Volatilities come from ``funcs`` when given, else they are zero in ``dim`` components.
    """
    if funcs is None:
        return HullWhiteDual(structural.delta, curve, StepFunction.constant(np.zeros(dim)), damped=True)
    return HullWhiteDual.from_model(curve, structural, funcs)


def hw_theta(
    t: ArrayLike,
    funcs: ModelFunctions,
    structural: StructuralParams,
    curve: Optional[NominalCurve] = None,
    from_curve: bool = False,
) -> np.ndarray:
    """Mean reversion level f₁(t).

    By default θ = -(h_p a_I + h_x a_X)/ζ(t). With ``from_curve`` the Hull-White
    formula on the nominal curve is used instead; the two agree once a_X has been
    derived from the curve.
    """
    if not from_curve:
        return -(structural.h_p * funcs.a_I(t) + structural.h_x * funcs.a_X(t)) / zeta(t, structural)
    if curve is None:
        raise ModelError("The curve-implied mean reversion level needs a nominal curve")
    dual = HullWhiteDual.from_model(curve, structural, funcs)
    lam_dot_sigma = np.einsum("...i,...i->...", funcs.lam(t), short_rate_vol(t, structural, funcs))
    return dual.theta_curve(t, lam_dot_sigma)


def integrate_short_rate(
    s: float,
    t: float,
    n_s: float,
    funcs: ModelFunctions,
    structural: StructuralParams,
    measure: Measure = Measure.P,
    step: float = INTEGRATION_STEP,
) -> GaussianLaw:
    """Law of n(t) given n(s) from the Ornstein-Uhlenbeck solution.

    Under Q the level is shifted by -λ·σ_n.
    """
    if t < s:
        raise ModelError(f"integrate_short_rate needs s <= t, got {s} > {t}")
    d = structural.delta

    def level(u: np.ndarray) -> np.ndarray:
        theta = hw_theta(u, funcs, structural)
        if measure is Measure.Q:
            theta = theta - np.einsum("ij,ij->i", funcs.lam(u), short_rate_vol(u, structural, funcs))
        return np.exp(-d * (t - u)) * theta

    mean = n_s * np.exp(-d * (t - s)) + float(integrate(level, s, t, step))
    variance = float(
        integrate(
            lambda u: np.sum(short_rate_vol(u, structural, funcs) ** 2, axis=-1) * np.exp(-2.0 * d * (t - u)),
            s,
            t,
            step,
        )
    )
    return GaussianLaw(mean, variance)


def model_log_discount_law(
    T: float, structural: StructuralParams, funcs: ModelFunctions, step: float = INTEGRATION_STEP
) -> GaussianLaw:
    """Risk-neutral law of ∫_0^T n(u) du in the simulated economy.

    ∫n = -(h_p m_I(0) + h_x m_X(0)) Z(0,T) - ∫ Z(u,T)(h_p dm_I + h_x dm_X), Z(u,T) = ∫_u^T dv/ζ(v).
    """
    nodes, weights = midpoint_grid(0.0, T, step)
    kernel = inverse_zeta_integral(nodes, T, structural)
    lam = funcs.lam(nodes)
    drift = structural.h_p * (funcs.a_I(nodes) - np.einsum("ij,ij->i", lam, funcs.b_I(nodes))) + structural.h_x * (
        funcs.a_X(nodes) - np.einsum("ij,ij->i", lam, funcs.b_X(nodes))
    )
    start = structural.h_p * funcs.m_I0 + structural.h_x * funcs.m_X0
    mean = -start * float(inverse_zeta_integral(0.0, T, structural)) - float(weights @ (kernel * drift))
    loading = funcs.rate_loading(structural)(nodes)
    variance = float(weights @ (kernel**2 * np.sum(loading**2, axis=1)))
    return GaussianLaw(mean, variance)


def model_discount_bond(
    T: float, structural: StructuralParams, funcs: ModelFunctions, step: float = INTEGRATION_STEP
) -> float:
    """E^Q[exp(-∫_0^T n)] of the simulated economy."""
    law = model_log_discount_law(T, structural, funcs, step)
    value = float(np.exp(-law.mean + 0.5 * law.variance))
    log.debug("Model discount bond %s: %s", T, value)
    return value
