"""Closed-form inflation products.

Every price is taken under the forward measure of its payment date T*, where the
Brownian motion carries the drift κ(u) = σ_P(u,T*) - λ(u). With that,

    g₁ = s_I·κ,  g₂ = a_I + b_I·κ,  g₄(s) = (T-s)b_I(s) + s_I(s),
    g₃(s) = m_I(t) + (T-s)g₂(s) + g₁(s) - ½|s_I(s)|²,
    g₅(s) = g₁(s) + (T-s)g₂(s) + ½|g₄(s)|² - ½|s_I(s)|²,

and log I(T)/I(t) ~ N(∫g₃, ∫|g₄|²).
"""

import logging as log
from dataclasses import dataclass, field
from typing import Callable, Optional, Self

import numpy as np
from scipy.stats import poisson

from .config import OptionKind
from .constants import INTEGRATION_STEP, MERTON_TAIL_TOL
from .domain import ModelFunctions, StructuralParams
from .errors import ModelError
from .ir_pricing import LognormalLaw, black_lognormal
from .market_data import MarketSnapshot, NominalCurve, bump_breakevens
from .model import bond_vol_function
from .support.quadrature import integrate


@dataclass(frozen=True)
class OptionPrice:
    """Undiscounted expectation and its present value."""

    undiscounted: float
    discounted: float


@dataclass(frozen=True, eq=False)
class GBundle:
    """The g-functions for an index ratio I(T)/I(t) under the T*-forward measure."""

    t: float
    T: float
    Tstar: float
    funcs: ModelFunctions
    structural: StructuralParams
    m_I_t: float
    _bond_vol: Callable[[np.ndarray, float], np.ndarray] = field(init=False, repr=False)

    def __post_init__(self: Self) -> None:
        """Check the time ordering and bind the bond volatility."""
        if not self.t <= self.T <= self.Tstar:
            raise ModelError(f"g-functions need t <= T <= T*, got {self.t}, {self.T}, {self.Tstar}")
        object.__setattr__(self, "_bond_vol", bond_vol_function(self.structural, self.funcs))

    def kappa(self: Self, s: np.ndarray) -> np.ndarray:
        """Brownian drift σ_P(s,T*) - λ(s) under the T*-forward measure."""
        s = np.atleast_1d(s)
        return self._bond_vol(s, self.Tstar) - self.funcs.lam(s)

    def g1(self: Self, s: np.ndarray) -> np.ndarray:
        """s_I·κ."""
        s = np.atleast_1d(s)
        return np.einsum("ij,ij->i", self.funcs.s_I(s), self.kappa(s))

    def g2(self: Self, s: np.ndarray) -> np.ndarray:
        """a_I + b_I·κ, the drift of m_I."""
        s = np.atleast_1d(s)
        return self.funcs.a_I(s) + np.einsum("ij,ij->i", self.funcs.b_I(s), self.kappa(s))

    def g3(self: Self, s: np.ndarray) -> np.ndarray:
        """Integrand of the log-mean."""
        s = np.atleast_1d(s)
        half_var = 0.5 * np.sum(self.funcs.s_I(s) ** 2, axis=1)
        return self.m_I_t + (self.T - s) * self.g2(s) + self.g1(s) - half_var

    def g4(self: Self, s: np.ndarray) -> np.ndarray:
        """Index volatility (T-s)b_I + s_I, shape (len(s), n)."""
        s = np.atleast_1d(s)
        return (self.T - s)[:, None] * self.funcs.b_I(s) + self.funcs.s_I(s)

    def g5(self: Self, s: np.ndarray) -> np.ndarray:
        """Integrand of the real-bond exponent, net of m_I(t)(T-t)."""
        s = np.atleast_1d(s)
        half_var = 0.5 * np.sum(self.funcs.s_I(s) ** 2, axis=1)
        return self.g1(s) + (self.T - s) * self.g2(s) + 0.5 * np.sum(self.g4(s) ** 2, axis=1) - half_var


def g_bundle(
    t: float,
    T: float,
    Tstar: float,
    funcs: ModelFunctions,
    structural: StructuralParams,
    m_I_t: Optional[float] = None,
) -> GBundle:
    """g-functions for I(T)/I(t) under the T*-forward measure; m_I(t) defaults to m_I(0)."""
    return GBundle(t, T, Tstar, funcs, structural, funcs.m_I0 if m_I_t is None else m_I_t)


def _discount(curve: NominalCurve, t: float, T: float) -> float:
    return float(curve.discount(T) / curve.discount(t)) if t > 0 else float(curve.discount(T))


def zc_log_moments(
    t: float,
    T: float,
    funcs: ModelFunctions,
    structural: StructuralParams,
    m_I_t: Optional[float] = None,
    step: float = INTEGRATION_STEP,
) -> LognormalLaw:
    """Law of log I(T)/I(t) under the T-forward measure."""
    bundle = g_bundle(t, T, T, funcs, structural, m_I_t)
    mean = float(integrate(bundle.g3, t, T, step))
    variance = float(integrate(lambda s: np.sum(bundle.g4(s) ** 2, axis=1), t, T, step))
    return LognormalLaw(mean, np.sqrt(max(variance, 0.0)))


def zc_option(
    t: float,
    T: float,
    K: float,
    kind: OptionKind,
    funcs: ModelFunctions,
    structural: StructuralParams,
    curve: NominalCurve,
    m_I_t: Optional[float] = None,
) -> OptionPrice:
    """Zero-coupon inflation cap (call) or floor (put) paying (ω(I(T)/I(t) - (1+K)^{T-t}))⁺ at T."""
    if K <= -1:
        raise ModelError(f"Zero-coupon strike must be > -1, got {K}")
    law = zc_log_moments(t, T, funcs, structural, m_I_t)
    undiscounted = black_lognormal(law, (1.0 + K) ** (T - t), kind)
    return OptionPrice(undiscounted, _discount(curve, t, T) * undiscounted)


def zciis_fair_strike(
    t: float, T: float, funcs: ModelFunctions, structural: StructuralParams, m_I_t: Optional[float] = None
) -> float:
    """Strike K with (1+K)^{T-t} = E^T[I(T)/I(t)]."""
    if T <= t:
        raise ModelError(f"ZCIIS maturity must follow the valuation time, got {T} <= {t}")
    law = zc_log_moments(t, T, funcs, structural, m_I_t)
    return float(np.expm1((law.M + 0.5 * law.V**2) / (T - t)))


def zciis_value(
    t: float,
    T: float,
    K: float,
    notional: float,
    funcs: ModelFunctions,
    structural: StructuralParams,
    curve: NominalCurve,
    m_I_t: Optional[float] = None,
) -> float:
    """PV of receiving I(T)/I(t) - 1 against (1+K)^{T-t} - 1 at T."""
    law = zc_log_moments(t, T, funcs, structural, m_I_t)
    return notional * _discount(curve, t, T) * (law.expectation - (1.0 + K) ** (T - t))


@dataclass(frozen=True)
class ForwardIndex:
    """Forward price index Î(t,T) and real zero bond P^r(t,T)."""

    index: float
    real_bond: float


def forward_index_and_real_bond(
    t: float,
    T: float,
    I_t: float,
    funcs: ModelFunctions,
    structural: StructuralParams,
    curve: NominalCurve,
    m_I_t: Optional[float] = None,
) -> ForwardIndex:
    """Î(t,T) = I(t)e^{M+V²/2} and P^r(t,T) = P(t,T)e^{M+V²/2}."""
    if I_t <= 0:
        raise ModelError(f"Index level must be > 0, got {I_t}")
    bundle = g_bundle(t, T, T, funcs, structural, m_I_t)
    growth = np.exp(bundle.m_I_t * (T - t) + float(integrate(bundle.g5, t, T)))
    return ForwardIndex(float(I_t * growth), float(_discount(curve, t, T) * growth))


def _log_expected_ratio(bundle: GBundle, split: float, step: float) -> float:
    """log E^T[I(T)/I(t)] integrated piecewise over [t, split] and [split, T]."""
    total = bundle.m_I_t * (bundle.T - bundle.t)
    for a, b in ((bundle.t, split), (split, bundle.T)):
        total += float(integrate(bundle.g5, a, b, step))
    return total


def yoy_log_law(
    t: float,
    Tj: float,
    Ti: float,
    funcs: ModelFunctions,
    structural: StructuralParams,
    m_I_t: Optional[float] = None,
    step: float = INTEGRATION_STEP,
) -> LognormalLaw:
    """Law of log I(Ti)/I(Tj) under the Ti-forward measure.

    The mean is (Ti-Tj)[m_I(t) + ∫_t^{Tj}g₂] + ∫_{Tj}^{Ti}[(Ti-u)g₂ + g₁ - ½|s_I|²]; the variance
    is (Ti-Tj)²∫_t^{Tj}|b_I|² + ∫_{Tj}^{Ti}|(Ti-u)b_I + s_I|².
    """
    if not t <= Tj < Ti:
        raise ModelError(f"Year-on-year period needs t <= Tj < Ti, got {t}, {Tj}, {Ti}")
    tau = Ti - Tj
    inner = g_bundle(Tj, Ti, Ti, funcs, structural, m_I_t)
    outer = g_bundle(t, Ti, Ti, funcs, structural, m_I_t)
    mean = tau * (inner.m_I_t + float(integrate(outer.g2, t, Tj, step))) + float(
        integrate(lambda s: inner.g3(s) - inner.m_I_t, Tj, Ti, step)
    )
    variance = tau**2 * float(integrate(lambda s: np.sum(funcs.b_I(s) ** 2, axis=1), t, Tj, step)) + float(
        integrate(lambda s: np.sum(inner.g4(s) ** 2, axis=1), Tj, Ti, step)
    )
    return LognormalLaw(mean, np.sqrt(max(variance, 0.0)))


def yoy_forward(
    t: float,
    Tj: float,
    Ti: float,
    funcs: ModelFunctions,
    structural: StructuralParams,
    m_I_t: Optional[float] = None,
    step: float = INTEGRATION_STEP,
) -> float:
    """E^{Ti}[I(Ti)/I(Tj)] as the ratio of forward indices times a convexity factor.

    The convexity exponent is
    ∫_t^{Tj}[(σ_P(u,Tj) - σ_P(u,Ti))·s_Î(u,Tj) + |s_Î(u,Tj)|² - s_Î(u,Ti)·s_Î(u,Tj)]du
    with s_Î(u,T) = (T-u)b_I(u) + s_I(u).
    """
    if not t <= Tj < Ti:
        raise ModelError(f"Year-on-year period needs t <= Tj < Ti, got {t}, {Tj}, {Ti}")
    near = g_bundle(t, Tj, Tj, funcs, structural, m_I_t)
    far = g_bundle(t, Ti, Ti, funcs, structural, m_I_t)
    log_ratio = _log_expected_ratio(far, Tj, step) - _log_expected_ratio(near, Tj, step)
    bond_vol = bond_vol_function(structural, funcs)

    def convexity(u: np.ndarray) -> np.ndarray:
        s_near, s_far = near.g4(u), far.g4(u)
        vol_gap = bond_vol(u, Tj) - bond_vol(u, Ti)
        return np.sum(vol_gap * s_near + s_near**2 - s_far * s_near, axis=1)

    return float(np.exp(log_ratio + float(integrate(convexity, t, Tj, step))))


def yoy_option(
    t: float,
    Tj: float,
    Ti: float,
    K: float,
    kind: OptionKind,
    funcs: ModelFunctions,
    structural: StructuralParams,
    curve: NominalCurve,
    m_I_t: Optional[float] = None,
) -> OptionPrice:
    """Year-on-year caplet (call) or floorlet (put) paying (ω(I(Ti)/I(Tj) - (1+K)))⁺ at Ti."""
    if K <= -1:
        raise ModelError(f"Year-on-year strike must be > -1, got {K}")
    law = yoy_log_law(t, Tj, Ti, funcs, structural, m_I_t)
    undiscounted = black_lognormal(law, 1.0 + K, kind)
    return OptionPrice(undiscounted, _discount(curve, t, Ti) * undiscounted)


def yoy_swap_leg(
    t: float,
    payment_times: np.ndarray,
    funcs: ModelFunctions,
    structural: StructuralParams,
    curve: NominalCurve,
    start: Optional[float] = None,
    notional: float = 1.0,
) -> float:
    """PV of the leg paying I(T_i)/I(T_{i-1}) - 1 at each T_i; the first period starts at ``start`` (default t)."""
    times = np.concatenate(([t if start is None else start], np.asarray(payment_times, dtype=float)))
    pv = 0.0
    for Tj, Ti in zip(times[:-1], times[1:], strict=True):
        pv += _discount(curve, t, Ti) * (yoy_forward(t, Tj, Ti, funcs, structural) - 1.0)
    return notional * pv


@dataclass(frozen=True)
class JumpSpec:
    """Compound Poisson jumps in log I with normal log-jump sizes."""

    intensity: float
    mu_J: float
    delta_J: float
    tail_tol: float = MERTON_TAIL_TOL

    def __post_init__(self: Self) -> None:
        """Reject negative intensities and jump volatilities."""
        if self.intensity < 0 or self.delta_J < 0:
            raise ModelError(f"Jump intensity and volatility must be >= 0, got {self.intensity}, {self.delta_J}")
        if not 0 < self.tail_tol < 1:
            raise ModelError(f"Tail tolerance must be in (0, 1), got {self.tail_tol}")

    @property
    def k(self: Self) -> float:
        """Mean relative jump e^{μ_J+δ_J²/2} - 1."""
        return float(np.expm1(self.mu_J + 0.5 * self.delta_J**2))

    def count_weights(self: Self, horizon: float) -> np.ndarray:
        """Poisson probabilities of 0..N jumps, N the first count whose upper tail is below the tolerance."""
        mean = self.intensity * horizon
        if mean == 0.0:
            return np.ones(1)
        n_max = int(poisson.isf(self.tail_tol, mean)) + 1
        return poisson.pmf(np.arange(n_max + 1), mean)


def merton_zc_option(
    t: float,
    T: float,
    K: float,
    kind: OptionKind,
    funcs: ModelFunctions,
    structural: StructuralParams,
    jumps: JumpSpec,
    m_I_t: Optional[float] = None,
) -> float:
    """Undiscounted zero-coupon option with compensated jumps in the index.

    A mixture over jump counts n of lognormal prices with M_n = M - hkτ + nμ_J and V_n² = V² + nδ_J².
    """
    if K <= -1:
        raise ModelError(f"Zero-coupon strike must be > -1, got {K}")
    tau = T - t
    law = zc_log_moments(t, T, funcs, structural, m_I_t)
    strike = (1.0 + K) ** tau
    weights = jumps.count_weights(tau)
    log.debug("Merton mixture over %s jump counts", weights.size)
    price = 0.0
    for n, weight in enumerate(weights):
        law_n = LognormalLaw(
            law.M - jumps.intensity * jumps.k * tau + n * jumps.mu_J, np.sqrt(law.V**2 + n * jumps.delta_J**2)
        )
        price += weight * black_lognormal(law_n, strike, kind)
    return float(price)


def inflation_delta(price_fn: Callable[[MarketSnapshot], float], snapshot: MarketSnapshot, bp: float = 1.0) -> float:
    """Change of ``price_fn`` when every breakeven moves up by ``bp`` basis points, per basis point."""
    if bp == 0:
        raise ModelError("Breakeven bump must be non-zero")
    return (price_fn(bump_breakevens(snapshot, bp)) - price_fn(snapshot)) / bp
