"""Closed-form nominal rate products under the Hull-White dual of the model."""

import logging as log
from dataclasses import dataclass
from typing import Self

import numpy as np
from scipy.special import ndtr

from .config import OptionKind, SwaptionKind
from .constants import NSTAR_BRACKET, ROOT_TOL
from .errors import ModelError
from .market_data import NominalCurve
from .model import HullWhiteDual
from .support.solvers import bracketed_root


@dataclass(frozen=True)
class LognormalLaw:
    """Log-mean M and log-stdev V of a lognormal quantity."""

    M: float
    V: float

    def __post_init__(self: Self) -> None:
        """Reject negative or non-finite parameters."""
        if not (np.isfinite(self.M) and np.isfinite(self.V)) or self.V < 0:
            raise ModelError(f"Lognormal law needs finite M and V >= 0, got M={self.M}, V={self.V}")

    @property
    def expectation(self: Self) -> float:
        """e^{M+V²/2}."""
        return float(np.exp(self.M + 0.5 * self.V**2))


def _omega(kind: OptionKind | int) -> int:
    return kind.omega if isinstance(kind, OptionKind) else int(np.sign(kind))


def black_lognormal(law: LognormalLaw, strike: float, kind: OptionKind | int) -> float:
    """Undiscounted E[(ω(X - K))⁺] for log X ~ N(M, V²).

    Args:
        law: Law of log X.
        strike: K > 0.
        kind: call/put or ω = ±1.

    Returns:
        ωe^{M+V²/2}N(ω(M-log K+V²)/V) - ωK N(ω(M-log K)/V); the intrinsic value on e^M when V = 0.
    """
    if not strike > 0:
        raise ModelError(f"Lognormal option strike must be > 0, got {strike}")
    omega = _omega(kind)
    if law.V == 0.0:
        return max(omega * (np.exp(law.M) - strike), 0.0)
    log_k = np.log(strike)
    d1 = (law.M - log_k + law.V**2) / law.V
    d2 = (law.M - log_k) / law.V
    return float(omega * law.expectation * ndtr(omega * d1) - omega * strike * ndtr(omega * d2))


def _check_times(t: float, T1: float, T2: float) -> None:
    if not t <= T1 <= T2:
        raise ModelError(f"Expected t <= T1 <= T2, got {t}, {T1}, {T2}")


def _discount(curve: NominalCurve, t: float, T: float) -> float:
    """P(t,T) implied by the initial curve."""
    return float(curve.discount(T) / curve.discount(t)) if t > 0 else float(curve.discount(T))


def vp_variance(t: float, T1: float, T2: float, dual: HullWhiteDual) -> float:
    """Variance of log P(T1,T2) seen from t: (e^{-δT2} - e^{-δT1})²/δ² ∫_t^{T1} σ*(u)²e^{2δu}du."""
    _check_times(t, T1, T2)
    if T1 == t or T2 == T1:
        return 0.0
    scale = (dual.beta(T2) - dual.beta(T1)) ** 2 / dual.delta**2
    return float(scale * dual.sigma_integral(t, T1))


def zbo(kind: OptionKind, t: float, T1: float, T2: float, K: float, curve: NominalCurve, dual: HullWhiteDual) -> float:
    """Option expiring at T1 on the zero bond maturing at T2, strike K."""
    _check_times(t, T1, T2)
    if not K > 0:
        raise ModelError(f"Zero-bond option strike must be > 0, got {K}")
    p1, p2 = _discount(curve, t, T1), _discount(curve, t, T2)
    omega = kind.omega
    sd = np.sqrt(vp_variance(t, T1, T2, dual))
    if sd == 0.0:
        return max(omega * (p2 - K * p1), 0.0)
    h = np.log(p2 / (p1 * K)) / sd + 0.5 * sd
    return float(omega * p2 * ndtr(omega * h) - omega * K * p1 * ndtr(omega * (h - sd)))


def forward_libor(curve: NominalCurve, T1: float, T2: float, t: float = 0.0) -> float:
    """Simply compounded forward rate over [T1, T2]."""
    tau = T2 - T1
    if tau <= 0:
        raise ModelError(f"Accrual period must be positive, got [{T1}, {T2}]")
    return (_discount(curve, t, T1) / _discount(curve, t, T2) - 1.0) / tau


def fra_value(t: float, T1: float, T2: float, K: float, notional: float, curve: NominalCurve) -> float:
    """PV of receiving Libor and paying K over [T1, T2]."""
    tau = T2 - T1
    return notional * tau * (forward_libor(curve, T1, T2, t) - K) * _discount(curve, t, T2)


def caplet_floorlet(
    kind: OptionKind,
    t: float,
    T1: float,
    T2: float,
    K: float,
    notional: float,
    curve: NominalCurve,
    dual: HullWhiteDual,
) -> float:
    """Caplet (call) or floorlet (put) fixing at T1 and paying at T2.

    A caplet is (1+Kτ) puts on P(T1,T2) struck at 1/(1+Kτ); the floorlet uses the call.
    """
    tau = T2 - T1
    if tau <= 0:
        raise ModelError(f"Caplet accrual period must be positive, got [{T1}, {T2}]")
    growth = 1.0 + K * tau
    if growth <= 0:
        raise ModelError(f"Caplet strike {K} gives a non-positive bond strike")
    bond_kind = OptionKind.PUT if kind is OptionKind.CALL else OptionKind.CALL
    return notional * growth * zbo(bond_kind, t, T1, T2, 1.0 / growth, curve, dual)


@dataclass(frozen=True, eq=False)
class SwapSchedule:
    """Fixed leg of a swap starting at ``expiry``; the last coupon carries the unit notional."""

    expiry: float
    payment_times: np.ndarray
    fixed_rate: float

    def __post_init__(self: Self) -> None:
        """Check the payment times."""
        times = np.atleast_1d(np.asarray(self.payment_times, dtype=float))
        if times.size == 0:
            raise ModelError("Swap schedule has no payment times")
        if times[0] <= self.expiry or np.any(np.diff(times) <= 0):
            raise ModelError(f"Payment times must be increasing and after the expiry {self.expiry}: {times}")
        object.__setattr__(self, "payment_times", times)

    @classmethod
    def regular(cls: type[Self], expiry: float, tenor: float, fixed_rate: float, frequency: float = 1.0) -> Self:
        """Payments every ``frequency`` years from expiry+frequency to expiry+tenor."""
        n = int(round(tenor / frequency))
        if n < 1:
            raise ModelError(f"Tenor {tenor} is shorter than one period of {frequency}")
        return cls(expiry, expiry + frequency * np.arange(1, n + 1), fixed_rate)

    @property
    def accruals(self: Self) -> np.ndarray:
        """T_i - T_{i-1} with T_0 the expiry."""
        return np.diff(np.concatenate(([self.expiry], self.payment_times)))

    @property
    def coupons(self: Self) -> np.ndarray:
        """c_i = Kτ_i, plus one on the last payment."""
        c = self.fixed_rate * self.accruals
        c[-1] += 1.0
        return c

    def with_rate(self: Self, fixed_rate: float) -> Self:
        """Same dates, another fixed rate."""
        return SwapSchedule(self.expiry, self.payment_times, fixed_rate)


def annuity(schedule: SwapSchedule, curve: NominalCurve, t: float = 0.0) -> float:
    """Σ τ_i P(t,T_i)."""
    pairs = zip(schedule.accruals, schedule.payment_times, strict=True)
    return float(sum(tau * _discount(curve, t, T) for tau, T in pairs))


def par_swap_rate(schedule: SwapSchedule, curve: NominalCurve, t: float = 0.0) -> float:
    """Fixed rate giving a zero-value forward swap."""
    return (_discount(curve, t, schedule.expiry) - _discount(curve, t, schedule.payment_times[-1])) / annuity(
        schedule, curve, t
    )


def swap_value(schedule: SwapSchedule, curve: NominalCurve, t: float = 0.0, notional: float = 1.0) -> float:
    """PV of the forward payer swap: P(t,T) - Σ c_i P(t,T_i)."""
    fixed = sum(c * _discount(curve, t, T) for c, T in zip(schedule.coupons, schedule.payment_times, strict=True))
    return notional * (_discount(curve, t, schedule.expiry) - fixed)


def cap_floor(
    kind: OptionKind,
    t: float,
    schedule: SwapSchedule,
    K: float,
    notional: float,
    curve: NominalCurve,
    dual: HullWhiteDual,
) -> float:
    """Strip of caplets or floorlets over the schedule periods, the first fixing at the expiry."""
    starts = np.concatenate(([schedule.expiry], schedule.payment_times[:-1]))
    return float(
        sum(
            caplet_floorlet(kind, t, T1, T2, K, notional, curve, dual)
            for T1, T2 in zip(starts, schedule.payment_times, strict=True)
        )
    )


def jamshidian_nstar(schedule: SwapSchedule, dual: HullWhiteDual, strike: float = 1.0) -> float:
    """Short rate at the expiry for which the coupon bond is worth ``strike``.

    Σ c_i A(T,T_i)e^{-n* B(T,T_i)} = K; the left side decreases in n, searched on [-1, 2].

    Raises:
        SolverError: no root in the bracket; the message carries the end-point residual.
    """
    a, b = dual.bond_reconstruction(schedule.expiry, schedule.payment_times)
    c = schedule.coupons

    def excess(n: float) -> float:
        return float(np.sum(c * a * np.exp(-n * b)) - strike)

    def slope(n: float) -> float:
        return float(-np.sum(c * a * b * np.exp(-n * b)))

    result = bracketed_root(excess, *NSTAR_BRACKET, x0=0.0, fprime=slope, tol=ROOT_TOL)
    log.debug("Jamshidian n* = %s after %s %s iterations", result.root, result.iterations, result.method)
    return result.root


def swaption(
    kind: SwaptionKind,
    schedule: SwapSchedule,
    curve: NominalCurve,
    dual: HullWhiteDual,
    t: float = 0.0,
    notional: float = 1.0,
) -> float:
    """European swaption expiring at the schedule expiry.

    A payer swaption is a put on the coupon bond struck at par, decomposed into
    zero-bond puts with expiry T struck at X_i = A(T,T_i)e^{-n*B(T,T_i)}.
    """
    nstar = jamshidian_nstar(schedule, dual)
    a, b = dual.bond_reconstruction(schedule.expiry, schedule.payment_times)
    strikes = a * np.exp(-nstar * b)
    bond_kind = OptionKind.PUT if kind is SwaptionKind.PAYER else OptionKind.CALL
    value = sum(
        c * zbo(bond_kind, t, schedule.expiry, T, X, curve, dual)
        for c, T, X in zip(schedule.coupons, schedule.payment_times, strikes, strict=True)
    )
    return notional * float(value)
