"""Domain classes for ctcb."""

import logging as log
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Self

import numpy as np

from .config import Product
from .constants import BROWNIAN_DIM, UNIT_NORM_TOL
from .errors import ModelError

ArrayLike = float | np.ndarray


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error."""

    value: float
    stderr: float

    @classmethod
    def from_samples(cls: type[Self], samples: np.ndarray) -> Self:
        """Mean and std(ddof=1)/√n of a 1-d sample."""
        samples = np.asarray(samples, dtype=float)
        if samples.size < 2:
            raise ModelError("An estimate needs at least two samples")
        return cls(float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(samples.size)))

    def z_score(self: Self, reference: float) -> float:
        """Distance to ``reference`` in standard errors; 0 when both coincide with zero error."""
        gap = self.value - reference
        if self.stderr == 0.0:
            return 0.0 if gap == 0.0 else float(np.copysign(np.inf, gap))
        return float(gap / self.stderr)


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous piecewise-constant function of time.

    Segment k holds ``values[k]`` on [breakpoints[k], breakpoints[k+1]). Evaluation is
    flat beyond the last breakpoint and before the first one.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    """Shape (K,) for scalar functions, (K, n) for n-vector functions."""

    def __post_init__(self: Self) -> None:
        """Coerce to float arrays and check the segment layout."""
        bp = np.atleast_1d(np.asarray(self.breakpoints, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 0:
            vals = vals.reshape(1)
        if bp.ndim != 1 or bp.size == 0:
            raise ModelError("Step function needs at least one breakpoint")
        if np.any(np.diff(bp) <= 0):
            raise ModelError(f"Step function breakpoints must be strictly increasing: {bp}")
        if vals.shape[0] != bp.size or vals.ndim > 2:
            raise ModelError(f"Step function has {bp.size} breakpoints but values of shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ModelError("Step function values must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls: type[Self], value: ArrayLike, start: float = 0.0) -> Self:
        """A single-segment function."""
        return cls(np.array([start]), np.asarray(value, dtype=float)[None, ...])

    @classmethod
    def annual(cls: type[Self], values: np.ndarray, start: float = 0.0, step: float = 1.0) -> Self:
        """Segments of equal length starting at ``start``."""
        values = np.asarray(values, dtype=float)
        return cls(start + step * np.arange(values.shape[0]), values)

    @property
    def is_vector(self: Self) -> bool:
        """True for n-vector valued functions."""
        return self.values.ndim == 2

    @property
    def dim(self: Self) -> int:
        """Brownian dimension of a vector function, 0 for scalars."""
        return self.values.shape[1] if self.is_vector else 0

    @property
    def n_segments(self: Self) -> int:
        """Number of segments."""
        return self.breakpoints.size

    def segment_index(self: Self, t: ArrayLike) -> np.ndarray:
        """Index of the segment containing t."""
        idx = np.searchsorted(self.breakpoints, np.asarray(t, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def __call__(self: Self, t: ArrayLike) -> np.ndarray:
        """Evaluate at a time or an array of times."""
        return self.values[self.segment_index(t)]

    def norm(self: Self) -> Self:
        """Scalar function of the per-segment Euclidean norms."""
        norms = np.linalg.norm(self.values, axis=1) if self.is_vector else np.abs(self.values)
        return StepFunction(self.breakpoints, norms)

    def map(self: Self, fn: Callable[[np.ndarray], np.ndarray]) -> Self:
        """Apply ``fn`` to the value array."""
        return StepFunction(self.breakpoints, fn(self.values))

    def combine(self: Self, other: Self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Self:
        """Pointwise binary operation on the union of both breakpoint sets."""
        bp = np.union1d(self.breakpoints, other.breakpoints)
        return StepFunction(bp, fn(self(bp), other(bp)))

    def __add__(self: Self, other: Self) -> Self:
        """Pointwise sum."""
        return self.combine(other, np.add)

    def __sub__(self: Self, other: Self) -> Self:
        """Pointwise difference."""
        return self.combine(other, np.subtract)

    def __mul__(self: Self, scalar: float) -> Self:
        """Scale by a number."""
        return StepFunction(self.breakpoints, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self: Self) -> Self:
        """Negate."""
        return self * -1.0

    def integral(self: Self, a: float, b: float) -> np.ndarray:
        """Exact ∫_a^b of the function; zero when b <= a."""
        if b <= a:
            return np.zeros(self.values.shape[1:]) if self.is_vector else np.float64(0.0)
        inner = self.breakpoints[(self.breakpoints > a) & (self.breakpoints < b)]
        edges = np.concatenate(([a], inner, [b]))
        return np.tensordot(np.diff(edges), self(edges[:-1]), axes=(0, 0))

    def with_segment(self: Self, k: int, value: ArrayLike) -> Self:
        """Copy with segment k replaced."""
        values = self.values.copy()
        values[k] = value
        return StepFunction(self.breakpoints, values)

    def refine(self: Self, breakpoints: np.ndarray) -> Self:
        """Same function expressed on the union of its breakpoints and ``breakpoints``."""
        bp = np.union1d(self.breakpoints, breakpoints)
        return StepFunction(bp, self(bp))

    def allclose(self: Self, other: Self, atol: float = 0.0, rtol: float = 0.0) -> bool:
        """Pointwise equality on the union of breakpoints."""
        bp = np.union1d(self.breakpoints, other.breakpoints)
        return bool(np.allclose(self(bp), other(bp), atol=atol, rtol=rtol))


def zero_vector_function(dim: int = BROWNIAN_DIM) -> StepFunction:
    """The constant zero n-vector function."""
    return StepFunction.constant(np.zeros(dim))


def zero_scalar_function() -> StepFunction:
    """The constant zero scalar function."""
    return StepFunction.constant(0.0)


@dataclass(frozen=True)
class StructuralParams:
    """Central bank and economy constants. They are inputs from economic research, not calibration targets."""

    delta: float
    """Exponent of the liquidity weight Z(T)=e^{δT}."""
    Omega: float
    """Liquidity horizon of the central bank, in years."""
    h_x: float
    h_p: float
    x_bar: float
    p_bar: float

    def __post_init__(self: Self) -> None:
        """Reject non-positive weights and horizons."""
        for name in ("delta", "Omega", "h_x", "h_p"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ModelError(f"Structural parameter {name} must be > 0, got {value}")

    @classmethod
    def from_zeta0(
        cls: type[Self], zeta0: float, delta: float, h_x: float, h_p: float, x_bar: float, p_bar: float
    ) -> Self:
        """Build from ζ(0), solving (e^{δΩ}-1)/δ = ζ(0) for Ω."""
        if zeta0 <= 0:
            raise ModelError(f"zeta(0) must be > 0, got {zeta0}")
        omega = float(np.log1p(delta * zeta0) / delta)
        return cls(delta=delta, Omega=omega, h_x=h_x, h_p=h_p, x_bar=x_bar, p_bar=p_bar)

    @property
    def gamma(self: Self) -> float:
        """Natural money supply growth rate."""
        return self.h_p * self.p_bar + self.h_x * self.x_bar

    def shocked(self: Self, **changes: float) -> Self:
        """Copy with some fields replaced."""
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class VarianceWeights:
    """Unit-norm directions splitting each volatility function across the Brownian components."""

    b_I: np.ndarray
    b_X: np.ndarray
    s_I: np.ndarray
    s_X: np.ndarray

    def __post_init__(self: Self) -> None:
        """Check every direction has unit norm."""
        for name in ("b_I", "b_X", "s_I", "s_X"):
            w = np.asarray(getattr(self, name), dtype=float)
            if abs(np.linalg.norm(w) - 1.0) > UNIT_NORM_TOL * 1e3:
                raise ModelError(f"Weight vector w_{name} must have unit norm, got {np.linalg.norm(w)}")
            object.__setattr__(self, name, w / np.linalg.norm(w))

    @classmethod
    def uniform(cls: type[Self], dim: int = BROWNIAN_DIM) -> Self:
        """Equal split over all components."""
        w = np.full(dim, 1.0 / np.sqrt(dim))
        return cls(w, w.copy(), w.copy(), w.copy())

    @classmethod
    def from_raw(cls: type[Self], b_I: np.ndarray, b_X: np.ndarray, s_I: np.ndarray, s_X: np.ndarray) -> Self:
        """Normalise arbitrary non-zero vectors onto the unit sphere."""
        return cls(*(np.asarray(v, dtype=float) / np.linalg.norm(v) for v in (b_I, b_X, s_I, s_X)))

    @property
    def dim(self: Self) -> int:
        """Brownian dimension."""
        return self.b_I.size


@dataclass(frozen=True, eq=False)
class ModelFunctions:
    """Time-dependent CTCB functions, calibrated or given.

    Drifts are scalar step functions; volatilities and the market price of risk are
    n-vector step functions sharing one Brownian dimension.
    """

    a_I: StepFunction
    a_X: StepFunction
    b_I: StepFunction
    b_X: StepFunction
    s_I: StepFunction
    s_X: StepFunction
    lam: StepFunction
    m_I0: float
    m_X0: float
    weights: Optional[VarianceWeights] = None
    s_M: Optional[StepFunction] = None
    s_L: Optional[StepFunction] = None
    bond_vol_override: Optional[np.ndarray] = field(default=None)
    """Flat exogenous bond volatility used instead of the reaction-function bond volatility."""

    def __post_init__(self: Self) -> None:
        """Check scalar/vector shapes and a common Brownian dimension."""
        for name in ("a_I", "a_X"):
            if getattr(self, name).is_vector:
                raise ModelError(f"{name} must be a scalar step function")
        dims = {name: getattr(self, name).dim for name in ("b_I", "b_X", "s_I", "s_X", "lam")}
        if len(set(dims.values())) != 1 or 0 in dims.values():
            raise ModelError(f"Volatility functions must share one Brownian dimension, got {dims}")
        if self.weights is not None and self.weights.dim != self.dim:
            raise ModelError(f"Weights have dimension {self.weights.dim}, functions {self.dim}")
        if self.bond_vol_override is not None:
            override = np.asarray(self.bond_vol_override, dtype=float)
            if override.shape != (self.dim,):
                raise ModelError(f"bond_vol_override must be a {self.dim}-vector")
            object.__setattr__(self, "bond_vol_override", override)

    @property
    def dim(self: Self) -> int:
        """Brownian dimension."""
        return self.b_I.dim

    def rate_loading(self: Self, structural: StructuralParams) -> StepFunction:
        """h_x b_X + h_p b_I, the numerator of the short-rate volatility."""
        return self.b_X * structural.h_x + self.b_I * structural.h_p

    def with_derived(self: Self, structural: StructuralParams) -> Self:
        """Copy with s_M and s_L populated from the no-arbitrage conditions."""
        s_M = self.s_I * structural.h_p + self.s_X * structural.h_x
        d, omega = structural.delta, structural.Omega
        s_L = self.rate_loading(structural) * (-(1.0 - d * omega / np.expm1(d * omega)) / d)
        return replace(self, s_M=s_M, s_L=s_L)

    def check_consistency(self: Self, structural: StructuralParams) -> None:
        """Raise when the derived volatilities disagree with the no-arbitrage conditions."""
        derived = self.with_derived(structural)
        for name in ("s_M", "s_L"):
            current = getattr(self, name)
            if current is not None and not current.allclose(getattr(derived, name), atol=1e-14):
                raise ModelError(f"{name} is inconsistent with the structural parameters")
        log.debug("Model functions consistent with structural parameters")

    def replace(self: Self, **changes: object) -> Self:
        """Copy with some functions replaced; derived volatilities are dropped unless given."""
        changes.setdefault("s_M", None)
        changes.setdefault("s_L", None)
        return replace(self, **changes)


@dataclass(frozen=True)
class Trade:
    """A position in one product.

    ``maturity`` is the final payment date. ``start`` is the first fixing of caps, floors and
    swaptions (default one ``frequency`` after today) and the fixing of caplets and year-on-year
    options (default one ``frequency`` before maturity).
    """

    product: Product
    maturity: float
    strike: float
    kind: Optional[str] = None
    """call/put for inflation options, payer/receiver for swaptions; implied by the product otherwise."""
    start: Optional[float] = None
    frequency: float = 1.0
    notional: float = 1.0
    position: float = 1.0
    """+1 long, -1 short; any sign-carrying multiple is allowed."""
    label: Optional[str] = None

    def __post_init__(self: Self) -> None:
        """Check dates and amounts."""
        if self.maturity <= 0 or self.frequency <= 0:
            raise ModelError(f"Trade maturity and frequency must be > 0, got {self.maturity}, {self.frequency}")
        if self.start is not None and self.start < 0:
            raise ModelError(f"Trade start must be >= 0, got {self.start}")

    @property
    def name(self: Self) -> str:
        """Label, else a description built from the terms."""
        if self.label:
            return self.label
        kind = f" {self.kind}" if self.kind else ""
        return f"{self.product.value}{kind} {self.maturity:g}y K={self.strike:g}"
