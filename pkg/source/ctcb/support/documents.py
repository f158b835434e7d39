"""JSON documents for files read and written by ctcb.

Domain objects hold numpy arrays; these pydantic models are their on-disk form.
"""

from datetime import date
from typing import Optional, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import Product, VectorConvention
from ..constants import BROWNIAN_DIM
from ..domain import ModelFunctions, StepFunction, StructuralParams, Trade, VarianceWeights


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SnapshotRowDocument(_Document):
    """One maturity of a market snapshot."""

    maturity_years: float
    nominal_ir: float
    zc_breakeven: float
    atm_caplet_pv: Optional[float] = None
    atm_cap_pv: Optional[float] = None
    atm_zc_infl_option_pv: float

    @model_validator(mode="after")
    def _one_cap_column(self: Self) -> Self:
        if (self.atm_caplet_pv is None) == (self.atm_cap_pv is None):
            raise ValueError("exactly one of atm_caplet_pv and atm_cap_pv is required")
        return self


class SnapshotDocument(_Document):
    """Market snapshot file."""

    as_of: Optional[date] = None
    rows: list[SnapshotRowDocument]


class StepFunctionDocument(_Document):
    """Breakpoints and per-segment values."""

    breakpoints: list[float]
    values: list[float] | list[list[float]]

    def to_domain(self: Self) -> StepFunction:
        """Build the step function."""
        return StepFunction(np.array(self.breakpoints), np.array(self.values))

    @classmethod
    def from_domain(cls: type[Self], fn: StepFunction) -> Self:
        """Capture a step function."""
        return cls(breakpoints=fn.breakpoints.tolist(), values=fn.values.tolist())


class StructuralParamsDocument(_Document):
    """Structural parameters; Omega may be replaced by zeta0."""

    delta: float
    Omega: Optional[float] = None
    zeta0: Optional[float] = None
    h_x: float
    h_p: float
    x_bar: float
    p_bar: float

    @model_validator(mode="after")
    def _omega_or_zeta0(self: Self) -> Self:
        if (self.Omega is None) == (self.zeta0 is None):
            raise ValueError("exactly one of Omega and zeta0 is required")
        return self

    def to_domain(self: Self) -> StructuralParams:
        """Build the structural parameters."""
        common = {"delta": self.delta, "h_x": self.h_x, "h_p": self.h_p, "x_bar": self.x_bar, "p_bar": self.p_bar}
        if self.zeta0 is not None:
            return StructuralParams.from_zeta0(self.zeta0, **common)
        return StructuralParams(Omega=self.Omega, **common)

    @classmethod
    def from_domain(cls: type[Self], params: StructuralParams) -> Self:
        """Capture structural parameters."""
        return cls(
            delta=params.delta,
            Omega=params.Omega,
            h_x=params.h_x,
            h_p=params.h_p,
            x_bar=params.x_bar,
            p_bar=params.p_bar,
        )


class WeightsDocument(_Document):
    """Variance-split weight vectors."""

    b_I: list[float]
    b_X: list[float]
    s_I: list[float]
    s_X: list[float]


ScalarFunction = float | StepFunctionDocument
VectorFunction = float | list[float] | StepFunctionDocument


class ModelFunctionsDocument(_Document):
    """Model functions file.

    Constant functions can be given as numbers (one value for every Brownian
    component, read per ``vector_convention``) or as vectors.
    """

    brownian_dim: int = Field(default=BROWNIAN_DIM, ge=1)
    vector_convention: VectorConvention = VectorConvention.PER_COMPONENT
    a_I: ScalarFunction
    a_X: ScalarFunction
    b_I: VectorFunction
    b_X: VectorFunction
    s_I: VectorFunction
    s_X: VectorFunction
    lam: VectorFunction = Field(default=0.0, alias="lambda")
    m_I0: float
    m_X0: Optional[float] = None
    n0: Optional[float] = None
    weights: Optional[WeightsDocument] = None
    s_M: Optional[StepFunctionDocument] = None
    s_L: Optional[StepFunctionDocument] = None
    bond_vol_override: Optional[float | list[float]] = None

    def _vector(self: Self, value: float | list[float]) -> np.ndarray:
        if isinstance(value, list):
            return np.array(value, dtype=float)
        scale = 1.0 if self.vector_convention is VectorConvention.PER_COMPONENT else 1.0 / np.sqrt(self.brownian_dim)
        return np.full(self.brownian_dim, value * scale)

    def _vector_function(self: Self, value: VectorFunction) -> StepFunction:
        if isinstance(value, StepFunctionDocument):
            return value.to_domain()
        return StepFunction.constant(self._vector(value))

    def to_domain(self: Self, structural: Optional[StructuralParams] = None) -> ModelFunctions:
        """Build model functions.

        m_X0 may be omitted when n0 is given; it then follows from
        ζ(0)n(0) = -h_p m_I(0) - h_x m_X(0), which needs the structural parameters.
        """
        if self.m_X0 is not None:
            m_X0 = self.m_X0
        elif self.n0 is not None and structural is not None:
            zeta0 = np.expm1(structural.delta * structural.Omega) / structural.delta
            m_X0 = -(zeta0 * self.n0 + structural.h_p * self.m_I0) / structural.h_x
        else:
            raise ValueError("m_X0 is required unless n0 and structural parameters are given")
        funcs = ModelFunctions(
            a_I=self.a_I.to_domain() if isinstance(self.a_I, StepFunctionDocument) else StepFunction.constant(self.a_I),
            a_X=self.a_X.to_domain() if isinstance(self.a_X, StepFunctionDocument) else StepFunction.constant(self.a_X),
            b_I=self._vector_function(self.b_I),
            b_X=self._vector_function(self.b_X),
            s_I=self._vector_function(self.s_I),
            s_X=self._vector_function(self.s_X),
            lam=self._vector_function(self.lam),
            m_I0=self.m_I0,
            m_X0=float(m_X0),
            weights=VarianceWeights.from_raw(**self.weights.model_dump()) if self.weights else None,
            bond_vol_override=None if self.bond_vol_override is None else self._vector(self.bond_vol_override),
        )
        return funcs.with_derived(structural) if structural is not None else funcs

    @classmethod
    def from_domain(cls: type[Self], funcs: ModelFunctions) -> Self:
        """Capture model functions with every function written out as a step function."""
        optional = {}
        if funcs.weights is not None:
            w = funcs.weights
            optional["weights"] = WeightsDocument(
                b_I=w.b_I.tolist(), b_X=w.b_X.tolist(), s_I=w.s_I.tolist(), s_X=w.s_X.tolist()
            )
        for name in ("s_M", "s_L"):
            if getattr(funcs, name) is not None:
                optional[name] = StepFunctionDocument.from_domain(getattr(funcs, name))
        if funcs.bond_vol_override is not None:
            optional["bond_vol_override"] = funcs.bond_vol_override.tolist()
        return cls(
            brownian_dim=funcs.dim,
            **{
                name: StepFunctionDocument.from_domain(getattr(funcs, name))
                for name in ("a_I", "a_X", "b_I", "b_X", "s_I", "s_X", "lam")
            },
            m_I0=funcs.m_I0,
            m_X0=funcs.m_X0,
            **optional,
        )


class CalibReportDocument(_Document):
    """Summary of a calibration run."""

    max_abs_error: float
    consistency_error: float
    correlations: dict[str, float]
    diagnostics: list[str]
    steps: int


class DsgeParamsDocument(_Document):
    """Parameters of the toy economy."""

    sigma: float
    k: float
    delta_pi: float
    delta_x: float
    beta: float
    n_bar: float
    tau: list[float] = Field(default_factory=lambda: [1.0])


class DsgeExampleDocument(_Document):
    """One-period toy economy for moment matching."""

    params: DsgeParamsDocument
    var_u: float = Field(ge=0)
    var_v: float = Field(ge=0)
    var_z: float = Field(ge=0)
    lam: Optional[list[float]] = Field(default=None, alias="lambda")
    x_next: float
    p_next: float
    current_rate: float
    targets: dict[str, float] = Field(default_factory=dict)
    reported: dict[str, float] = Field(default_factory=dict)
    """Previously published figures shown next to the computed ones."""


class ContinuousExampleDocument(_Document):
    """Continuous-time parameters for moment matching."""

    structural: StructuralParamsDocument
    functions: ModelFunctionsDocument
    horizon: float = Field(default=1.0, gt=0)
    reported: dict[str, float] = Field(default_factory=dict)


class TradeDocument(_Document):
    """One trade."""

    product: Product
    maturity: float
    strike: float
    kind: Optional[str] = None
    start: Optional[float] = None
    frequency: float = 1.0
    notional: float = 1.0
    position: float = 1.0
    label: Optional[str] = None

    def to_domain(self: Self) -> Trade:
        """Build the trade."""
        return Trade(**self.model_dump())


class StressDocument(_Document):
    """Trade list and named shock scenarios for a stress run."""

    trades: list[TradeDocument] = Field(min_length=1)
    scenarios: dict[str, list[str]] = Field(default_factory=dict)
    """Scenario name to shock assignments such as ``h_p=+0.5`` or ``delta=*1.2``."""


class HedgeDocument(_Document):
    """Client trade and hedge candidates."""

    client: TradeDocument
    candidates: list[TradeDocument]
