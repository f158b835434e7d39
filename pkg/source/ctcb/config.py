"""Configurations for ctcb."""

from enum import Enum
from typing import Self

ENV_VAR_CTCB_DATA = "CTCB_DATA"
ENV_VAR_CTCB_THREADS = "CTCB_THREADS"
ENV_VAR_CTCB_LOG_LEVEL = "CTCB_LOG_LEVEL"


class Measure(str, Enum):
    """Probability measures the economy can be simulated under."""

    P = "P"
    Q = "Q"
    FORWARD = "forward"


class CalibStrategy(str, Enum):
    """Ordering of the separable calibration."""

    NOMINAL_FIRST = "nominal_first"
    INFLATION_FIRST = "inflation_first"


class LambdaPolicy(str, Enum):
    """How market prices of risk enter the calibration."""

    ZERO = "zero"
    GIVEN = "given"


class GrowthDriftMethod(str, Enum):
    """How the growth drift a_X is derived from the nominal curve."""

    THETA = "theta"
    """Pointwise from the Hull-White mean reversion level on the integration grid."""
    PILLAR = "pillar"
    """Annual segments solved so the simulated economy reprices each nominal pillar."""


class OptionKind(str, Enum):
    """Cap/floor style of a European option."""

    CALL = "call"
    PUT = "put"

    @property
    def omega(self: Self) -> int:
        """+1 for calls, -1 for puts."""
        return 1 if self is OptionKind.CALL else -1


class SwaptionKind(str, Enum):
    """Payer or receiver swaption."""

    PAYER = "payer"
    RECEIVER = "receiver"


class VectorConvention(str, Enum):
    """Reading of scalar volatility inputs that apply to every Brownian component."""

    PER_COMPONENT = "per_component"
    TOTAL = "total"


class ShockComponent(str, Enum):
    """DSGE shock that is pinned when bootstrapping market prices of risk."""

    U = "u"
    V = "v"
    Z = "z"


class OutputFormat(str, Enum):
    """File formats for CLI output."""

    CSV = "csv"
    JSON = "json"


class Product(str, Enum):
    """Tradable products known to the pricer."""

    ZC_OPTION = "zc-option"
    YOY_OPTION = "yoy-option"
    ZCIIS = "zciis"
    CAPLET = "caplet"
    FLOORLET = "floorlet"
    CAP = "cap"
    FLOOR = "floor"
    SWAPTION = "swaption"
