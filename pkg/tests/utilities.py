"""Test utilities."""
import os
from pathlib import Path
from typing import Optional

import numpy as np
from ctcb.domain import ModelFunctions, StepFunction, StructuralParams
from ctcb.market_data import MarketSnapshot, load_snapshot
from ctcb.model import zeta
from ctcb.support.documents import ModelFunctionsDocument, StructuralParamsDocument

DATA_DIR = Path(os.environ.get("TEST_DATA_PATH", "misc/data"))
SNAPSHOT_FILE = DATA_DIR / "market_2012-12-07.csv"
SNAPSHOT_JSON_FILE = DATA_DIR / "market_2012-12-07.json"
STRUCTURAL_FILE = DATA_DIR / "structural_params.json"
SINGLE_CURRENCY_FILE = DATA_DIR / "single_currency_params.json"
DSGE_EXAMPLE_FILE = DATA_DIR / "moment_match_dsge.json"
CONTINUOUS_EXAMPLE_FILE = DATA_DIR / "moment_match_continuous.json"
STRESS_FILE = DATA_DIR / "stress_trades.json"
HEDGE_FILE = DATA_DIR / "hedge_trades.json"
SHORT_RATE_1Y = 0.0022
"""Zero rate of the bundled 1y pillar; the curve is flat before it, so n(0) equals it."""


def get_snapshot() -> MarketSnapshot:
    """The bundled December 2012 snapshot."""
    return load_snapshot(SNAPSHOT_FILE)


def get_structural() -> StructuralParams:
    """The bundled economic assumptions."""
    return StructuralParamsDocument.model_validate_json(STRUCTURAL_FILE.read_text()).to_domain()


def get_single_currency_funcs(structural: StructuralParams) -> ModelFunctions:
    """The single-currency simulation parameter set."""
    return ModelFunctionsDocument.model_validate_json(SINGLE_CURRENCY_FILE.read_text()).to_domain(structural)


def make_funcs(
    structural: StructuralParams,
    b_I: tuple[float, ...] = (0.001, 0.0005, 0.002),
    b_X: tuple[float, ...] = (-0.003, 0.001, 0.002),
    s_I: tuple[float, ...] = (0.002, 0.004, 0.006),
    s_X: tuple[float, ...] = (0.008, 0.001, 0.002),
    a_I: float = 0.001,
    a_X: float = -0.01,
    m_I0: float = 0.015,
    m_X0: Optional[float] = None,
) -> ModelFunctions:
    """Constant model functions with distinct components, derived volatilities populated.

    m_X0 defaults to the value that starts the short rate at the bundled curve's n(0).
    """
    if m_X0 is None:
        m_X0 = -(float(zeta(0.0, structural)) * SHORT_RATE_1Y + structural.h_p * m_I0) / structural.h_x
    funcs = ModelFunctions(
        a_I=StepFunction.constant(a_I),
        a_X=StepFunction.constant(a_X),
        b_I=StepFunction.constant(np.array(b_I)),
        b_X=StepFunction.constant(np.array(b_X)),
        s_I=StepFunction.constant(np.array(s_I)),
        s_X=StepFunction.constant(np.array(s_X)),
        lam=StepFunction.constant(np.zeros(len(b_I))),
        m_I0=m_I0,
        m_X0=m_X0,
    )
    return funcs.with_derived(structural)


def within_se(value: float, estimate: float, stderr: float, k: float = 3.0, slack: float = 1e-6) -> bool:
    """True when ``estimate`` lies within k standard errors of ``value``, plus an absolute slack."""
    return abs(estimate - value) <= k * stderr + slack
