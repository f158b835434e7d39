"""Shared fixtures."""
import os
import tempfile
from typing import Generator

import pytest
from ctcb.calibration import CalibConfig, CalibResult, calibrate
from ctcb.config import ENV_VAR_CTCB_DATA
from ctcb.domain import ModelFunctions, StructuralParams
from ctcb.market_data import MarketSnapshot

from tests.utilities import get_single_currency_funcs, get_snapshot, get_structural, make_funcs


@pytest.fixture(scope="session")
def snapshot() -> MarketSnapshot:
    """December 2012 snapshot."""
    return get_snapshot()


@pytest.fixture(scope="session")
def structural() -> StructuralParams:
    """Economic assumptions: delta 5%, Omega 5, h_p 1.75, h_x 2.5."""
    return get_structural()


@pytest.fixture(scope="session")
def funcs(structural: StructuralParams) -> ModelFunctions:
    """Constant functions with distinct volatility components."""
    return make_funcs(structural)


@pytest.fixture(scope="session")
def single_currency(structural: StructuralParams) -> ModelFunctions:
    """Single-currency simulation parameters."""
    return get_single_currency_funcs(structural)


@pytest.fixture(scope="session")
def calibrated(snapshot: MarketSnapshot, structural: StructuralParams) -> CalibResult:
    """Single-pass calibration on the December 2012 data."""
    return calibrate(snapshot, structural, CalibConfig(correlation_passes=1))


@pytest.fixture()
def data_dir() -> Generator[str, None, None]:
    """Point CTCB_DATA at a temporary directory."""
    previous = os.environ.get(ENV_VAR_CTCB_DATA)
    with tempfile.TemporaryDirectory() as temp_dir:
        os.environ[ENV_VAR_CTCB_DATA] = temp_dir
        yield temp_dir
    if previous is None:
        os.environ.pop(ENV_VAR_CTCB_DATA, None)
    else:
        os.environ[ENV_VAR_CTCB_DATA] = previous
