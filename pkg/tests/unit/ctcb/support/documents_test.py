"""Documents module unit tests."""
import numpy as np
import pytest
from ctcb.calibration import CalibResult
from ctcb.domain import StructuralParams
from ctcb.model import short_rate_from_drifts
from ctcb.support.documents import (
    ModelFunctionsDocument,
    SnapshotRowDocument,
    StepFunctionDocument,
    StructuralParamsDocument,
    TradeDocument,
)
from pydantic import ValidationError

from tests.utilities import SINGLE_CURRENCY_FILE

FUNCTIONS = {"a_I": 0.005, "a_X": 0.0, "b_I": 0.003, "b_X": 0.0, "s_I": 0.003, "s_X": 0.0, "m_I0": 0.0}


@pytest.mark.parametrize(
    ("caps", "valid"),
    [
        ({"atm_caplet_pv": 0.001}, True),
        ({"atm_cap_pv": 0.004}, True),
        ({}, False),
        ({"atm_caplet_pv": 0.1, "atm_cap_pv": 0.4}, False),
    ],
)
def test_snapshot_row_cap_column(caps: dict[str, float], valid: bool) -> None:
    """Test exactly one caplet or cap column is accepted."""
    row = {"maturity_years": 1.0, "nominal_ir": 0.002, "zc_breakeven": 0.015, "atm_zc_infl_option_pv": 0.004} | caps
    if valid:
        SnapshotRowDocument.model_validate(row)
    else:
        with pytest.raises(ValidationError):
            SnapshotRowDocument.model_validate(row)


def test_structural_from_zeta0(structural: StructuralParams) -> None:
    """Test zeta0 is converted to the equivalent liquidity horizon."""
    zeta0 = np.expm1(structural.delta * structural.Omega) / structural.delta
    document = StructuralParamsDocument.from_domain(structural).model_dump(exclude={"Omega", "zeta0"})
    params = StructuralParamsDocument(**document, zeta0=zeta0).to_domain()
    assert params.Omega == pytest.approx(structural.Omega, rel=1e-12)
    with pytest.raises(ValidationError):
        StructuralParamsDocument(**document)
    with pytest.raises(ValidationError):
        StructuralParamsDocument(**document, Omega=5.0, zeta0=zeta0)


def test_scalar_conventions() -> None:
    """Test scalar volatilities per component and split over the total."""
    per_component = ModelFunctionsDocument.model_validate(FUNCTIONS | {"m_X0": 0.0}).to_domain()
    np.testing.assert_allclose(per_component.b_I(0.0), [0.003] * 3)
    total = ModelFunctionsDocument.model_validate(FUNCTIONS | {"m_X0": 0.0, "vector_convention": "total"}).to_domain()
    assert np.linalg.norm(total.b_I(0.0)) == pytest.approx(0.003)
    np.testing.assert_array_equal(total.lam(0.0), np.zeros(3))


def test_bundled_functions(structural: StructuralParams) -> None:
    """Test the single-currency file with its bond volatility override."""
    funcs = ModelFunctionsDocument.model_validate_json(SINGLE_CURRENCY_FILE.read_text()).to_domain(structural)
    np.testing.assert_allclose(funcs.bond_vol_override, [0.01] * 3)
    assert funcs.s_M is not None


def test_m_X0_from_short_rate(structural: StructuralParams) -> None:
    """Test m_X0 follows from a given short rate."""
    funcs = ModelFunctionsDocument.model_validate(FUNCTIONS | {"m_I0": 0.02, "n0": 0.01}).to_domain(structural)
    assert float(short_rate_from_drifts(0.0, funcs.m_I0, funcs.m_X0, structural)) == pytest.approx(0.01, abs=1e-14)
    with pytest.raises(ValueError, match="m_X0 is required"):
        ModelFunctionsDocument.model_validate(FUNCTIONS | {"n0": 0.01}).to_domain()


def test_model_functions_capture(calibrated: CalibResult, structural: StructuralParams) -> None:
    """Test calibrated functions survive the file form, weights and lambda alias included."""
    text = ModelFunctionsDocument.from_domain(calibrated.funcs).model_dump_json(by_alias=True)
    assert '"lambda"' in text
    funcs = ModelFunctionsDocument.model_validate_json(text).to_domain(structural)
    for name in ("a_I", "a_X", "b_I", "b_X", "s_I", "s_X", "lam", "s_M", "s_L"):
        assert getattr(funcs, name).allclose(getattr(calibrated.funcs, name), atol=1e-15)
    assert (funcs.m_I0, funcs.m_X0) == (calibrated.funcs.m_I0, calibrated.funcs.m_X0)
    np.testing.assert_allclose(funcs.weights.b_I, calibrated.funcs.weights.b_I)


def test_step_function_document() -> None:
    """Test scalar and vector step functions."""
    scalar = StepFunctionDocument(breakpoints=[0.0, 1.0], values=[0.1, 0.2]).to_domain()
    assert float(scalar(1.5)) == pytest.approx(0.2)
    vector = StepFunctionDocument(breakpoints=[0.0], values=[[0.1, 0.2, 0.3]]).to_domain()
    assert vector.dim == 3


def test_forbid_unknown_fields() -> None:
    """Test misspelt keys are refused."""
    with pytest.raises(ValidationError):
        TradeDocument.model_validate({"product": "cap", "maturity": 5, "strike": 0.01, "notionl": 2})
    with pytest.raises(ValidationError):
        TradeDocument.model_validate({"product": "straddle", "maturity": 5, "strike": 0.01})
