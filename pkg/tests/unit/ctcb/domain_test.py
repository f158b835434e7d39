"""Domain module unit tests."""
from dataclasses import replace

import numpy as np
import pytest
from ctcb.config import Product
from ctcb.domain import Estimate, ModelFunctions, StepFunction, StructuralParams, Trade, VarianceWeights
from ctcb.errors import ModelError


@pytest.mark.parametrize(
    ("t", "expected"),
    [
        (-1.0, 1.0),
        (0.0, 1.0),
        (0.99, 1.0),
        (1.0, 2.0),
        (1.5, 2.0),
        (2.0, 3.0),
        (50.0, 3.0),
    ],
)
def test_step_function_is_right_continuous(t: float, expected: float) -> None:
    """Test segment lookup at and between breakpoints."""
    fn = StepFunction(np.array([0.0, 1.0, 2.0]), np.array([1.0, 2.0, 3.0]))
    assert fn(t) == expected


@pytest.mark.parametrize(
    ("breakpoints", "values"),
    [
        ([0.0, 0.0], [1.0, 2.0]),
        ([1.0, 0.0], [1.0, 2.0]),
        ([0.0, 1.0], [1.0]),
        ([0.0], [np.nan]),
    ],
)
def test_step_function_rejects_bad_layout(breakpoints: list[float], values: list[float]) -> None:
    """Test invalid segment layouts."""
    with pytest.raises(ModelError):
        StepFunction(np.array(breakpoints), np.array(values))


def test_vector_step_function() -> None:
    """Test vector evaluation, norm and dimension."""
    fn = StepFunction(np.array([0.0, 1.0]), np.array([[3.0, 4.0], [0.0, 1.0]]))
    assert fn.is_vector
    assert fn.dim == 2
    np.testing.assert_allclose(fn(0.5), [3.0, 4.0])
    np.testing.assert_allclose(fn.norm()(np.array([0.5, 1.5])), [5.0, 1.0])


def test_step_function_arithmetic_uses_union_of_breakpoints() -> None:
    """Test sum, difference and scaling."""
    f = StepFunction(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    g = StepFunction(np.array([0.0, 0.5]), np.array([10.0, 20.0]))
    total = f + g
    np.testing.assert_allclose(total.breakpoints, [0.0, 0.5, 1.0])
    np.testing.assert_allclose(total(np.array([0.25, 0.75, 2.0])), [11.0, 21.0, 22.0])
    np.testing.assert_allclose((g - f)(0.75), 19.0)
    np.testing.assert_allclose((2.0 * f)(1.5), 4.0)
    np.testing.assert_allclose((-f)(0.0), -1.0)
    assert f.refine(np.array([0.5])).allclose(f)
    assert f.with_segment(1, 5.0)(3.0) == 5.0


def test_step_function_annual() -> None:
    """Test equal-length segments."""
    fn = StepFunction.annual(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(fn.breakpoints, [0.0, 1.0, 2.0])


def test_step_function_integral() -> None:
    """Test exact integrals across breakpoints, scalar and vector."""
    f = StepFunction(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    assert float(f.integral(0.5, 2.5)) == pytest.approx(3.5, abs=1e-15)
    assert float(f.integral(1.2, 1.2)) == 0.0
    g = StepFunction(np.array([0.0, 1.0]), np.array([[3.0, 4.0], [0.0, 1.0]]))
    np.testing.assert_allclose(g.integral(0.5, 1.5), [1.5, 2.5], atol=1e-15)
    np.testing.assert_array_equal(g.integral(2.0, 1.0), np.zeros(2))


@pytest.mark.parametrize("name", ["delta", "Omega", "h_x", "h_p"])
def test_structural_params_reject_non_positive(name: str) -> None:
    """Test positivity of weights and horizons."""
    params = {"delta": 0.05, "Omega": 5.0, "h_x": 2.5, "h_p": 1.75, "x_bar": 0.02, "p_bar": 0.02}
    params[name] = 0.0
    with pytest.raises(ModelError):
        StructuralParams(**params)


def test_structural_params_from_zeta0(structural: StructuralParams) -> None:
    """Test the Omega recovered from zeta(0)."""
    zeta0 = np.expm1(structural.delta * structural.Omega) / structural.delta
    rebuilt = StructuralParams.from_zeta0(zeta0, structural.delta, structural.h_x, structural.h_p, 0.02, 0.02)
    assert rebuilt.Omega == pytest.approx(structural.Omega, abs=1e-12)
    assert structural.gamma == pytest.approx(1.75 * 0.02 + 2.5 * 0.02)
    assert structural.shocked(h_p=2.25).h_p == 2.25


def test_variance_weights() -> None:
    """Test unit norms and normalisation of raw vectors."""
    uniform = VarianceWeights.uniform(3)
    assert np.linalg.norm(uniform.b_I) == pytest.approx(1.0)
    raw = VarianceWeights.from_raw(np.array([3.0, 4.0, 0.0]), np.ones(3), np.ones(3), np.array([0.0, 0.0, 2.0]))
    np.testing.assert_allclose(raw.b_I, [0.6, 0.8, 0.0])
    np.testing.assert_allclose(raw.s_X, [0.0, 0.0, 1.0])
    with pytest.raises(ModelError):
        VarianceWeights(np.ones(3), np.ones(3), np.ones(3), np.ones(3))


def test_model_functions_derived_volatilities(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test s_M = h_p s_I + h_x s_X and the consistency check."""
    expected = structural.h_p * funcs.s_I(0.0) + structural.h_x * funcs.s_X(0.0)
    np.testing.assert_allclose(funcs.s_M(0.0), expected)
    funcs.check_consistency(structural)
    tampered = replace(funcs, s_M=funcs.s_M * 2.0)
    with pytest.raises(ModelError):
        tampered.check_consistency(structural)


def test_model_functions_reject_mixed_dimensions(funcs: ModelFunctions) -> None:
    """Test a common Brownian dimension."""
    with pytest.raises(ModelError):
        funcs.replace(b_I=StepFunction.constant(np.zeros(2)))
    with pytest.raises(ModelError):
        funcs.replace(a_I=StepFunction.constant(np.zeros(3)))


def test_model_functions_replace_drops_derived(funcs: ModelFunctions) -> None:
    """Test derived volatilities are dropped on replacement."""
    changed = funcs.replace(a_I=StepFunction.constant(0.02))
    assert changed.s_M is None
    assert changed.s_L is None
    assert changed.a_I(0.0) == 0.02


@pytest.mark.parametrize(
    ("trade", "expected"),
    [
        (Trade(Product.ZC_OPTION, 10.0, 0.02, kind="call"), "zc-option call 10y K=0.02"),
        (Trade(Product.CAPLET, 6.0, 0.01), "caplet 6y K=0.01"),
        (Trade(Product.FLOOR, 10.0, 0.0, label="hedge"), "hedge"),
    ],
)
def test_trade_name(trade: Trade, expected: str) -> None:
    """Test trade names."""
    assert trade.name == expected


@pytest.mark.parametrize(
    ("maturity", "frequency", "start"),
    [
        (0.0, 1.0, None),
        (5.0, 0.0, None),
        (5.0, 1.0, -1.0),
    ],
)
def test_trade_rejects_bad_dates(maturity: float, frequency: float, start: float) -> None:
    """Test trade date validation."""
    with pytest.raises(ModelError):
        Trade(Product.CAP, maturity, 0.01, start=start, frequency=frequency)


def test_estimate() -> None:
    """Test sample mean, standard error and z-score."""
    estimate = Estimate.from_samples(np.array([1.0, 2.0, 3.0, 4.0]))
    assert estimate.value == pytest.approx(2.5)
    assert estimate.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)
    assert estimate.z_score(2.5) == 0.0
    assert Estimate(1.0, 0.0).z_score(1.0) == 0.0
    assert Estimate(1.0, 0.0).z_score(0.0) == np.inf
    with pytest.raises(ModelError):
        Estimate.from_samples(np.array([1.0]))
