"""Model module unit tests."""
import numpy as np
import pytest
from ctcb.domain import ModelFunctions, StepFunction, StructuralParams
from ctcb.errors import ModelError
from ctcb.market_data import MarketSnapshot, NominalCurve
from ctcb.model import (
    HullWhiteDual,
    bond_vol,
    bond_vol_function,
    hw_theta,
    integrate_short_rate,
    liquidity_vol,
    liquidity_weight,
    mean_reversion_speed,
    model_discount_bond,
    model_log_discount_law,
    money_supply_vol,
    short_rate_from_drifts,
    short_rate_vol,
    zeta,
)
from ctcb.support.quadrature import integrate

from tests.utilities import make_funcs

ZERO = (0.0, 0.0, 0.0)


def test_mean_reversion_speed_is_delta(structural: StructuralParams) -> None:
    """Test that exponential liquidity weights give a constant mean reversion speed."""
    t = np.linspace(0.0, 50.0, 1000)
    np.testing.assert_allclose(mean_reversion_speed(t, structural), structural.delta, rtol=0.0, atol=1e-12)


def test_zeta(structural: StructuralParams) -> None:
    """Test zeta against direct integration of the liquidity weight."""
    direct = integrate(lambda T: liquidity_weight(T, structural), 2.0, 2.0 + structural.Omega, 1e-4)
    assert zeta(2.0, structural) == pytest.approx(float(direct), rel=1e-8)


def test_short_rate_from_drifts(structural: StructuralParams) -> None:
    """Test zeta(t) n(t) = -(h_p m_I + h_x m_X)."""
    n = short_rate_from_drifts(1.5, 0.02, -0.01, structural)
    assert zeta(1.5, structural) * n == pytest.approx(-(1.75 * 0.02 - 2.5 * 0.01))


def test_short_rate_vol_shapes(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test scalar and array evaluation and the bond volatility relation."""
    assert short_rate_vol(1.0, structural, funcs).shape == (3,)
    assert short_rate_vol(np.array([0.5, 1.0]), structural, funcs).shape == (2, 3)
    expected = -funcs.rate_loading(structural)(1.0) / zeta(1.0, structural)
    np.testing.assert_allclose(short_rate_vol(1.0, structural, funcs), expected)
    b = (1.0 - np.exp(-structural.delta * 4.0)) / structural.delta
    np.testing.assert_allclose(bond_vol(1.0, 5.0, structural, funcs), -expected * b)


def test_bond_vol_override(structural: StructuralParams, single_currency: ModelFunctions) -> None:
    """Test the flat exogenous bond volatility."""
    sigma = bond_vol_function(structural, single_currency)
    np.testing.assert_allclose(sigma(np.array([0.0, 3.0]), 10.0), np.full((2, 3), 0.01))


@pytest.mark.parametrize("t", [0.0, 1.0, 7.5])
def test_liquidity_vol_matches_weighted_bond_vol(funcs: ModelFunctions, structural: StructuralParams, t: float) -> None:
    """Test s_L(t) = -∫_t^{t+Ω} Z(T) σ_P(t,T) dT."""
    direct = integrate(
        lambda T: liquidity_weight(T, structural)[:, None] * bond_vol(t, T, structural, funcs),
        t,
        t + structural.Omega,
        1e-4,
    )
    np.testing.assert_allclose(liquidity_vol(t, structural, funcs), -direct, rtol=1e-7)
    np.testing.assert_allclose(
        money_supply_vol(t, structural, funcs), structural.h_p * funcs.s_I(t) + structural.h_x * funcs.s_X(t)
    )


def test_dual_reprices_nominal_curve(
    snapshot: MarketSnapshot, funcs: ModelFunctions, structural: StructuralParams
) -> None:
    """Test that A(0,T) and beta reconstruct every nominal pillar."""
    dual = HullWhiteDual.from_model(snapshot.nominal, structural, funcs)
    mats = snapshot.maturities
    np.testing.assert_allclose(dual.reconstruct_discount(mats), snapshot.nominal.discount(mats), rtol=0.0, atol=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.7, 4.0])
def test_dual_volatility_matches_model(funcs: ModelFunctions, structural: StructuralParams, t: float) -> None:
    """Test the damped loading reproduces the model's short-rate volatility."""
    dual = HullWhiteDual.from_model(NominalCurve.flat(0.02), structural, funcs)
    np.testing.assert_allclose(dual.sigma_n(t), short_rate_vol(t, structural, funcs), rtol=1e-12)
    assert dual.a == structural.delta


def test_bond_reconstruction_without_volatility(structural: StructuralParams) -> None:
    """Test P(T,S) at the forward rate equals the forward discount factor when volatility vanishes."""
    curve = NominalCurve(np.array([1.0, 5.0, 10.0]), np.array([0.01, 0.02, 0.025]))
    dual = HullWhiteDual.from_sigma(curve, structural.delta, StepFunction.constant(np.zeros(3)))
    forward = float(curve.forward_rate(3.0))
    expected = curve.discount(7.0) / curve.discount(3.0)
    assert dual.bond_price(3.0, 7.0, forward) == pytest.approx(float(expected), rel=1e-12)
    assert dual.bond_price(3.0, 3.0, 0.05) == pytest.approx(1.0)
    prices = dual.bond_price(3.0, np.array([4.0, 5.0]), np.array([0.01, 0.02, 0.03]))
    assert prices.shape == (3, 2)


def test_dual_rejects_scalar_loading() -> None:
    """Test vector loadings only."""
    with pytest.raises(ModelError):
        HullWhiteDual(0.05, NominalCurve.flat(0.02), StepFunction.constant(0.01))


def test_sigma_integral_is_exact_across_steps() -> None:
    """Test the damped variance integral on a loading that steps inside the interval."""
    loading = StepFunction(np.array([0.0, 1.0]), np.array([[0.01, 0.0], [0.0, 0.02]]))
    dual = HullWhiteDual(0.05, NominalCurve.flat(0.02), loading, damped=True)
    assert dual.sigma_integral(0.5, 1.75) == pytest.approx(0.5 * 1e-4 + 0.75 * 4e-4, rel=1e-12)
    assert dual.short_rate_variance(0.5, 1.75) == pytest.approx(np.exp(-0.175) * 3.5e-4, rel=1e-12)
    assert dual.sigma_integral(1.75, 0.5) == 0.0

def test_short_rate_law_without_volatility(structural: StructuralParams) -> None:
    """Test the deterministic Ornstein-Uhlenbeck solution."""
    funcs = make_funcs(structural, b_I=ZERO, b_X=ZERO, a_I=0.002, a_X=-0.004)
    law = integrate_short_rate(1.0, 3.0, 0.01, funcs, structural)
    assert law.variance == 0.0

    def theta(u: np.ndarray) -> np.ndarray:
        return hw_theta(u, funcs, structural) * np.exp(-structural.delta * (3.0 - u))

    expected = 0.01 * np.exp(-2.0 * structural.delta) + float(integrate(theta, 1.0, 3.0, 1e-4))
    assert law.mean == pytest.approx(expected, rel=1e-6)
    with pytest.raises(ModelError):
        integrate_short_rate(3.0, 1.0, 0.01, funcs, structural)


def test_model_discount_bond_without_volatility(structural: StructuralParams) -> None:
    """Test ∫n against the deterministic short-rate path."""
    funcs = make_funcs(structural, b_I=ZERO, b_X=ZERO, a_I=0.002, a_X=-0.004, m_I0=0.015, m_X0=-0.012)

    def rate(u: np.ndarray) -> np.ndarray:
        return short_rate_from_drifts(u, 0.015 + 0.002 * u, -0.012 - 0.004 * u, structural)

    integral = float(integrate(rate, 0.0, 5.0, 1e-4))
    law = model_log_discount_law(5.0, structural, funcs)
    assert law.variance == 0.0
    assert law.mean == pytest.approx(integral, rel=1e-6)
    assert model_discount_bond(5.0, structural, funcs) == pytest.approx(np.exp(-integral), rel=1e-6)


def test_model_discount_bond_convexity(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test that volatility lifts the bond price by exp(variance / 2)."""
    law = model_log_discount_law(10.0, structural, funcs)
    assert law.variance > 0.0
    assert model_discount_bond(10.0, structural, funcs) == pytest.approx(np.exp(-law.mean + 0.5 * law.variance))
