"""Monte Carlo module unit tests."""
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from ctcb.config import ENV_VAR_CTCB_THREADS, Measure, OptionKind, SwaptionKind
from ctcb.domain import ModelFunctions, StructuralParams
from ctcb.errors import EmptySelectionError, ModelError
from ctcb.inflation_pricing import JumpSpec, merton_zc_option, zc_log_moments, zc_option
from ctcb.ir_pricing import SwapSchedule, swaption, zbo
from ctcb.market_data import MarketSnapshot
from ctcb.model import HullWhiteDual, model_log_discount_law
from ctcb.monte_carlo import (
    LOG_BANK,
    LOG_INDEX,
    STATE,
    SimConfig,
    SimPaths,
    conditional_scenario,
    dump_paths,
    forward_libor_paths,
    parse_condition,
    price_mc,
    sample_merton_log_index,
    simulate,
    step_law,
    swaption_mc,
    zbo_mc,
)
from pydantic import ValidationError

from tests.utilities import within_se


@pytest.fixture(scope="module")
def q_paths(funcs: ModelFunctions, structural: StructuralParams) -> SimPaths:
    """Risk-neutral paths on an annual grid to ten years."""
    return simulate(funcs, structural, SimConfig(n_paths=20_000, horizon=10.0, seed=17))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_paths": 1},
        {"grid": [1.0, 0.5]},
        {"grid": [-1.0, 1.0]},
        {"measure": "forward"},
        {"measure": "forward", "forward_maturity": 5.0, "horizon": 6.0},
        {"antithetic": True, "n_paths": 101},
        {"extra": 1},
    ],
)
def test_sim_config_validation(kwargs: dict) -> None:
    """Test invalid simulation settings."""
    with pytest.raises(ValidationError):
        SimConfig(**kwargs)


def test_sim_config_times(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test grids and worker counts."""
    np.testing.assert_allclose(SimConfig(horizon=2.5, steps_per_year=2).times(), [0.0, 0.5, 1.0, 1.5, 2.0, 2.5])
    np.testing.assert_allclose(SimConfig(horizon=1.5).times(), [0.0, 1.0, 1.5])
    np.testing.assert_allclose(SimConfig(grid=[1.0, 3.0]).times(), [0.0, 1.0, 3.0])
    monkeypatch.setenv(ENV_VAR_CTCB_THREADS, "3")
    assert SimConfig().worker_count() == 3
    assert SimConfig(threads=2).worker_count() == 2


def test_step_law_index_variance(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test one step of the index has the zero-coupon variance."""
    law = step_law(0.0, 5.0, funcs, structural, Measure.Q)
    assert law.cov[LOG_INDEX, LOG_INDEX] == pytest.approx(zc_log_moments(0.0, 5.0, funcs, structural).V ** 2, rel=1e-12)
    np.testing.assert_allclose(law.root @ law.root.T, law.cov, atol=1e-15)
    with pytest.raises(ModelError):
        step_law(2.0, 2.0, funcs, structural)


def test_step_law_forward_index_mean(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test the forward-measure index mean matches the zero-coupon pricing law."""
    law = step_law(0.0, 5.0, funcs, structural, Measure.FORWARD, forward_maturity=5.0)
    x0 = np.array([funcs.m_I0, 0.0, funcs.m_X0, 0.0, 0.0])
    mean = law.transition @ x0 + law.mean
    assert mean[LOG_INDEX] == pytest.approx(zc_log_moments(0.0, 5.0, funcs, structural).M, rel=1e-12)


def test_step_law_bank_account(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test the integrated short rate against its closed-form law."""
    law = step_law(0.0, 7.0, funcs, structural, Measure.Q)
    x0 = np.array([funcs.m_I0, 0.0, funcs.m_X0, 0.0, 0.0])
    expected = model_log_discount_law(7.0, structural, funcs)
    assert (law.transition @ x0 + law.mean)[LOG_BANK] == pytest.approx(expected.mean, rel=1e-10)
    assert law.cov[LOG_BANK, LOG_BANK] == pytest.approx(expected.variance, rel=1e-10)


def test_simulate_is_reproducible(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test the seed fixes the paths whatever the thread count."""
    config = SimConfig(n_paths=1000, horizon=3.0, seed=4, block_size=128)
    one = simulate(funcs, structural, config)
    many = simulate(funcs, structural, config.model_copy(update={"threads": 3}))
    np.testing.assert_array_equal(one.state, many.state)
    other = simulate(funcs, structural, config.model_copy(update={"seed": 5}))
    assert not np.array_equal(one.state, other.state)
    assert one.state.shape == (1000, 4, len(STATE))


def test_antithetic_pairs_average_to_the_mean_path(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test antithetic pairs mirror each other around the conditional mean."""
    paths = simulate(funcs, structural, SimConfig(n_paths=10, horizon=2.0, antithetic=True))
    pair_mean = 0.5 * (paths.state[0::2] + paths.state[1::2])
    np.testing.assert_allclose(pair_mean, np.broadcast_to(pair_mean[0], pair_mean.shape), atol=1e-14)


def test_sim_paths_accessors(q_paths: SimPaths) -> None:
    """Test derived path quantities."""
    np.testing.assert_allclose(q_paths.index_ratio(0.0), 1.0)
    np.testing.assert_allclose(q_paths.bank_discount(0.0), 1.0)
    np.testing.assert_allclose(q_paths.inflation_rate(4.0), np.expm1(q_paths.value("log_index", 4.0) / 4.0))
    with pytest.raises(ModelError):
        q_paths.value("m_I", 2.5)


def test_bank_account_prices_model_bond(q_paths: SimPaths, funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test the discounted unit payoff against the model's own zero bond."""
    law = model_log_discount_law(10.0, structural, funcs)
    result = price_mc(lambda p: np.ones(p.n_paths), 10.0, q_paths)
    assert within_se(np.exp(-law.mean + 0.5 * law.variance), result.pv, result.standard_error, k=4)


@pytest.mark.slow
@pytest.mark.parametrize(("T", "K", "kind"), [(5.0, 0.01, OptionKind.CALL), (5.0, 0.0, OptionKind.PUT)])
def test_forward_measure_prices_zc_option(
    snapshot: MarketSnapshot, funcs: ModelFunctions, structural: StructuralParams, T: float, K: float, kind: OptionKind
) -> None:
    """Test a zero-coupon option simulated under its forward measure."""
    config = SimConfig(n_paths=40_000, horizon=T, measure=Measure.FORWARD, forward_maturity=T, seed=21)
    paths = simulate(funcs, structural, config)
    strike = (1.0 + K) ** T
    result = price_mc(
        lambda p: np.maximum(kind.omega * (p.index_ratio(T) - strike), 0.0), T, paths, curve=snapshot.nominal
    )
    expected = zc_option(0.0, T, K, kind, funcs, structural, snapshot.nominal).discounted
    assert within_se(expected, result.pv, result.standard_error, k=4)


def test_price_mc_errors(
    q_paths: SimPaths, funcs: ModelFunctions, structural: StructuralParams, snapshot: MarketSnapshot
) -> None:
    """Test measure and payoff checks."""
    with pytest.raises(ModelError):
        price_mc(lambda p: np.full(p.n_paths, np.nan), 1.0, q_paths)
    p_paths = simulate(funcs, structural, SimConfig(n_paths=10, horizon=1.0, measure=Measure.P))
    with pytest.raises(ModelError):
        price_mc(lambda p: np.ones(p.n_paths), 1.0, p_paths)
    config = SimConfig(n_paths=10, horizon=2.0, measure=Measure.FORWARD, forward_maturity=2.0)
    forward = simulate(funcs, structural, config)
    with pytest.raises(ModelError):
        price_mc(lambda p: np.ones(p.n_paths), 1.0, forward, curve=snapshot.nominal)
    with pytest.raises(ModelError):
        price_mc(lambda p: np.ones(p.n_paths), 2.0, forward)


def test_antithetic_standard_error(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test pair averaging counts pairs as samples."""
    paths = simulate(funcs, structural, SimConfig(n_paths=2000, horizon=3.0, antithetic=True))
    result = price_mc(lambda p: p.value("log_index", 3.0), 3.0, paths)
    assert result.n_paths == 2000
    assert result.standard_error > 0.0


@pytest.mark.parametrize(
    ("text", "observed", "expected"),
    [
        ("inflation@10<0", -0.001, True),
        ("inflation @ 10 < 0", 0.001, False),
        ("growth@2>=1%", 0.0101, True),
        ("growth@2>=1%", 0.0099, False),
    ],
)
def test_parse_condition(q_paths: SimPaths, text: str, observed: float, expected: bool) -> None:
    """Test condition parsing on a single crafted path."""
    quantity = text.split("@")[0].strip()
    horizon = float(text.split("@")[1].split("<")[0].split(">")[0])
    state = np.zeros((1, q_paths.times.size, len(STATE)))
    column = q_paths.column(horizon)
    variable = LOG_INDEX if quantity == "inflation" else STATE.index("log_growth")
    state[0, column, variable] = np.log1p(observed) * horizon
    crafted = SimPaths(q_paths.times, state, q_paths.structural, q_paths.measure)
    assert bool(parse_condition(text)(crafted)[0]) is expected


def test_parse_condition_rate(q_paths: SimPaths) -> None:
    """Test the short-rate condition selects the matching paths."""
    mask = parse_condition("rate@3>0.05")(q_paths)
    np.testing.assert_array_equal(mask, q_paths.short_rate(3.0) > 0.05)


@pytest.mark.parametrize("text", ["inflation10<0", "vol@5<1", "inflation@0<0", "inflation@5=0"])
def test_parse_condition_rejects(text: str) -> None:
    """Test malformed conditions."""
    with pytest.raises(ModelError):
        parse_condition(text)


def test_conditional_scenario(q_paths: SimPaths) -> None:
    """Test conditional statistics and the hedge ratio."""
    inflation = q_paths.inflation_rate(5.0)
    threshold = float(np.median(inflation))
    target = np.maximum(threshold - inflation, 0.0)
    hedge = 2.0 * target
    report = conditional_scenario(
        q_paths, lambda p: p.inflation_rate(5.0) < threshold, {"inflation": inflation}, target=target, hedge=hedge
    )
    assert report.selected == int(np.sum(inflation < threshold))
    assert report.total == q_paths.n_paths
    row = report.statistics.set_index("quantity").loc["inflation"]
    assert row["conditional_mean"] < row["unconditional_mean"]
    assert {"q05", "q50", "q95"} <= set(report.statistics.columns)
    assert report.hedge_ratio == pytest.approx(0.5)
    assert not report.warnings


def test_conditional_scenario_thin_and_empty(q_paths: SimPaths) -> None:
    """Test the warning on thin selections and the error on empty ones."""
    inflation = q_paths.inflation_rate(5.0)
    cutoff = float(np.sort(inflation)[10])
    report = conditional_scenario(q_paths, lambda p: p.inflation_rate(5.0) < cutoff, {"inflation": inflation})
    assert report.selected == 10
    assert report.warnings
    with pytest.raises(EmptySelectionError):
        conditional_scenario(q_paths, "inflation@5<-100%", {"inflation": inflation})


def test_forward_libor_paths(
    q_paths: SimPaths, snapshot: MarketSnapshot, funcs: ModelFunctions, structural: StructuralParams
) -> None:
    """Test Libor fixings invert the reconstructed bond."""
    dual = HullWhiteDual.from_model(snapshot.nominal, structural, funcs)
    libor = forward_libor_paths(q_paths, dual, 3.0, tau=0.5)
    bond = dual.bond_price(3.0, 3.5, q_paths.short_rate(3.0))
    np.testing.assert_allclose((1.0 + 0.5 * libor) * bond, 1.0)


def test_dump_paths(tmp_path: Path, funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test the long path table."""
    paths = simulate(funcs, structural, SimConfig(n_paths=5, horizon=2.0))
    target = tmp_path / "paths.csv"
    dump_paths(paths, target)
    frame = pd.read_csv(target)
    assert list(frame.columns) == ["path", "time", "I", "X", "n", "m_I", "m_X"]
    assert len(frame) == 15
    np.testing.assert_allclose(frame.loc[frame["time"] == 0.0, "I"], 1.0)


@pytest.mark.slow
@pytest.mark.parametrize(
    ("T1", "T2", "K", "kind"), [(2.0, 5.0, 0.9, OptionKind.CALL), (4.0, 5.0, 0.97, OptionKind.PUT)]
)
def test_zbo_mc(
    snapshot: MarketSnapshot,
    funcs: ModelFunctions,
    structural: StructuralParams,
    T1: float,
    T2: float,
    K: float,
    kind: OptionKind,
) -> None:
    """Test sampled zero-bond options against the closed form."""
    dual = HullWhiteDual.from_model(snapshot.nominal, structural, funcs)
    estimate = zbo_mc(kind, T1, T2, K, snapshot.nominal, dual, n_paths=50_000, seed=2)
    assert within_se(zbo(kind, 0.0, T1, T2, K, snapshot.nominal, dual), estimate.value, estimate.stderr)


@pytest.mark.slow
@pytest.mark.parametrize("kind", [SwaptionKind.PAYER, SwaptionKind.RECEIVER])
def test_swaption_mc(
    snapshot: MarketSnapshot, funcs: ModelFunctions, structural: StructuralParams, kind: SwaptionKind
) -> None:
    """Test the Jamshidian swaption against sampling."""
    dual = HullWhiteDual.from_model(snapshot.nominal, structural, funcs)
    schedule = SwapSchedule.regular(2.0, 5.0, 0.015)
    estimate = swaption_mc(kind, schedule, snapshot.nominal, dual, n_paths=50_000, seed=8)
    assert within_se(swaption(kind, schedule, snapshot.nominal, dual), estimate.value, estimate.stderr)


@pytest.mark.slow
def test_sample_merton_log_index(funcs: ModelFunctions, structural: StructuralParams) -> None:
    """Test compensated jump sampling against the mixture price."""
    jumps = JumpSpec(intensity=0.5, mu_J=-0.03, delta_J=0.02)
    law = zc_log_moments(0.0, 5.0, funcs, structural)
    draws = np.exp(sample_merton_log_index(law, jumps, 5.0, n_paths=200_000, seed=6))
    assert within_se(law.expectation, draws.mean(), draws.std() / np.sqrt(draws.size), k=4)
    payoff = np.maximum(draws - 1.05, 0.0)
    expected = merton_zc_option(0.0, 5.0, 1.05**0.2 - 1.0, OptionKind.CALL, funcs, structural, jumps)
    assert within_se(expected, payoff.mean(), payoff.std() / np.sqrt(payoff.size), k=4)
