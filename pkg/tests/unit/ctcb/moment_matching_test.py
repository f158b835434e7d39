"""Moment matching module unit tests."""
from pathlib import Path
from typing import Callable

import numpy as np
import pytest
from ctcb.errors import ModelError
from ctcb.moment_matching import (
    STATISTICS,
    ContinuousExampleParams,
    DsgeExample,
    ExampleMoments,
    compare,
    continuous_moments,
    dsge_moments,
    load_continuous_example,
    load_dsge_example,
    matching_residuals,
    simulate_continuous,
)

from tests.utilities import CONTINUOUS_EXAMPLE_FILE, DSGE_EXAMPLE_FILE, within_se


@pytest.fixture(scope="module")
def dsge() -> DsgeExample:
    """Bundled toy-economy example."""
    return load_dsge_example(DSGE_EXAMPLE_FILE)


@pytest.fixture(scope="module")
def continuous() -> ContinuousExampleParams:
    """Bundled continuous-time example."""
    return load_continuous_example(CONTINUOUS_EXAMPLE_FILE)


def test_load_examples(dsge: DsgeExample, continuous: ContinuousExampleParams) -> None:
    """Test the bundled example files."""
    assert dsge.params.delta_pi == 3.0
    assert dsge.current_rate == 0.021
    assert set(dsge.targets) == set(STATISTICS)
    assert continuous.horizon == 1.0
    assert continuous.structural.h_x == 3.0
    assert continuous.funcs.m_I0 == 0.045
    assert continuous.reported["corr_rate_inflation"] == pytest.approx(0.6907)


@pytest.mark.parametrize("loader", [load_dsge_example, load_continuous_example])
def test_load_invalid_example(tmp_path: Path, loader: Callable[[Path], object]) -> None:
    """Test malformed example files."""
    bad = tmp_path / "bad.json"
    bad.write_text('{"params": {}}')
    with pytest.raises(ModelError):
        loader(bad)


def test_example_moments_from_samples() -> None:
    """Test sample statistics and the constant-sample correlation."""
    rng = np.random.default_rng(0)
    a = rng.standard_normal(1000)
    moments = ExampleMoments.from_samples(a, 2.0 * a + 1.0)
    assert moments.corr_rate_inflation == pytest.approx(1.0)
    assert moments.stdev_inflation == pytest.approx(2.0 * moments.stdev_rate_change)
    assert ExampleMoments.from_samples(a, np.ones(1000)).corr_rate_inflation == 0.0


def test_dsge_moments_match_reported_levels(dsge: DsgeExample) -> None:
    """Test the toy economy's means and deviations are within a tenth of a percent of the reported ones."""
    moments = dsge_moments(dsge)
    for name in ("mean_rate_change", "mean_inflation", "stdev_rate_change", "stdev_inflation"):
        assert getattr(moments, name) == pytest.approx(dsge.reported[name], abs=1e-3)
    assert moments.mean_inflation == pytest.approx(0.03, abs=1e-12)
    assert 0.0 < moments.corr_rate_inflation < 1.0


def test_continuous_moments_match_simulation(continuous: ContinuousExampleParams) -> None:
    """Test exact one-step statistics against simulated ones."""
    analytic = continuous_moments(continuous)
    rate_change, inflation = simulate_continuous(continuous, n_paths=20_000, seed=1)
    simulated = ExampleMoments.from_samples(rate_change, inflation)
    root_n = np.sqrt(20_000)
    assert within_se(analytic.mean_inflation, simulated.mean_inflation, analytic.stdev_inflation / root_n, k=4)
    assert within_se(analytic.mean_rate_change, simulated.mean_rate_change, analytic.stdev_rate_change / root_n, k=4)
    assert simulated.stdev_inflation == pytest.approx(analytic.stdev_inflation, rel=0.05)
    assert simulated.stdev_rate_change == pytest.approx(analytic.stdev_rate_change, rel=0.05)
    assert simulated.corr_rate_inflation == pytest.approx(analytic.corr_rate_inflation, abs=0.05)


def test_compare(dsge: DsgeExample, continuous: ContinuousExampleParams) -> None:
    """Test the side-by-side table."""
    table = compare(dsge, continuous, n_paths=5000, seed=3)
    assert list(table.index) == list(STATISTICS)
    assert list(table.columns) == [
        "target",
        "dsge_analytic",
        "dsge_simulated",
        "continuous_analytic",
        "continuous_simulated",
        "dsge_reported",
        "continuous_reported",
    ]
    assert table.loc["corr_rate_inflation", "dsge_reported"] == pytest.approx(0.6416)
    mean_inflation = table.loc["mean_inflation"]
    assert mean_inflation["dsge_simulated"] == pytest.approx(mean_inflation["dsge_analytic"], abs=1e-3)
    assert table.loc["corr_rate_inflation", "dsge_simulated"] == pytest.approx(
        table.loc["corr_rate_inflation", "dsge_analytic"], abs=0.06
    )


def test_matching_residuals(dsge: DsgeExample, continuous: ContinuousExampleParams) -> None:
    """Test the instantaneous variance and covariance gaps."""
    residuals = matching_residuals(dsge, continuous)
    assert set(residuals) == {"inflation_variance", "rate_variance", "covariance"}
    assert all(np.isfinite(v) for v in residuals.values())
    moments = dsge_moments(dsge)
    funcs = continuous.funcs
    inflation_vol = funcs.b_I(0.0) + funcs.s_I(0.0)
    expected = moments.stdev_inflation**2 - float(inflation_vol @ inflation_vol)
    assert residuals["inflation_variance"] == pytest.approx(expected)
