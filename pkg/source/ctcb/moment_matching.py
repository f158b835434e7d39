"""Side-by-side one-period statistics of the toy economy and the continuous-time model.

Both models are compared on the first-year inflation rate p (log I(h)/I(0) / h in
continuous time) and the short-rate change from today's rate.
"""

import logging as log
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Self

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .config import Measure
from .dsge import (
    DsgeParams,
    ExpectationPath,
    ShockSpec,
    inflation_moments,
    rate_inflation_corr,
    rate_inflation_cov,
    short_rate_moments,
    simulate_dsge,
)
from .domain import ModelFunctions, StructuralParams
from .errors import ModelError
from .model import short_rate_from_drifts, short_rate_vol, zeta
from .monte_carlo import LOG_INDEX, M_I, M_X, SimConfig, simulate, step_law
from .support.documents import ContinuousExampleDocument, DsgeExampleDocument

STATISTICS = ("mean_rate_change", "mean_inflation", "stdev_rate_change", "stdev_inflation", "corr_rate_inflation")
DEFAULT_MATCH_PATHS = 5000


@dataclass(frozen=True)
class ExampleMoments:
    """The compared statistics."""

    mean_rate_change: float
    mean_inflation: float
    stdev_rate_change: float
    stdev_inflation: float
    corr_rate_inflation: float

    @classmethod
    def from_samples(cls: type[Self], rate_change: np.ndarray, inflation: np.ndarray) -> Self:
        """Sample statistics; the correlation is zero when either sample is constant."""
        sd_n, sd_p = float(np.std(rate_change, ddof=1)), float(np.std(inflation, ddof=1))
        corr = float(np.corrcoef(rate_change, inflation)[0, 1]) if sd_n > 0 and sd_p > 0 else 0.0
        return cls(float(np.mean(rate_change)), float(np.mean(inflation)), sd_n, sd_p, corr)


@dataclass(frozen=True, eq=False)
class DsgeExample:
    """Toy economy over one period with a known current short rate."""

    params: DsgeParams
    shocks: ShockSpec
    expectations: ExpectationPath
    current_rate: float
    targets: dict[str, float] = field(default_factory=dict)
    reported: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ContinuousExampleParams:
    """Continuous-time model over one step of length ``horizon``."""

    funcs: ModelFunctions
    structural: StructuralParams
    horizon: float = 1.0
    reported: dict[str, float] = field(default_factory=dict)


def load_dsge_example(path: str | Path) -> DsgeExample:
    """Read a toy-economy example file."""
    try:
        doc = DsgeExampleDocument.model_validate_json(Path(path).read_text())
    except ValidationError as e:
        log.error("Invalid DSGE example %s: %s", path, e)
        raise ModelError(f"Invalid DSGE example: {e}") from e
    params = DsgeParams(**doc.params.model_dump(exclude={"tau"}), tau=tuple(doc.params.tau))
    lam = None if doc.lam is None else np.asarray(doc.lam)
    return DsgeExample(
        params=params,
        shocks=ShockSpec.gaussian(doc.var_u, doc.var_v, doc.var_z, lam=lam),
        expectations=ExpectationPath.constant(doc.x_next, doc.p_next),
        current_rate=doc.current_rate,
        targets=doc.targets,
        reported=doc.reported,
    )


def load_continuous_example(path: str | Path) -> ContinuousExampleParams:
    """Read a continuous-time example file."""
    try:
        doc = ContinuousExampleDocument.model_validate_json(Path(path).read_text())
        structural = doc.structural.to_domain()
        funcs = doc.functions.to_domain(structural)
    except ValidationError as e:
        log.error("Invalid continuous example %s: %s", path, e)
        raise ModelError(f"Invalid continuous example: {e}") from e
    return ContinuousExampleParams(funcs, structural, doc.horizon, doc.reported)


def dsge_moments(example: DsgeExample) -> ExampleMoments:
    """Closed-form statistics of p_0 and n_1 - current rate."""
    p = inflation_moments(example.params, example.shocks, example.expectations, 0)
    n = short_rate_moments(example.params, example.shocks, example.expectations, 0)
    corr = float(rate_inflation_corr(example.params, example.shocks, 0))
    return ExampleMoments(n.mean - example.current_rate, p.mean, n.stdev, p.stdev, corr)


def _rate_row(structural: StructuralParams, horizon: float) -> np.ndarray:
    """Loadings of n(h) on the simulated state."""
    row = np.zeros(5)
    z = float(zeta(horizon, structural))
    row[M_I], row[M_X] = -structural.h_p / z, -structural.h_x / z
    return row


def continuous_moments(example: ContinuousExampleParams) -> ExampleMoments:
    """Exact one-step statistics under the real-world measure."""
    funcs, structural, h = example.funcs, example.structural, example.horizon
    law = step_law(0.0, h, funcs, structural, Measure.P)
    x0 = np.array([funcs.m_I0, 0.0, funcs.m_X0, 0.0, 0.0])
    mean = law.transition @ x0 + law.mean
    rate = _rate_row(structural, h)
    n0 = float(short_rate_from_drifts(0.0, funcs.m_I0, funcs.m_X0, structural))
    var_n = float(rate @ law.cov @ rate)
    var_p = float(law.cov[LOG_INDEX, LOG_INDEX]) / h**2
    cov = float(rate @ law.cov[:, LOG_INDEX]) / h
    corr = cov / np.sqrt(var_n * var_p) if var_n > 0 and var_p > 0 else 0.0
    return ExampleMoments(
        float(rate @ mean) - n0, float(mean[LOG_INDEX]) / h, np.sqrt(var_n), np.sqrt(var_p), float(corr)
    )


def simulate_continuous(example: ContinuousExampleParams, n_paths: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Simulated (rate change, inflation rate) over one exact step."""
    h = example.horizon
    config = SimConfig(n_paths=n_paths, grid=[0.0, h], seed=seed, measure=Measure.P)
    paths = simulate(example.funcs, example.structural, config)
    return paths.short_rate(h) - paths.short_rate(0.0), paths.value("log_index", h) / h


def matching_residuals(dsge: DsgeExample, continuous: ContinuousExampleParams) -> dict[str, float]:
    """Toy-economy minus continuous-time instantaneous variance and covariance per unit time.

    The continuous side uses the volatilities at time 0: the inflation loading h·b_I + s_I and the
    short-rate volatility σ_n(0).
    """
    h = continuous.horizon
    funcs, structural = continuous.funcs, continuous.structural
    inflation_vol = h * funcs.b_I(0.0) + funcs.s_I(0.0)
    rate_vol = short_rate_vol(0.0, structural, funcs)
    p = inflation_moments(dsge.params, dsge.shocks, dsge.expectations, 0)
    n = short_rate_moments(dsge.params, dsge.shocks, dsge.expectations, 0)
    return {
        "inflation_variance": p.var / h - float(inflation_vol @ inflation_vol),
        "rate_variance": n.var / h - float(rate_vol @ rate_vol),
        "covariance": rate_inflation_cov(dsge.params, dsge.shocks, 0) / h - float(inflation_vol @ rate_vol),
    }


def compare(
    dsge: DsgeExample, continuous: ContinuousExampleParams, n_paths: int = DEFAULT_MATCH_PATHS, seed: int = 0
) -> pd.DataFrame:
    """Table of targets, analytic and simulated statistics of both models, and any reported figures."""
    sample = simulate_dsge(dsge.params, dsge.shocks, dsge.expectations, n_paths, seed, periods=1)
    columns = {
        "target": {name: dsge.targets.get(name, np.nan) for name in STATISTICS},
        "dsge_analytic": asdict(dsge_moments(dsge)),
        "dsge_simulated": asdict(ExampleMoments.from_samples(sample.n_next[:, 0] - dsge.current_rate, sample.p[:, 0])),
        "continuous_analytic": asdict(continuous_moments(continuous)),
        "continuous_simulated": asdict(ExampleMoments.from_samples(*simulate_continuous(continuous, n_paths, seed))),
        "dsge_reported": {name: dsge.reported.get(name, np.nan) for name in STATISTICS},
        "continuous_reported": {name: continuous.reported.get(name, np.nan) for name in STATISTICS},
    }
    table = pd.DataFrame(columns).reindex(list(STATISTICS))
    table.index.name = "statistic"
    log.info("Moment matching over %s paths:\n%s", n_paths, table)
    return table
