"""Market observables: nominal and breakeven curves, ATM option quotes and their preparation."""

import logging as log
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import Optional, Self

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .config import OutputFormat
from .constants import BASIS_POINT, DERIVATIVE_STEP
from .domain import ArrayLike
from .errors import MarketDataError
from .support.documents import SnapshotDocument, SnapshotRowDocument

COL_MATURITY = "maturity_years"
COL_NOMINAL = "nominal_ir"
COL_BREAKEVEN = "zc_breakeven"
COL_CAPLET = "atm_caplet_pv"
COL_CAP = "atm_cap_pv"
COL_ZC_OPTION = "atm_zc_infl_option_pv"
COL_AS_OF = "as_of"

_COLUMN_ALIASES = {"maturity": COL_MATURITY, "atm_zc_option_pv": COL_ZC_OPTION}


def _check_maturities(maturities: np.ndarray, what: str) -> None:
    if maturities.size == 0:
        raise MarketDataError(f"{what}: no pillars")
    if np.any(maturities <= 0):
        raise MarketDataError(f"{what}: maturities must be > 0")
    if np.any(np.diff(maturities) <= 0):
        raise MarketDataError(f"{what}: maturities must be strictly increasing, got {maturities.tolist()}")


@dataclass(frozen=True, eq=False)
class NominalCurve:
    """Zero rates, continuously compounded, linearly interpolated and flat beyond the pillars."""

    maturities: np.ndarray
    zero_rates: np.ndarray

    def __post_init__(self: Self) -> None:
        """Validate pillars."""
        object.__setattr__(self, "maturities", np.asarray(self.maturities, dtype=float))
        object.__setattr__(self, "zero_rates", np.asarray(self.zero_rates, dtype=float))
        _check_maturities(self.maturities, "nominal curve")
        if self.zero_rates.shape != self.maturities.shape or not np.all(np.isfinite(self.zero_rates)):
            raise MarketDataError("nominal curve: one finite zero rate per pillar required")

    @classmethod
    def flat(cls: type[Self], rate: float, horizon: float = 30.0) -> Self:
        """A flat curve."""
        return cls(np.array([1.0, horizon]), np.array([rate, rate]))

    def zero_rate(self: Self, T: ArrayLike) -> np.ndarray:
        """Interpolated zero rate."""
        return np.interp(T, self.maturities, self.zero_rates)

    def log_discount(self: Self, T: ArrayLike) -> np.ndarray:
        """log P(0,T)."""
        return -self.zero_rate(T) * np.asarray(T, dtype=float)

    def discount(self: Self, T: ArrayLike) -> np.ndarray:
        """P(0,T)."""
        return np.exp(self.log_discount(T))

    def forward_rate(self: Self, T: ArrayLike, h: float = DERIVATIVE_STEP) -> np.ndarray:
        """Instantaneous forward f(0,T) by central differences, one-sided near the origin."""
        T = np.asarray(T, dtype=float)
        lo = np.maximum(T - h, 0.0)
        hi = lo + 2.0 * h
        return -(self.log_discount(hi) - self.log_discount(lo)) / (hi - lo)

    def short_rate(self: Self) -> float:
        """n(0): the rate at the short end of the curve."""
        return float(self.zero_rates[0])

    def shifted(self: Self, shift: float) -> Self:
        """Parallel shift in decimals."""
        return replace(self, zero_rates=self.zero_rates + shift)


@dataclass(frozen=True, eq=False)
class InflationCurve:
    """Zero-coupon breakevens K(0,T), linearly interpolated and flat beyond the pillars."""

    maturities: np.ndarray
    breakevens: np.ndarray

    def __post_init__(self: Self) -> None:
        """Validate pillars."""
        object.__setattr__(self, "maturities", np.asarray(self.maturities, dtype=float))
        object.__setattr__(self, "breakevens", np.asarray(self.breakevens, dtype=float))
        _check_maturities(self.maturities, "inflation curve")
        if self.breakevens.shape != self.maturities.shape or not np.all(np.isfinite(self.breakevens)):
            raise MarketDataError("inflation curve: one finite breakeven per pillar required")

    def breakeven(self: Self, T: ArrayLike) -> np.ndarray:
        """Interpolated breakeven."""
        return np.interp(T, self.maturities, self.breakevens)

    def index_ratio(self: Self, T: ArrayLike) -> np.ndarray:
        """Expected index growth (1+K(0,T))^T."""
        return (1.0 + self.breakeven(T)) ** np.asarray(T, dtype=float)

    def shifted(self: Self, shift: float) -> Self:
        """Parallel shift in decimals."""
        return replace(self, breakevens=self.breakevens + shift)


@dataclass(frozen=True, eq=False)
class OptionQuotes:
    """ATM option PVs per maturity.

    An ATM caplet of maturity T fixes at T and pays at T+1; an ATM zero-coupon
    inflation option of maturity T is a call struck at the breakeven K(0,T).
    """

    caplet_maturities: np.ndarray
    caplet_pv: np.ndarray
    zc_option_maturities: np.ndarray
    zc_option_pv: np.ndarray

    def __post_init__(self: Self) -> None:
        """Validate quotes."""
        for mat_name, pv_name in (("caplet_maturities", "caplet_pv"), ("zc_option_maturities", "zc_option_pv")):
            mats = np.asarray(getattr(self, mat_name), dtype=float)
            pvs = np.asarray(getattr(self, pv_name), dtype=float)
            _check_maturities(mats, pv_name)
            if pvs.shape != mats.shape or not np.all(np.isfinite(pvs)):
                raise MarketDataError(f"{pv_name}: one finite PV per maturity required")
            if np.any(pvs < 0):
                raise MarketDataError(f"{pv_name}: PVs must be >= 0")
            object.__setattr__(self, mat_name, mats)
            object.__setattr__(self, pv_name, pvs)


@dataclass(frozen=True, eq=False)
class OptionGrid:
    """Zero-coupon inflation option PVs on a maturity x strike grid."""

    maturities: np.ndarray
    strikes: np.ndarray
    pv: np.ndarray

    def __post_init__(self: Self) -> None:
        """Validate the grid shape."""
        object.__setattr__(self, "maturities", np.asarray(self.maturities, dtype=float))
        object.__setattr__(self, "strikes", np.asarray(self.strikes, dtype=float))
        object.__setattr__(self, "pv", np.atleast_2d(np.asarray(self.pv, dtype=float)))
        if self.strikes.size == 0 or self.maturities.size == 0:
            raise MarketDataError("Option grid is empty")
        if self.pv.shape != (self.maturities.size, self.strikes.size):
            raise MarketDataError(f"Option grid PV shape {self.pv.shape} does not match maturities x strikes")
        if np.any(np.diff(self.strikes) <= 0):
            raise MarketDataError("Option grid strikes must be strictly increasing")


@dataclass(frozen=True, eq=False)
class MarketSnapshot:
    """Market observables as of one date."""

    as_of: date
    nominal: NominalCurve
    inflation: InflationCurve
    quotes: OptionQuotes

    @property
    def maturities(self: Self) -> np.ndarray:
        """Nominal pillar maturities."""
        return self.nominal.maturities

    @property
    def horizon(self: Self) -> float:
        """Longest maturity across all observables."""
        return float(
            max(
                self.nominal.maturities[-1],
                self.inflation.maturities[-1],
                self.quotes.caplet_maturities[-1],
                self.quotes.zc_option_maturities[-1],
            )
        )

    def shifted(self: Self, nominal: float = 0.0, breakeven: float = 0.0) -> Self:
        """Parallel shifts of the nominal and breakeven curves, in decimals."""
        return replace(self, nominal=self.nominal.shifted(nominal), inflation=self.inflation.shifted(breakeven))

    def real_discount(self: Self, T: ArrayLike) -> np.ndarray:
        """P^R(0,T)=P(0,T)(1+K(0,T))^T: nominal bond plus the ZCIIS value per unit notional."""
        return self.nominal.discount(T) * self.inflation.index_ratio(T)

    def caplet_strike(self: Self, T: ArrayLike) -> np.ndarray:
        """ATM strike of the caplet fixing at T, the forward Libor over [T, T+1]."""
        T = np.asarray(T, dtype=float)
        return self.nominal.discount(T) / self.nominal.discount(T + 1.0) - 1.0


def _normalise_columns(frame: pd.DataFrame) -> pd.DataFrame:
    frame = frame.rename(columns=lambda c: str(c).strip().lower())
    return frame.rename(columns=_COLUMN_ALIASES)


def _snapshot_from_frame(frame: pd.DataFrame, as_of: Optional[date]) -> MarketSnapshot:
    frame = _normalise_columns(frame)
    cap_column = COL_CAPLET if COL_CAPLET in frame.columns else COL_CAP
    required = [COL_MATURITY, COL_NOMINAL, COL_BREAKEVEN, cap_column, COL_ZC_OPTION]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise MarketDataError(f"Snapshot is missing columns: {missing}")
    if frame.empty:
        raise MarketDataError("Snapshot has no rows")
    if COL_AS_OF in frame.columns and as_of is None:
        as_of = pd.Timestamp(frame[COL_AS_OF].iloc[0]).date()
    try:
        numeric = frame[required].astype(float)
    except (TypeError, ValueError) as e:
        log.error("Snapshot contains non-numeric values: %s", e)
        raise MarketDataError(f"Snapshot contains non-numeric values: {e}") from e

    maturities = numeric[COL_MATURITY].to_numpy()
    caplets = numeric[cap_column].to_numpy()
    if cap_column == COL_CAP:
        _check_maturities(maturities, "cap quotes")
        caplets = np.array([pv for _, pv in strip_atm_caplets(list(zip(maturities, caplets, strict=True)))])
    return MarketSnapshot(
        as_of=as_of or date.today(),
        nominal=NominalCurve(maturities, numeric[COL_NOMINAL].to_numpy()),
        inflation=InflationCurve(maturities, numeric[COL_BREAKEVEN].to_numpy()),
        quotes=OptionQuotes(maturities, caplets, maturities, numeric[COL_ZC_OPTION].to_numpy()),
    )


def _format_from_suffix(path: Path) -> OutputFormat:
    try:
        return OutputFormat(path.suffix.lstrip(".").lower())
    except ValueError as e:
        raise MarketDataError(f"Cannot infer snapshot format from suffix '{path.suffix}': use .csv or .json") from e


def load_snapshot(path: str | Path, format: Optional[OutputFormat] = None) -> MarketSnapshot:  # noqa: A002
    """Load a market snapshot from CSV or JSON.

    Args:
        path: File to read.
        format: csv or json; inferred from the suffix when omitted.

    Returns:
        The validated snapshot.

    Raises:
        MarketDataError: the file does not parse or violates an invariant.
        FileNotFoundError: the file does not exist.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Snapshot file not found: {path}")
    fmt = format or _format_from_suffix(path)
    log.info("Loading %s snapshot from %s", fmt.value, path)
    if fmt is OutputFormat.JSON:
        try:
            document = SnapshotDocument.model_validate_json(path.read_text())
        except ValidationError as e:
            log.error("Invalid snapshot JSON %s: %s", path, e)
            raise MarketDataError(f"Invalid snapshot JSON: {e}") from e
        frame = pd.DataFrame([row.model_dump(exclude_none=True) for row in document.rows])
        return _snapshot_from_frame(frame, document.as_of)
    try:
        frame = pd.read_csv(path, comment="#")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        log.error("Could not parse snapshot CSV %s: %s", path, e)
        raise MarketDataError(f"Could not parse snapshot CSV: {e}") from e
    return _snapshot_from_frame(frame, None)


def snapshot_frame(snapshot: MarketSnapshot) -> pd.DataFrame:
    """Tabular view on the nominal pillars; all observables must share the nominal maturities."""
    mats = snapshot.maturities
    quotes = snapshot.quotes
    for other in (snapshot.inflation.maturities, quotes.caplet_maturities, quotes.zc_option_maturities):
        if other.shape != mats.shape or np.any(other != mats):
            raise MarketDataError("Snapshot observables are on different grids; resample first")
    return pd.DataFrame(
        {
            COL_MATURITY: mats,
            COL_NOMINAL: snapshot.nominal.zero_rates,
            COL_BREAKEVEN: snapshot.inflation.breakevens,
            COL_CAPLET: snapshot.quotes.caplet_pv,
            COL_ZC_OPTION: snapshot.quotes.zc_option_pv,
        }
    )


def serialize_snapshot(
    snapshot: MarketSnapshot, path: str | Path, format: Optional[OutputFormat] = None  # noqa: A002
) -> None:
    """Write a snapshot in the format load_snapshot reads; floats are written at full precision."""
    path = Path(path)
    fmt = format or _format_from_suffix(path)
    frame = snapshot_frame(snapshot)
    if fmt is OutputFormat.JSON:
        document = SnapshotDocument(
            as_of=snapshot.as_of,
            rows=[SnapshotRowDocument(**record) for record in frame.to_dict(orient="records")],
        )
        path.write_text(document.model_dump_json(indent=2))
    else:
        frame.insert(0, COL_AS_OF, snapshot.as_of.isoformat())
        frame.to_csv(path, index=False)
    log.info("Snapshot written to %s", path)


def resample_annual(snapshot: MarketSnapshot, horizon: Optional[int] = None) -> MarketSnapshot:
    """Resample every observable onto pillars 1, 2, ..., horizon by linear interpolation.

    Beyond the last quoted pillar values are held flat.
    """
    horizon = int(np.ceil(snapshot.horizon - 1e-9)) if horizon is None else int(horizon)
    if horizon < 1:
        raise MarketDataError(f"Resampling horizon must be >= 1, got {horizon}")
    grid = np.arange(1, horizon + 1, dtype=float)
    quotes = snapshot.quotes
    return MarketSnapshot(
        as_of=snapshot.as_of,
        nominal=NominalCurve(grid, snapshot.nominal.zero_rate(grid)),
        inflation=InflationCurve(grid, snapshot.inflation.breakeven(grid)),
        quotes=OptionQuotes(
            grid,
            np.interp(grid, quotes.caplet_maturities, quotes.caplet_pv),
            grid,
            np.interp(grid, quotes.zc_option_maturities, quotes.zc_option_pv),
        ),
    )


def strip_atm_caplets(
    cap_pvs: list[tuple[float, float]], diagnostics: Optional[list[str]] = None
) -> list[tuple[tuple[float, float], float]]:
    """Recover single ATM caplet PVs as differences of cap PVs.

    Args:
        cap_pvs: (maturity, cap PV) pairs with increasing maturities.
        diagnostics: collects a message per floored caplet.

    Returns:
        ((T_{i-1}, T_i), caplet PV) per maturity; the first interval starts at 0.
    """
    out: list[tuple[tuple[float, float], float]] = []
    previous_t, previous_pv = 0.0, 0.0
    for maturity, pv in cap_pvs:
        caplet = pv - previous_pv
        if caplet < 0:
            message = f"Cap PV decreases at {maturity}y ({previous_pv} -> {pv}); caplet floored at 0"
            log.warning(message)
            if diagnostics is not None:
                diagnostics.append(message)
            caplet = 0.0
        out.append(((previous_t, float(maturity)), float(caplet)))
        previous_t, previous_pv = float(maturity), float(pv)
    return out


def interp_atm_strike(grid: OptionGrid, atm_strike: ArrayLike) -> np.ndarray:
    """PV at the ATM strike of each grid maturity, linear in strike and flat beyond the strike range."""
    atm = np.broadcast_to(np.asarray(atm_strike, dtype=float), grid.maturities.shape)
    return np.array([np.interp(k, grid.strikes, row) for k, row in zip(atm, grid.pv, strict=True)])


def load_option_grid(path: str | Path) -> OptionGrid:
    """Load a long-format CSV (maturity_years, strike, pv) into an OptionGrid."""
    try:
        frame = _normalise_columns(pd.read_csv(path, comment="#"))
        table = frame.pivot(index=COL_MATURITY, columns="strike", values="pv").sort_index().sort_index(axis=1)
    except (pd.errors.EmptyDataError, pd.errors.ParserError, KeyError, ValueError) as e:
        log.error("Could not parse option grid %s: %s", path, e)
        raise MarketDataError(f"Could not parse option grid: {e}") from e
    if table.isna().to_numpy().any():
        raise MarketDataError("Option grid has missing (maturity, strike) cells")
    return OptionGrid(table.index.to_numpy(dtype=float), table.columns.to_numpy(dtype=float), table.to_numpy())


def with_option_grid(snapshot: MarketSnapshot, grid: OptionGrid) -> MarketSnapshot:
    """Replace ATM inflation option PVs by grid values interpolated at the breakeven strikes."""
    atm = snapshot.inflation.breakeven(grid.maturities)
    quotes = replace(snapshot.quotes, zc_option_maturities=grid.maturities, zc_option_pv=interp_atm_strike(grid, atm))
    return replace(snapshot, quotes=quotes)


def bump_breakevens(snapshot: MarketSnapshot, bp: float = 1.0) -> MarketSnapshot:
    """Parallel breakeven shift in basis points."""
    return snapshot.shifted(breakeven=bp * BASIS_POINT)
