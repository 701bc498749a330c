"""
Price ingestion, simple returns and chronological train/test splits.

Input files are long-format CSVs:

    prices:   date,ticker,close      (one row per date and ticker)
    metadata: ticker,sector,industry

Assets that lack a price on any date of the requested range are dropped,
so every downstream matrix covers one fixed universe.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

PRICE_HEADER = ["date", "ticker", "close"]
META_HEADER = ["ticker", "sector", "industry"]


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class AssetMeta:
    index: int
    ticker: str
    sector: str
    industry: str


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def _check_assets(assets: tuple[AssetMeta, ...]) -> None:
    if [a.index for a in assets] != list(range(len(assets))):
        raise DataError("asset indices must be contiguous from 0")
    tickers = [a.ticker for a in assets]
    if any(not t for t in tickers):
        raise DataError("empty ticker")
    if len(set(tickers)) != len(tickers):
        raise DataError("duplicate ticker in asset list")


def _check_dates(dates: tuple[str, ...]) -> None:
    ords = [dt.date.fromisoformat(d).toordinal() for d in dates]
    if any(b <= a for a, b in zip(ords, ords[1:])):
        raise DataError("dates must be strictly increasing")


@dataclass(frozen=True)
class PriceTable:
    """Prices for a fixed universe, shape (n_assets, n_dates)."""

    assets: tuple[AssetMeta, ...]
    dates: tuple[str, ...]
    prices: np.ndarray
    dropped: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "prices", _readonly(self.prices))
        _check_assets(self.assets)
        _check_dates(self.dates)
        if self.prices.shape != (len(self.assets), len(self.dates)):
            raise DataError(
                f"price matrix shape {self.prices.shape} does not match "
                f"{len(self.assets)} assets x {len(self.dates)} dates"
            )
        if not np.all(np.isfinite(self.prices)) or np.any(self.prices <= 0):
            raise DataError("prices must be finite and strictly positive")

    @property
    def tickers(self) -> list[str]:
        return [a.ticker for a in self.assets]


@dataclass(frozen=True)
class ReturnsMatrix:
    """Simple returns, shape (n_assets, T); column t is the change into dates[t]."""

    assets: tuple[AssetMeta, ...]
    dates: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "returns", _readonly(self.returns))
        _check_assets(self.assets)
        _check_dates(self.dates)
        if self.returns.shape != (len(self.assets), len(self.dates)):
            raise DataError(
                f"returns shape {self.returns.shape} does not match "
                f"{len(self.assets)} assets x {len(self.dates)} dates"
            )
        if not np.all(np.isfinite(self.returns)) or np.any(self.returns <= -1):
            raise DataError("returns must be finite and greater than -1")

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def T(self) -> int:
        return len(self.dates)

    @property
    def tickers(self) -> list[str]:
        return [a.ticker for a in self.assets]

    @property
    def ordinals(self) -> np.ndarray:
        return np.array([dt.date.fromisoformat(d).toordinal() for d in self.dates])

    def index_of(self, ticker: str) -> int:
        for a in self.assets:
            if a.ticker == ticker:
                return a.index
        raise KeyError(f"unknown ticker {ticker!r}")


def _parse_date(text: str, path: Path, lineno: int) -> str:
    try:
        return dt.date.fromisoformat(text.strip()).isoformat()
    except ValueError:
        raise DataError(f"{path}:{lineno}: bad date {text!r}") from None


def _open_csv(path: Path, header: list[str]):
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.reader(fh)
    first = next(reader, None)
    if first is None or [c.strip() for c in first] != header:
        fh.close()
        raise DataError(f"{path}:1: expected header {','.join(header)}, got {first}")
    return fh, reader


def load_metadata(meta_path) -> dict[str, tuple[str, str]]:
    meta_path = Path(meta_path)
    fh, reader = _open_csv(meta_path, META_HEADER)
    out: dict[str, tuple[str, str]] = {}
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{meta_path}:{lineno}: expected 3 fields, got {len(row)}")
            ticker, sector, industry = (c.strip() for c in row)
            if not ticker:
                raise DataError(f"{meta_path}:{lineno}: empty ticker")
            if ticker in out:
                raise DataError(f"{meta_path}:{lineno}: duplicate ticker {ticker!r}")
            out[ticker] = (sector, industry)
    return out


def load_prices(path, meta_path, start: str | None = None, end: str | None = None) -> PriceTable:
    """Load a long-format price file and its metadata into a PriceTable.

    The date axis is the union of all dates within ``[start, end]``; any
    asset without a price on every one of those dates is dropped with a
    warning. Tickers without metadata are dropped as well. Per ticker, rows
    must appear in strictly increasing date order.
    """
    path = Path(path)
    meta = load_metadata(meta_path)
    lo = dt.date.fromisoformat(start).isoformat() if start else None
    hi = dt.date.fromisoformat(end).isoformat() if end else None

    series: dict[str, dict[str, float]] = {}
    last_date: dict[str, str] = {}
    fh, reader = _open_csv(path, PRICE_HEADER)
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            date = _parse_date(row[0], path, lineno)
            ticker = row[1].strip()
            if not ticker:
                raise DataError(f"{path}:{lineno}: empty ticker")
            try:
                close = float(row[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad close price {row[2]!r}") from None
            if not math.isfinite(close) or close <= 0:
                raise DataError(f"{path}:{lineno}: price must be positive, got {row[2]!r}")
            prev = last_date.get(ticker)
            if prev is not None and date <= prev:
                raise DataError(
                    f"{path}:{lineno}: dates for {ticker!r} not strictly increasing "
                    f"({prev} then {date})"
                )
            last_date[ticker] = date
            if (lo and date < lo) or (hi and date > hi):
                continue
            series.setdefault(ticker, {})[date] = close

    dates = sorted({d for s in series.values() for d in s})
    dropped = []
    kept = []
    for ticker in sorted(series):
        if ticker not in meta:
            logger.warning("dropping %s: no metadata", ticker)
            dropped.append(ticker)
        elif len(series[ticker]) != len(dates):
            logger.warning(
                "dropping %s: %d of %d dates missing",
                ticker, len(dates) - len(series[ticker]), len(dates),
            )
            dropped.append(ticker)
        else:
            kept.append(ticker)
    if not kept:
        raise DataError(f"{path}: no asset has a complete price history")

    assets = [AssetMeta(i, t, *meta[t]) for i, t in enumerate(kept)]
    prices = np.array([[series[t][d] for d in dates] for t in kept])
    return PriceTable(assets, dates, prices, dropped=tuple(dropped))


def compute_returns(p: PriceTable) -> ReturnsMatrix:
    """Simple returns ``(p[t+1] - p[t]) / p[t]``; drops the first date."""
    prices = p.prices
    r = (prices[:, 1:] - prices[:, :-1]) / prices[:, :-1]
    return ReturnsMatrix(p.assets, p.dates[1:], r)


def date_split(r: ReturnsMatrix, train_fraction: float) -> tuple[ReturnsMatrix, ReturnsMatrix]:
    """Chronological split: the earliest floor(fraction * T) columns train."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if r.T < 2:
        raise ValueError("need at least 2 return columns to split")
    cut = math.floor(train_fraction * r.T)
    if cut == 0 or cut == r.T:
        raise ValueError(f"train_fraction {train_fraction} leaves an empty split for T={r.T}")
    return (
        ReturnsMatrix(r.assets, r.dates[:cut], r.returns[:, :cut]),
        ReturnsMatrix(r.assets, r.dates[cut:], r.returns[:, cut:]),
    )


def write_returns(r: ReturnsMatrix, path) -> None:
    """Long-format ``date,ticker,return`` dump."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ticker", "return"])
        for t, d in enumerate(r.dates):
            for a in r.assets:
                w.writerow([d, a.ticker, format(r.returns[a.index, t], ".17g")])


def write_prices(dates, tickers, prices, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRICE_HEADER)
        for t, d in enumerate(dates):
            for i, ticker in enumerate(tickers):
                w.writerow([d, ticker, format(prices[i][t], ".17g")])


def write_metadata(assets, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(META_HEADER)
        for a in assets:
            w.writerow([a.ticker, a.sector, a.industry])
