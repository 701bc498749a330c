"""
Seeded synthetic factor-model universes for tests, acceptance runs and the
``make-fixture`` command.
"""

from __future__ import annotations

import datetime as dt

import numpy as np

from .data import AssetMeta, PriceTable, ReturnsMatrix


def business_days(start: str, n: int) -> list[str]:
    d = dt.date.fromisoformat(start)
    out = []
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d.isoformat())
        d += dt.timedelta(days=1)
    return out


def _assets(n_sectors: int, per_sector: int) -> list[AssetMeta]:
    return [
        AssetMeta(s * per_sector + k, f"S{s}A{k:02d}", f"Sector{s}", f"Industry{s}.{k % 2}")
        for s in range(n_sectors)
        for k in range(per_sector)
    ]


def sector_returns(
    n_sectors: int = 8,
    per_sector: int = 8,
    T: int = 500,
    sigma: float = 0.01,
    snr: float = 1.0,
    seed: int = 0,
    start: str = "2000-01-04",
) -> ReturnsMatrix:
    """Independent sector factors plus idiosyncratic noise.

    ``snr`` is the ratio of factor to noise standard deviation.
    """
    rng = np.random.default_rng(seed)
    factors = rng.normal(0.0, sigma * snr, size=(n_sectors, T))
    noise = rng.normal(0.0, sigma, size=(n_sectors * per_sector, T))
    r = np.repeat(factors, per_sector, axis=0) + noise
    return ReturnsMatrix(_assets(n_sectors, per_sector), business_days(start, T), r)


def hedge_returns(
    n_pairs: int = 4,
    per_sector: int = 6,
    T: int = 600,
    sigma: float = 0.01,
    snr: float = 1.0,
    stress_fraction: float = 0.1,
    stress_scale: float = 6.0,
    train_fraction: float = 0.7,
    seed: int = 0,
    start: str = "2000-01-04",
) -> ReturnsMatrix:
    """Universe of sector pairs driven by opposite factors.

    Sector 2p carries factor f_p and sector 2p+1 carries -f_p, so the natural
    hedge for any asset is a member of its partner sector. A fraction of the
    training-period days are stress days: every return is scaled up by
    ``stress_scale`` and the partner pattern is rotated (sector 2p opposes
    sector 2p+3 instead). Stress days never occur in the test period.
    """
    rng = np.random.default_rng(seed)
    n_sectors = 2 * n_pairs
    n = n_sectors * per_sector
    cut = int(np.floor(train_fraction * T))
    f = rng.normal(0.0, sigma * snr, size=(n_pairs, T))
    sector_f = np.empty((n_sectors, T))
    sector_f[0::2] = f
    sector_f[1::2] = -f

    stress = np.zeros(T, dtype=bool)
    n_stress = int(round(stress_fraction * cut))
    stress[rng.choice(cut, size=n_stress, replace=False)] = True
    g = rng.normal(0.0, sigma * snr, size=(n_pairs, T))
    rotated = np.empty((n_sectors, T))
    for p in range(n_pairs):
        rotated[2 * p] = g[p]
        rotated[(2 * p + 3) % n_sectors] = -g[p]
    sector_f[:, stress] = rotated[:, stress]

    r = np.repeat(sector_f, per_sector, axis=0) + rng.normal(0.0, sigma, size=(n, T))
    r[:, stress] *= stress_scale
    return ReturnsMatrix(_assets(n_sectors, per_sector), business_days(start, T), r)


def prices_from_returns(r: ReturnsMatrix, start_price: float = 100.0, first_date: str | None = None) -> PriceTable:
    """Inverse of compute_returns, with one extra leading date."""
    if first_date is None:
        d = dt.date.fromisoformat(r.dates[0]) - dt.timedelta(days=1)
        while d.weekday() >= 5:
            d -= dt.timedelta(days=1)
        first_date = d.isoformat()
    n, T = r.returns.shape
    p = np.empty((n, T + 1))
    p[:, 0] = start_price
    for t in range(T):
        p[:, t + 1] = p[:, t] * (1.0 + r.returns[:, t])
    return PriceTable(r.assets, (first_date, *r.dates), p)
