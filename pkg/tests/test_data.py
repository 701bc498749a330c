import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from assetembed.data import (
    DataError, PriceTable, compute_returns, date_split, load_prices, write_metadata, write_prices,
)
from assetembed.synthetic import business_days, prices_from_returns, sector_returns

from conftest import make_returns


def _write(tmp_path, prices_text, meta_text="ticker,sector,industry\nAAA,Finance,Bank\nBBB,Energy,Oil\nCCC,Technology,Chips\n"):
    p = tmp_path / "prices.csv"
    m = tmp_path / "meta.csv"
    p.write_text(prices_text)
    m.write_text(meta_text)
    return p, m


GOOD = """date,ticker,close
2020-01-02,AAA,10
2020-01-02,BBB,20
2020-01-02,CCC,30
2020-01-03,AAA,11
2020-01-03,BBB,21
2020-01-03,CCC,31
2020-01-06,AAA,12
2020-01-06,BBB,22
2020-01-06,CCC,32
2020-01-07,AAA,13
2020-01-07,BBB,23
2020-01-07,CCC,33
"""


def test_load_three_assets_four_dates(tmp_path):
    table = load_prices(*_write(tmp_path, GOOD))
    assert len(table.assets) == 3
    assert len(table.dates) == 4
    assert table.tickers == ["AAA", "BBB", "CCC"]
    assert table.assets[0].sector == "Finance"
    np.testing.assert_array_equal(table.prices[1], [20, 21, 22, 23])


def test_asset_missing_a_date_is_dropped(tmp_path, caplog):
    text = GOOD.replace("2020-01-06,BBB,22\n", "")
    with caplog.at_level(logging.WARNING):
        table = load_prices(*_write(tmp_path, text))
    assert table.tickers == ["AAA", "CCC"]
    assert table.dropped == ("BBB",)
    assert [a.index for a in table.assets] == [0, 1]
    assert "BBB" in caplog.text


def test_zero_price_rejected(tmp_path):
    text = GOOD.replace("2020-01-06,AAA,12", "2020-01-06,AAA,0.00")
    with pytest.raises(DataError, match="positive"):
        load_prices(*_write(tmp_path, text))


def test_malformed_row_names_line(tmp_path):
    text = GOOD.replace("2020-01-03,BBB,21", "2020-01-03,BBB")
    with pytest.raises(DataError, match=r"prices.csv:6"):
        load_prices(*_write(tmp_path, text))


def test_bad_number_names_line(tmp_path):
    text = GOOD.replace("2020-01-03,BBB,21", "2020-01-03,BBB,abc")
    with pytest.raises(DataError, match=r":6: bad close"):
        load_prices(*_write(tmp_path, text))


def test_duplicate_ticker_in_metadata(tmp_path):
    meta = "ticker,sector,industry\nAAA,F,B\nAAA,E,O\n"
    with pytest.raises(DataError, match="duplicate ticker"):
        load_prices(*_write(tmp_path, GOOD, meta))


def test_non_monotone_dates(tmp_path):
    text = GOOD.replace("2020-01-07,AAA,13", "2020-01-01,AAA,13")
    with pytest.raises(DataError, match="not strictly increasing"):
        load_prices(*_write(tmp_path, text))


def test_duplicate_date_row(tmp_path):
    text = GOOD + "2020-01-07,CCC,34\n"
    with pytest.raises(DataError, match="not strictly increasing"):
        load_prices(*_write(tmp_path, text))


def test_bad_header(tmp_path):
    with pytest.raises(DataError, match="header"):
        load_prices(*_write(tmp_path, GOOD.replace("close", "price")))


def test_date_range_restricts_and_drop_rule_applies_within_it(tmp_path):
    # BBB misses a date outside the range, so it survives
    text = GOOD.replace("2020-01-02,BBB,20\n", "")
    table = load_prices(*_write(tmp_path, text), start="2020-01-03")
    assert table.tickers == ["AAA", "BBB", "CCC"]
    assert table.dates == ("2020-01-03", "2020-01-06", "2020-01-07")


def test_ticker_without_metadata_dropped(tmp_path):
    meta = "ticker,sector,industry\nAAA,F,B\nBBB,E,O\n"
    table = load_prices(*_write(tmp_path, GOOD, meta))
    assert table.tickers == ["AAA", "BBB"]
    assert table.dropped == ("CCC",)


def test_write_then_load_round_trip(tmp_path):
    table = prices_from_returns(sector_returns(2, 3, 20, seed=4))
    write_prices(table.dates, table.tickers, table.prices, tmp_path / "p.csv")
    write_metadata(table.assets, tmp_path / "m.csv")
    back = load_prices(tmp_path / "p.csv", tmp_path / "m.csv")
    assert back.assets == table.assets
    assert back.dates == table.dates
    np.testing.assert_array_equal(back.prices, table.prices)


def test_price_table_is_immutable():
    table = prices_from_returns(sector_returns(1, 2, 5))
    with pytest.raises(ValueError):
        table.prices[0, 0] = 1.0


def _table(prices):
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    r = make_returns(np.zeros((prices.shape[0], prices.shape[1] - 1)))
    return PriceTable(r.assets, business_days("2000-12-29", prices.shape[1]), prices)


def test_returns_simple_example():
    r = compute_returns(_table([100, 110, 99]))
    np.testing.assert_allclose(r.returns[0], [0.10, -0.10], rtol=0, atol=1e-15)


def test_returns_constant_prices():
    r = compute_returns(_table([50, 50, 50]))
    np.testing.assert_array_equal(r.returns[0], [0.0, 0.0])


def test_returns_match_scalar_loop_oracle(rng):
    prices = rng.uniform(1, 200, size=(10, 20))
    r = compute_returns(_table(prices))
    oracle = [[(prices[i][t + 1] - prices[i][t]) / prices[i][t] for t in range(19)] for i in range(10)]
    np.testing.assert_array_equal(r.returns, np.array(oracle))
    assert r.dates == _table(prices).dates[1:]


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, (3, 1), elements=st.floats(0.01, 1e4)),
    arrays(np.float64, (3, 11), elements=st.floats(0.5, 2.0)),
)
def test_cumulative_reconstruction(p0, steps):
    # daily moves between -50% and +100%
    prices = p0 * np.cumprod(np.hstack([np.ones((3, 1)), steps]), axis=1)
    r = compute_returns(_table(prices))
    rebuilt = np.empty_like(prices)
    rebuilt[:, 0] = prices[:, 0]
    for t in range(r.T):
        rebuilt[:, t + 1] = rebuilt[:, t] * (1 + r.returns[:, t])
    np.testing.assert_allclose(rebuilt, prices, rtol=1e-12, atol=0)


def test_date_split_lengths():
    r = make_returns(np.zeros((2, 10)))
    a, b = date_split(r, 0.7)
    assert (a.T, b.T) == (7, 3)


def test_date_split_boundary():
    a, b = date_split(make_returns(np.zeros((2, 2))), 0.5)
    assert (a.T, b.T) == (1, 1)


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 1.5])
def test_date_split_rejects_bad_fraction(frac):
    with pytest.raises(ValueError):
        date_split(make_returns(np.zeros((2, 10))), frac)


def test_date_split_on_2000_2018_business_days():
    # 19 years of business days; 70% lands in 2013
    dates = business_days("2000-01-03", 4956)
    assert dates[-1].startswith("2018")
    r = make_returns(np.zeros((1, len(dates))), start="2000-01-03")
    train, test = date_split(r, 0.7)
    assert train.dates[0].startswith("2000")
    assert train.dates[-1].startswith("2013")
    assert test.dates[0].startswith("2013")
    assert test.dates[-1].startswith("2018")


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.floats(0.01, 0.99))
def test_date_split_partition(T, frac):
    R = np.arange(2 * T, dtype=float).reshape(2, T) / (4 * T)
    r = make_returns(R)
    try:
        a, b = date_split(r, frac)
    except ValueError:
        assert int(frac * T) in (0, T)
        return
    np.testing.assert_array_equal(np.hstack([a.returns, b.returns]), r.returns)
    assert a.dates + b.dates == r.dates
    assert a.dates[-1] < b.dates[0]
