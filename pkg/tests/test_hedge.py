import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from statsmodels.stats.multitest import multipletests

from assetembed.analysis import SimilarityMethod, pairwise_scores
from assetembed.data import date_split
from assetembed.hedge import (
    HedgedPortfolio, holm, least_similar, most_dissimilar, permutation_pvalue,
    portfolio_volatility, robustness_rerun, run_experiment, significance_test,
    volatility_histogram, write_histogram, write_results, write_summary,
)

import oracles
from conftest import make_returns


def test_most_dissimilar_examples():
    row = [[1.0, 0.9, -0.3, 0.1]]
    assert most_dissimilar(row, 0) == 2
    S = np.full((4, 4), 0.2)
    np.fill_diagonal(S, 1)
    assert most_dissimilar(S, 2) == 0
    assert most_dissimilar(S, 0) == 1


def test_most_dissimilar_linear_scan(rng):
    A = rng.normal(size=(30, 30))
    S = (A + A.T) / 2
    for q in range(30):
        best, best_j = math.inf, None
        for j in range(30):
            if j != q and S[q, j] < best:
                best, best_j = S[q, j], j
        assert most_dissimilar(S, q) == best_j


@settings(max_examples=50, deadline=None)
@given(arrays(np.int64, (6, 6), elements=st.integers(-100, 100)))
def test_selection_invariant_under_increasing_transform(A):
    # on a 0.01 grid so the transform stays strictly increasing in floating point
    S = (A + A.T) / 200
    for q in range(6):
        assert most_dissimilar(S, q) == most_dissimilar(np.exp(3 * S) + 1, q)


def test_negated_scores_direction_fixture():
    # hand-computed: asset 0 is closest to 1 and furthest from 2
    S = np.array([[1.0, 0.8, -0.5], [0.8, 1.0, 0.1], [-0.5, 0.1, 1.0]])
    assert [most_dissimilar(S, q) for q in range(3)] == [2, 2, 0]
    assert [most_dissimilar(-S, q) for q in range(3)] == [1, 0, 1]


def test_portfolio_perfect_hedge_and_no_diversification(rng):
    x = rng.normal(0, 0.01, size=50)
    r = make_returns(np.vstack([x, -x, x]))
    assert portfolio_volatility(r, HedgedPortfolio(0, 1)) == pytest.approx(0.0, abs=1e-15)
    single = x.std(ddof=1) * math.sqrt(252)
    assert portfolio_volatility(r, HedgedPortfolio(0, 2)) == pytest.approx(single, rel=1e-14)


def test_portfolio_matches_two_pass_oracle(rng):
    R = rng.normal(0, 0.02, size=(2, 80))
    rp = [0.5 * (a + b) for a, b in zip(R[0], R[1])]
    want = oracles.sample_std_two_pass(rp) * math.sqrt(252)
    assert abs(portfolio_volatility(make_returns(R), HedgedPortfolio(0, 1)) - want) < 1e-12


def test_hedged_portfolio_invariants():
    with pytest.raises(ValueError):
        HedgedPortfolio(1, 1)
    with pytest.raises(ValueError):
        HedgedPortfolio(0, 1, (0.6, 0.4))


def _methods(train):
    return {"pearson": SimilarityMethod.pearson(train), "spearman": SimilarityMethod.spearman(train)}


def test_run_experiment_shape(rng):
    r = make_returns(rng.normal(0, 0.01, size=(7, 60)))
    train, test = date_split(r, 0.7)
    res = run_experiment(_methods(train), test)
    assert [x.method for x in res] == ["pearson", "spearman"]
    for x in res:
        assert len(x.hedges) == 7 and len(x.volatilities) == 7
        assert np.all(x.volatilities >= 0)
        assert all(h != q for q, h in enumerate(x.hedges))
        for q in range(7):
            assert x.volatilities[q] == pytest.approx(
                portfolio_volatility(test, HedgedPortfolio(q, int(x.hedges[q]))), rel=1e-13)


def test_poisoned_test_split_does_not_change_hedges(rng):
    R = rng.normal(0, 0.01, size=(6, 50))
    poisoned = R.copy()
    poisoned[:, 35:] = rng.normal(0, 0.3, size=(6, 15)).clip(-0.9)
    a_train, a_test = date_split(make_returns(R), 0.7)
    b_train, b_test = date_split(make_returns(poisoned), 0.7)
    a = run_experiment(_methods(a_train), a_test)
    b = run_experiment(_methods(b_train), b_test)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.hedges, y.hedges)
        assert not np.allclose(x.volatilities, y.volatilities)


def test_robustness_pool_one_is_deterministic_experiment(rng):
    r = make_returns(rng.normal(0, 0.01, size=(8, 60)))
    train, test = date_split(r, 0.7)
    methods = _methods(train)
    scores = {k: pairwise_scores(m) for k, m in methods.items()}
    base = {x.method: x for x in run_experiment(methods, test)}
    for rb in robustness_rerun(scores, test, n_runs=5, pool=1, seed=0):
        assert np.all(rb.hedges == base[rb.method].hedges)
        np.testing.assert_allclose(rb.mean_volatilities, base[rb.method].mean_volatility, rtol=1e-14)


def test_robustness_picks_from_bottom_pool(rng):
    r = make_returns(rng.normal(0, 0.01, size=(12, 60)))
    train, test = date_split(r, 0.7)
    S = pairwise_scores(SimilarityMethod.pearson(train))
    (rb,) = robustness_rerun({"pearson": S}, test, n_runs=30, pool=4, seed=9)
    for q in range(12):
        ranked = sorted((S[q, j], j) for j in range(12) if j != q)
        allowed = {j for _, j in ranked[:4]}
        assert set(rb.hedges[:, q].tolist()) <= allowed
        assert set(least_similar(S, q, 4).tolist()) == allowed
    assert len(set(rb.hedges[:, 0].tolist())) > 1
    (again,) = robustness_rerun({"pearson": S}, test, n_runs=30, pool=4, seed=9)
    np.testing.assert_array_equal(rb.hedges, again.hedges)


def test_robustness_rejects_pool():
    r = make_returns(np.random.default_rng(0).normal(0, 0.01, size=(4, 20)))
    with pytest.raises(ValueError):
        robustness_rerun({"p": np.eye(4)}, r, pool=4)


def test_significance_identical_samples():
    x = np.random.default_rng(0).normal(0.2, 0.03, size=40)
    (c,) = significance_test({"a": x, "b": x.copy()}, alpha=0.01, n_resamples=2000)
    assert c.p_value == 1.0 and not c.reject


def test_significance_large_shift():
    rng = np.random.default_rng(1)
    x = rng.normal(0.2, 0.03, size=40)
    se = 0.03 * math.sqrt(2 / 40)
    (c,) = significance_test({"a": x, "b": rng.normal(0.2, 0.03, size=40) + 10 * se}, alpha=0.01)
    assert c.reject and c.p_adjusted < 1e-3


def test_significance_needs_equal_sizes():
    with pytest.raises(ValueError):
        significance_test({"a": np.ones(5), "b": np.ones(6)})


def test_significance_pairs_and_determinism(rng):
    samples = {k: rng.normal(0.2 + 0.01 * i, 0.03, size=30) for i, k in enumerate("abcd")}
    res = significance_test(samples, 0.05, n_resamples=3000, seed=5)
    assert [(c.a, c.b) for c in res] == [("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")]
    again = significance_test(samples, 0.05, n_resamples=3000, seed=5)
    assert [c.p_value for c in res] == [c.p_value for c in again]
    np.testing.assert_allclose([c.p_adjusted for c in res],
                               multipletests([c.p_value for c in res], method="holm")[1], atol=1e-15)


def test_permutation_pvalue_small_exact():
    from itertools import combinations

    x, y = np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 7.0])
    pooled = np.concatenate([x, y])
    obs = abs(x.mean() - y.mean())
    splits = list(combinations(range(6), 3))
    exact = sum(abs(pooled[list(s)].mean() - np.delete(pooled, s).mean()) >= obs - 1e-12
                for s in splits) / len(splits)
    p = permutation_pvalue(x, y, 40_000, np.random.default_rng(0))
    assert abs(p - exact) < 0.01


def test_holm_against_statsmodels(rng):
    for _ in range(20):
        p = rng.random(7) ** 3
        np.testing.assert_allclose(holm(p), multipletests(p, method="holm")[1], atol=1e-15)


def test_variance_identity(rng):
    R = rng.normal(0, 0.02, size=(2, 100))
    rp = 0.5 * (R[0] + R[1])
    c = np.cov(R, ddof=1)
    assert abs(rp.var(ddof=1) - 0.25 * (c[0, 0] + c[1, 1] + 2 * c[0, 1])) < 1e-10


def test_histogram_bins():
    bins = volatility_histogram([0.105, 0.112, 0.119, 0.131])
    assert bins == [(0.1, 0.11, 1), (0.11, 0.12, 2), (0.12, 0.13, 0), (0.13, 0.14, 1)]
    assert sum(c for *_, c in volatility_histogram(np.random.default_rng(0).uniform(0.1, 0.4, 500))) == 500


def test_output_files(tmp_path, rng):
    r = make_returns(rng.normal(0, 0.01, size=(5, 40)))
    train, test = date_split(r, 0.7)
    res = run_experiment(_methods(train), test)
    comps = significance_test({x.method: x.volatilities for x in res}, n_resamples=500)
    write_results(res, r.tickers, tmp_path / "r.csv")
    write_summary(res, comps, tmp_path / "s.csv")
    write_histogram(res[0].volatilities, tmp_path / "h.csv")
    rows = tmp_path.joinpath("r.csv").read_text().splitlines()
    assert rows[0] == "method,query_ticker,hedge_ticker,annualized_volatility" and len(rows) == 11
    summary = tmp_path.joinpath("s.csv").read_text().splitlines()
    assert summary[0] == "method,mean_annualized_volatility,p_vs_pearson,significant"
    assert summary[1].startswith("pearson,") and summary[1].endswith(",,")
    assert summary[2].split(",")[3] in ("true", "false")
    assert tmp_path.joinpath("h.csv").read_text().startswith("bin_low,bin_high,count\n")
