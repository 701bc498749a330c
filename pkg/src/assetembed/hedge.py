"""
Two-asset hedging experiment.

Every asset is paired, in an equal-weight daily-rebalanced portfolio, with
its least similar counterpart under each similarity method, where the
similarity is fitted on the training period and the portfolio volatility is
measured on the test period. Volatility is annualised with sqrt(252).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .analysis import SimilarityMethod, pairwise_scores
from .data import ReturnsMatrix

TRADING_DAYS = 252
N_RESAMPLES = 50_000


@dataclass(frozen=True)
class HedgedPortfolio:
    query: int
    hedge: int
    weights: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.query == self.hedge:
            raise ValueError("query and hedge must differ")
        if self.weights != (0.5, 0.5):
            raise ValueError("portfolio weights are fixed at (0.5, 0.5)")


@dataclass(frozen=True)
class HedgeResult:
    method: str
    hedges: np.ndarray
    volatilities: np.ndarray

    @property
    def mean_volatility(self) -> float:
        return float(self.volatilities.mean())


@dataclass(frozen=True)
class Comparison:
    a: str
    b: str
    mean_diff: float
    p_value: float
    p_adjusted: float
    reject: bool


def most_dissimilar(scores, query: int) -> int:
    """Lowest-scoring asset other than ``query``; ties go to the lower index."""
    row = np.array(scores[query], dtype=np.float64)
    if row.shape[0] < 2:
        raise ValueError("need at least two assets")
    row[query] = np.inf
    return int(np.argmin(row))


def least_similar(scores, query: int, pool: int) -> np.ndarray:
    """The ``pool`` lowest-scoring assets other than ``query``, ascending."""
    row = np.asarray(scores[query], dtype=np.float64)
    cand = np.delete(np.arange(row.shape[0]), query)
    order = np.lexsort((cand, row[cand]))
    return cand[order][:pool]


def portfolio_returns(returns, p: HedgedPortfolio) -> np.ndarray:
    R = returns.returns if isinstance(returns, ReturnsMatrix) else np.asarray(returns)
    return 0.5 * (R[p.query] + R[p.hedge])


def portfolio_volatility(test_returns, p: HedgedPortfolio) -> float:
    """Annualised sample standard deviation of the daily portfolio returns."""
    rp = portfolio_returns(test_returns, p)
    if rp.shape[0] < 2:
        raise ValueError("test period needs at least 2 returns")
    return float(rp.std(ddof=1) * math.sqrt(TRADING_DAYS))


def _pair_volatilities(R: np.ndarray, hedges: np.ndarray) -> np.ndarray:
    rp = 0.5 * (R + R[hedges])
    return rp.std(axis=1, ddof=1) * math.sqrt(TRADING_DAYS)


def run_experiment(methods: dict[str, SimilarityMethod], test: ReturnsMatrix,
                   scores: dict[str, np.ndarray] | None = None) -> list[HedgeResult]:
    """One portfolio per query asset per method.

    Each method must already be fitted on training-period data only; only
    ``test`` is used to measure volatility.
    """
    results = []
    for name, method in methods.items():
        S = scores[name] if scores and name in scores else pairwise_scores(method)
        if S.shape != (test.n_assets, test.n_assets):
            raise ValueError(f"{name}: score matrix {S.shape} does not match {test.n_assets} test assets")
        hedges = np.array([most_dissimilar(S, q) for q in range(test.n_assets)])
        vols = _pair_volatilities(test.returns, hedges)
        results.append(HedgeResult(name, hedges, vols))
    return results


@dataclass(frozen=True)
class RobustnessResult:
    method: str
    mean_volatilities: np.ndarray  # one per run
    hedges: np.ndarray             # (n_runs, n_assets)


def robustness_rerun(scores: dict[str, np.ndarray], test: ReturnsMatrix, n_runs: int = 100,
                     pool: int = 25, seed=0) -> list[RobustnessResult]:
    """Repeat the experiment, drawing each hedge uniformly from the query's
    ``pool`` least similar assets. Each method gets its own RNG stream."""
    n = test.n_assets
    if not 1 <= pool < n:
        raise ValueError(f"pool={pool} must satisfy 1 <= pool < {n}")
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(len(scores))
    out = []
    for (name, S), ss in zip(scores.items(), streams):
        rng = np.random.default_rng(ss)
        pools = np.array([least_similar(S, q, pool) for q in range(n)])
        picks = rng.integers(0, pool, size=(n_runs, n))
        hedges = pools[np.arange(n), picks]
        means = np.array([_pair_volatilities(test.returns, h).mean() for h in hedges])
        out.append(RobustnessResult(name, means, hedges))
    return out


def permutation_pvalue(x, y, n_resamples: int = N_RESAMPLES, rng=None, chunk: int = 10_000) -> float:
    """Two-sided permutation p-value for a difference in means.

    Uses the (count + 1) / (n_resamples + 1) estimator so the p-value is
    never zero.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(rng)
    pooled = np.concatenate([x, y])
    nx, ny = len(x), len(y)
    total = pooled.sum()
    observed = abs(x.mean() - y.mean())
    # tolerance so that exact ties with the observed statistic count
    tol = 1e-12 * max(1.0, np.abs(pooled).max())
    hits = 0
    done = 0
    while done < n_resamples:
        m = min(chunk, n_resamples - done)
        idx = np.argpartition(rng.random((m, nx + ny)), nx, axis=1)[:, :nx]
        sx = pooled[idx].sum(axis=1)
        diff = np.abs(sx / nx - (total - sx) / ny)
        hits += int(np.count_nonzero(diff >= observed - tol))
        done += m
    return (hits + 1) / (n_resamples + 1)


def holm(pvalues) -> np.ndarray:
    """Holm step-down adjusted p-values."""
    p = np.asarray(pvalues, dtype=np.float64)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adj = np.maximum.accumulate((m - np.arange(m)) * p[order])
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def significance_test(samples: dict[str, np.ndarray], alpha: float = 0.01,
                      n_resamples: int = N_RESAMPLES, seed=0) -> list[Comparison]:
    """All-pairs permutation tests on mean volatility, Holm-corrected.

    Stands in for Tukey's HSD: same family-wise error control, no
    studentised-range quadrature.
    """
    names = list(samples)
    if len(names) < 2:
        raise ValueError("need at least two methods to compare")
    sizes = {len(np.asarray(samples[k])) for k in names}
    if len(sizes) != 1:
        raise ValueError(f"samples must have equal sizes, got {sorted(sizes)}")
    pairs = list(itertools.combinations(names, 2))
    streams = np.random.SeedSequence(seed).spawn(len(pairs))
    raw = [permutation_pvalue(samples[a], samples[b], n_resamples, np.random.default_rng(s))
           for (a, b), s in zip(pairs, streams)]
    adj = holm(raw)
    return [
        Comparison(a, b, float(np.mean(samples[a]) - np.mean(samples[b])), p, float(q), bool(q < alpha))
        for (a, b), p, q in zip(pairs, raw, adj)
    ]


def volatility_histogram(vols, width: float = 0.01) -> list[tuple[float, float, int]]:
    """Counts per bin of ``width`` (1 percentage point by default), edges on multiples of width."""
    v = np.asarray(vols, dtype=np.float64)
    lo = math.floor(v.min() / width)
    hi = math.floor(v.max() / width) + 1
    counts = np.zeros(hi - lo, dtype=int)
    np.add.at(counts, np.floor(v / width).astype(int) - lo, 1)
    return [(round((lo + k) * width, 10), round((lo + k + 1) * width, 10), int(c))
            for k, c in enumerate(counts)]


def write_results(results: list[HedgeResult], tickers: list[str], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "query_ticker", "hedge_ticker", "annualized_volatility"])
        for res in results:
            for q, (h, v) in enumerate(zip(res.hedges, res.volatilities)):
                w.writerow([res.method, tickers[q], tickers[h], format(v, ".17g")])


def write_summary(results: list[HedgeResult], comparisons: list[Comparison], path,
                  baseline: str = "pearson") -> None:
    vs = {}
    for c in comparisons:
        if c.a == baseline:
            vs[c.b] = c
        elif c.b == baseline:
            vs[c.a] = c
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "mean_annualized_volatility", "p_vs_pearson", "significant"])
        for res in results:
            c = vs.get(res.method)
            w.writerow([
                res.method,
                format(res.mean_volatility, ".17g"),
                "" if c is None else format(c.p_adjusted, ".17g"),
                "" if c is None else str(c.reject).lower(),
            ])


def write_histogram(vols, path, width: float = 0.01) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "count"])
        for lo, hi, c in volatility_histogram(vols, width):
            w.writerow([lo, hi, c])
