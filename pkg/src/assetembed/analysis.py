"""
Queries over trained embeddings, and the pairwise similarity measures that
the hedging experiment compares against.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import AssetMeta, ReturnsMatrix
from .model import EmbeddingMatrix

logger = logging.getLogger(__name__)


class UndefinedSimilarity(ValueError):
    pass


class Kind(enum.Enum):
    EMBEDDING = "embedding"
    PEARSON = "pearson"
    SPEARMAN = "spearman"
    # stand-in for a geometric shape similarity whose exact formula is
    # not available here; always reported with the "proxy" suffix
    GEOMETRIC = "geometric_proxy"


@dataclass(frozen=True)
class SimilarityMethod:
    """A way of scoring asset pairs.

    EMBEDDING methods carry an EmbeddingMatrix; the others carry the
    training-period ReturnsMatrix.
    """

    kind: Kind
    data: EmbeddingMatrix | ReturnsMatrix

    def __post_init__(self):
        want = EmbeddingMatrix if self.kind is Kind.EMBEDDING else ReturnsMatrix
        if not isinstance(self.data, want):
            raise TypeError(f"{self.kind.value} needs a {want.__name__}")

    @classmethod
    def embedding(cls, E: EmbeddingMatrix) -> "SimilarityMethod":
        return cls(Kind.EMBEDDING, E)

    @classmethod
    def pearson(cls, r: ReturnsMatrix) -> "SimilarityMethod":
        return cls(Kind.PEARSON, r)

    @classmethod
    def spearman(cls, r: ReturnsMatrix) -> "SimilarityMethod":
        return cls(Kind.SPEARMAN, r)

    @classmethod
    def geometric(cls, r: ReturnsMatrix) -> "SimilarityMethod":
        return cls(Kind.GEOMETRIC, r)

    @property
    def n_assets(self) -> int:
        d = self.data
        return d.shape[0] if isinstance(d, EmbeddingMatrix) else d.n_assets


def _matrix(W) -> np.ndarray:
    return W.W if isinstance(W, EmbeddingMatrix) else np.asarray(W, dtype=np.float64)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise UndefinedSimilarity("cosine similarity is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def cosine_matrix(W) -> np.ndarray:
    W = _matrix(W)
    norms = np.linalg.norm(W, axis=1)
    if np.any(norms == 0):
        raise UndefinedSimilarity(f"zero embedding rows: {np.flatnonzero(norms == 0).tolist()}")
    U = W / norms[:, None]
    S = np.clip(U @ U.T, -1.0, 1.0)
    S = (S + S.T) / 2
    np.fill_diagonal(S, 1.0)
    return S


def _pearson_rows(X: np.ndarray) -> np.ndarray:
    Xc = X - X.mean(axis=1, keepdims=True)
    ss = np.sqrt(np.einsum("ij,ij->i", Xc, Xc))
    # exact test: centring a constant series can leave rounding residue
    flat = np.all(X == X[:, :1], axis=1) | (ss == 0)
    if np.any(flat):
        logger.warning("zero-variance series at rows %s; their correlations are set to 0",
                       np.flatnonzero(flat).tolist())
        ss = np.where(flat, 1.0, ss)
    Z = Xc / ss[:, None]
    S = np.clip(Z @ Z.T, -1.0, 1.0)
    S = (S + S.T) / 2
    S[flat, :] = 0.0
    S[:, flat] = 0.0
    np.fill_diagonal(S, 1.0)
    return S


def geometric_proxy(X: np.ndarray) -> np.ndarray:
    """1 / (1 + Euclidean distance between z-scored return series)."""
    mu = X.mean(axis=1, keepdims=True)
    sd = X.std(axis=1, keepdims=True)
    Z = (X - mu) / np.where(sd == 0, 1.0, sd)
    sq = np.einsum("ij,ij->i", Z, Z)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * Z @ Z.T, 0.0)
    S = 1.0 / (1.0 + np.sqrt(d2))
    S = (S + S.T) / 2
    np.fill_diagonal(S, 1.0)
    return S


def pairwise_scores(method: SimilarityMethod) -> np.ndarray:
    """Symmetric n_assets x n_assets score matrix with ones on the diagonal."""
    if method.kind is Kind.EMBEDDING:
        return cosine_matrix(method.data)
    X = method.data.returns
    if method.kind is Kind.PEARSON:
        return _pearson_rows(X)
    if method.kind is Kind.SPEARMAN:
        return _pearson_rows(rankdata(X, axis=1, method="average"))
    return geometric_proxy(X)


def _rank(scores: np.ndarray, candidates: np.ndarray, k: int) -> list[tuple[int, float]]:
    # descending score, ties by ascending index
    order = np.lexsort((candidates, -scores[candidates]))
    top = candidates[order][:k]
    return [(int(j), float(scores[j])) for j in top]


def knn(method, query: int, k: int, scores: np.ndarray | None = None) -> list[tuple[int, float]]:
    """The k highest-scoring assets other than ``query``.

    ``method`` may be a SimilarityMethod or an EmbeddingMatrix; pass a
    precomputed ``scores`` matrix to avoid recomputing it per query.
    """
    if isinstance(method, EmbeddingMatrix):
        method = SimilarityMethod.embedding(method)
    if scores is None:
        scores = pairwise_scores(method)
    n = scores.shape[0]
    if not 0 <= query < n:
        raise IndexError(f"query {query} out of range for {n} assets")
    if not 1 <= k < n:
        raise ValueError(f"k={k} must satisfy 1 <= k < {n}")
    cand = np.delete(np.arange(n), query)
    return _rank(scores[query], cand, k)


def analogy(W, a: int, b: int, c: int, k: int = 1) -> list[tuple[int, float]]:
    """Assets closest in cosine to W[b] - W[a] + W[c], excluding a, b and c.

    Reads as "a is to b as c is to ?".
    """
    if len({a, b, c}) != 3:
        raise ValueError(f"analogy needs three distinct assets, got {(a, b, c)}")
    W = _matrix(W)
    n = W.shape[0]
    if n < 4:
        raise ValueError("analogy needs at least 4 assets")
    q = W[b] - W[a] + W[c]
    qn = np.linalg.norm(q)
    if qn == 0:
        raise UndefinedSimilarity("analogy query vector is zero")
    norms = np.linalg.norm(W, axis=1)
    if np.any(norms == 0):
        raise UndefinedSimilarity("zero embedding row")
    scores = np.clip(W @ q / (norms * qn), -1.0, 1.0)
    cand = np.setdiff1d(np.arange(n), [a, b, c])
    return _rank(scores, cand, min(k, len(cand)))


def similarity_graph(W, threshold: float = 0.7) -> list[tuple[int, int, float]]:
    """Edges (i, j, cosine) with i < j and cosine strictly above ``threshold``."""
    if not -1 < threshold < 1:
        raise ValueError(f"threshold must be in (-1, 1), got {threshold}")
    S = cosine_matrix(W)
    i, j = np.triu_indices(S.shape[0], k=1)
    keep = S[i, j] > threshold
    return [(int(a), int(b), float(s)) for a, b, s in zip(i[keep], j[keep], S[i, j][keep])]


def mismatches(W, assets: list[AssetMeta], threshold: float = 0.9) -> list[tuple[int, int, float]]:
    """High-similarity pairs whose sector labels differ, by descending score."""
    W = _matrix(W)
    if len(assets) != W.shape[0]:
        raise ValueError(f"{len(assets)} assets for {W.shape[0]} embedding rows")
    sectors = [a.sector for a in assets]
    pairs = [(i, j, s) for i, j, s in similarity_graph(W, threshold) if sectors[i] != sectors[j]]
    pairs.sort(key=lambda p: (-p[2], p[0], p[1]))
    return pairs


def write_edges(edges, assets: list[AssetMeta], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source_ticker", "target_ticker", "weight"])
        for i, j, s in edges:
            w.writerow([assets[i].ticker, assets[j].ticker, format(s, ".17g")])
