"""
Shared-weight CBOW-style softmax model over assets.

A single matrix W (n_assets x N) is both the input lookup and the output
projection: the hidden layer is a (weighted) mean of the context rows and
the posterior over targets is softmax(W h). Trained with plain per-set SGD
on cross-entropy.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .context import ContextSet, CooccurrenceMatrix, as_arrays, weights_array
from .data import AssetMeta

logger = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, step: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step


class EmbeddingFormatError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingMatrix:
    W: np.ndarray
    loss_history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        if W.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("embedding matrix has non-finite entries")
        W.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "loss_history", tuple(self.loss_history))

    @property
    def shape(self) -> tuple[int, int]:
        return self.W.shape


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters.

    C=3 and N=20 are the reference settings; learning rate, epochs and the
    optimizer have no reference value and are defaults of this implementation.
    """

    C: int = 3
    N: int = 20
    learning_rate: float = 0.025
    epochs: int = 10
    seed: int = 0
    use_iqr: bool = True
    use_weighting: bool = True
    shuffle: bool = True

    def __post_init__(self):
        if not self.learning_rate >= 0 or not math.isfinite(self.learning_rate):
            raise ValueError(f"learning_rate must be finite and non-negative, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.C < 1:
            raise ValueError(f"C must be >= 1, got {self.C}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")


@dataclass(frozen=True)
class ForwardResult:
    h: np.ndarray
    probs: np.ndarray


@dataclass(frozen=True)
class Grads:
    """Gradient of the loss w.r.t. W, split by where it enters.

    ``output`` is the dense (n_assets x N) term from the softmax projection;
    ``context_grad[k]`` is added to row ``context_rows[k]`` via the hidden layer.
    """

    output: np.ndarray
    context_rows: np.ndarray
    context_grad: np.ndarray

    def dense(self) -> np.ndarray:
        g = self.output.copy()
        g[self.context_rows] += self.context_grad
        return g


def init_embeddings(u: int, n: int, seed=None) -> EmbeddingMatrix:
    """Uniform on [-0.5/n, 0.5/n]."""
    if u < 1 or n < 1:
        raise ValueError("u and n must be >= 1")
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix(rng.uniform(-0.5 / n, 0.5 / n, size=(u, n)))


def _weights(C: int, weights) -> np.ndarray:
    if weights is None:
        return np.full(C, 1.0 / C)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (C,):
        raise ValueError(f"expected {C} weights, got shape {w.shape}")
    return w


def hidden(W, s: ContextSet, weights=None) -> np.ndarray:
    W = W.W if isinstance(W, EmbeddingMatrix) else np.asarray(W)
    w = _weights(len(s.context), weights)
    return w @ W[list(s.context)]


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def forward(W, h) -> np.ndarray:
    """Posterior over targets, softmax(W h)."""
    W = W.W if isinstance(W, EmbeddingMatrix) else np.asarray(W)
    return softmax(W @ np.asarray(h, dtype=np.float64))


def _step_terms(W: np.ndarray, target: int, ctx: np.ndarray, w: np.ndarray):
    # returns loss, dL/dlogits, h, dL/dh
    h = w @ W[ctx]
    z = W @ h
    m = z.max()
    e = np.exp(z - m)
    s = e.sum()
    loss = math.log(s) + m - z[target]
    g = e / s
    g[target] -= 1.0
    dh = g @ W
    return loss, g, h, dh


def loss_and_grads(W, s: ContextSet, weights=None) -> tuple[float, Grads]:
    """Cross-entropy of the true target and its gradient w.r.t. W.

    W enters twice (context lookup and output projection) so each context
    row gets both the output term and the hidden-layer term.
    """
    W = W.W if isinstance(W, EmbeddingMatrix) else np.asarray(W, dtype=np.float64)
    ctx = np.array(s.context, dtype=np.intp)
    w = _weights(len(ctx), weights)
    loss, g, h, dh = _step_terms(W, s.target, ctx, w)
    return loss, Grads(np.outer(g, h), ctx, w[:, None] * dh)


def train(
    cfg: TrainConfig,
    sets: list[ContextSet],
    beta: CooccurrenceMatrix | None = None,
    n_assets: int | None = None,
    init: EmbeddingMatrix | None = None,
) -> EmbeddingMatrix:
    """Per-set SGD over ``cfg.epochs`` passes.

    ``n_assets`` defaults to the size of ``beta`` or the largest index seen;
    pass it explicitly when some assets never appear. ``init`` overrides the
    seeded initialisation (the RNG is still used for shuffling).
    """
    if cfg.use_weighting and beta is None:
        raise ValueError("use_weighting requires a co-occurrence matrix")
    if not cfg.use_weighting and beta is not None:
        raise ValueError("beta given but use_weighting is off")
    targets, contexts = as_arrays(sets)
    if contexts.shape[1] != cfg.C:
        raise ValueError(f"context sets have C={contexts.shape[1]}, config says {cfg.C}")
    if n_assets is None:
        if beta is not None:
            n_assets = beta.beta.shape[0]
        elif init is not None:
            n_assets = init.shape[0]
        else:
            n_assets = int(max(targets.max(), contexts.max())) + 1
    if cfg.C >= n_assets:
        raise ValueError(f"C={cfg.C} must be < number of assets {n_assets}")

    rng = np.random.default_rng(cfg.seed)
    # always draw, so the shuffle stream does not depend on ``init``
    drawn = init_embeddings(n_assets, cfg.N, rng)
    W = np.array((init if init is not None else drawn).W)
    if W.shape != (n_assets, cfg.N):
        raise ValueError(f"init shape {W.shape} != ({n_assets}, {cfg.N})")

    if cfg.use_weighting:
        weights = weights_array(beta, targets, contexts)
    else:
        weights = np.full(contexts.shape, 1.0 / cfg.C)

    lr = cfg.learning_rate
    M = len(targets)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(M) if cfg.shuffle else range(M)
        total = 0.0
        for step, k in enumerate(order):
            ctx = contexts[k]
            w = weights[k]
            loss, g, h, dh = _step_terms(W, targets[k], ctx, w)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, step, loss)
            total += loss
            W -= lr * np.outer(g, h)
            W[ctx] -= lr * (w[:, None] * dh)
        mean = total / M
        history.append(mean)
        logger.info("epoch %d/%d mean loss %.6f", epoch, cfg.epochs, mean)
    if not np.all(np.isfinite(W)):
        raise TrainingDiverged(cfg.epochs, M, float("nan"))
    return EmbeddingMatrix(W, loss_history=tuple(history))


def save_embeddings(E: EmbeddingMatrix, assets, path) -> None:
    W = E.W if isinstance(E, EmbeddingMatrix) else np.asarray(E)
    if len(assets) != W.shape[0]:
        raise EmbeddingFormatError(f"{len(assets)} assets for {W.shape[0]} rows")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["ticker", "sector", "industry"] + [f"e{k + 1}" for k in range(W.shape[1])])
        for a, row in zip(assets, W):
            wr.writerow([a.ticker, a.sector, a.industry] + [format(x, ".17g") for x in row])


def load_embeddings(path, expected_tickers=None) -> tuple[EmbeddingMatrix, list[AssetMeta]]:
    """Read an embedding CSV; raises EmbeddingFormatError on any inconsistency."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    if not text.endswith("\n"):
        raise EmbeddingFormatError(f"{path}: truncated (no trailing newline)")
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise EmbeddingFormatError(f"{path}: empty file")
    header = rows[0]
    n = len(header) - 3
    expected = ["ticker", "sector", "industry"] + [f"e{k + 1}" for k in range(n)]
    if n < 1 or header != expected:
        raise EmbeddingFormatError(f"{path}:1: bad header {header}")
    assets, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != n + 3:
            raise EmbeddingFormatError(f"{path}:{lineno}: expected {n + 3} fields, got {len(row)}")
        try:
            values.append([float(x) for x in row[3:]])
        except ValueError as exc:
            raise EmbeddingFormatError(f"{path}:{lineno}: {exc}") from None
        assets.append(AssetMeta(lineno - 2, row[0], row[1], row[2]))
    if not assets:
        raise EmbeddingFormatError(f"{path}: no embedding rows")
    tickers = [a.ticker for a in assets]
    if len(set(tickers)) != len(tickers):
        raise EmbeddingFormatError(f"{path}: duplicate tickers")
    if expected_tickers is not None and list(expected_tickers) != tickers:
        raise EmbeddingFormatError(f"{path}: tickers do not match the expected universe")
    try:
        E = EmbeddingMatrix(np.array(values))
    except ValueError as exc:
        raise EmbeddingFormatError(f"{path}: {exc}") from None
    return E, assets
