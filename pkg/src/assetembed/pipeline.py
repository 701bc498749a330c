"""End-to-end helpers shared by the CLI and the acceptance tests."""

from __future__ import annotations

import dataclasses

from .context import build_context_sets, cooccurrence
from .data import ReturnsMatrix
from .model import EmbeddingMatrix, TrainConfig, train

# (use_iqr, use_weighting) per model variant
VARIANTS = {
    "embedding": (False, False),
    "embedding+iqr": (True, False),
    "embedding+weight": (False, True),
    "embedding+weight+iqr": (True, True),
}


def fit_embeddings(r: ReturnsMatrix, cfg: TrainConfig) -> EmbeddingMatrix:
    """Context sets -> optional co-occurrence weights -> trained embeddings."""
    sets = build_context_sets(r, cfg.C, apply_iqr=cfg.use_iqr)
    beta = cooccurrence(sets, r.T, r.n_assets) if cfg.use_weighting else None
    return train(cfg, sets, beta, n_assets=r.n_assets)


def fit_variant(r: ReturnsMatrix, cfg: TrainConfig, variant: str) -> EmbeddingMatrix:
    use_iqr, use_weighting = VARIANTS[variant]
    return fit_embeddings(r, dataclasses.replace(cfg, use_iqr=use_iqr, use_weighting=use_weighting))
