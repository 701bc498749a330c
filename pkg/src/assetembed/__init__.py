"""Dense embeddings of financial assets learned from daily returns."""

from .analysis import SimilarityMethod, analogy, cosine, knn, mismatches, pairwise_scores, similarity_graph
from .classify import kfold_eval, smote, train_classifier
from .context import ContextSet, CooccurrenceMatrix, build_context_sets, closest_contexts, cooccurrence
from .data import AssetMeta, PriceTable, ReturnsMatrix, compute_returns, date_split, load_prices
from .hedge import most_dissimilar, portfolio_volatility, robustness_rerun, run_experiment, significance_test
from .model import EmbeddingMatrix, TrainConfig, init_embeddings, load_embeddings, save_embeddings, train

__version__ = "0.1.0"

__all__ = [
    "AssetMeta", "ContextSet", "CooccurrenceMatrix", "EmbeddingMatrix", "PriceTable",
    "ReturnsMatrix", "SimilarityMethod", "TrainConfig", "analogy", "build_context_sets",
    "closest_contexts", "compute_returns", "cooccurrence", "cosine", "date_split",
    "init_embeddings", "kfold_eval", "knn", "load_embeddings", "load_prices", "mismatches",
    "most_dissimilar", "pairwise_scores", "portfolio_volatility", "robustness_rerun",
    "run_experiment", "save_embeddings", "significance_test", "similarity_graph", "smote",
    "train", "train_classifier",
]
