"""
Sector classification from embeddings: SMOTE rebalancing, a one-vs-rest
linear hinge-loss classifier, and stratified k-fold evaluation with
macro-averaged metrics.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .model import EmbeddingMatrix

logger = logging.getLogger(__name__)


def smote(X, y, k_neighbors: int = 5, seed=None, return_sources: bool = False,
          drop_singletons: bool = True):
    """Oversample every class up to the majority count.

    Synthetic points are ``x + u * (x_nn - x)`` with ``u ~ U[0, 1]``, ``x`` a
    random member of the class and ``x_nn`` one of its ``k_neighbors``
    nearest same-class neighbours (capped at class size - 1). Originals are
    kept, in order, ahead of the synthetic rows.

    With ``return_sources`` a third array of shape (n_out, 2) gives, for
    each output row, the input rows it was interpolated between (``(i, i)``
    for originals). Singleton classes are dropped with a warning, or kept
    without oversampling when ``drop_singletons`` is False.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y have different lengths")
    rng = np.random.default_rng(seed)
    labels, counts = np.unique(y, return_counts=True)
    keep = np.ones(len(y), dtype=bool)
    singletons = labels[counts < 2]
    if len(singletons):
        if drop_singletons:
            logger.warning("excluding classes with fewer than 2 members: %s", singletons.tolist())
            keep &= ~np.isin(y, singletons)
        else:
            logger.warning("not oversampling classes with fewer than 2 members: %s", singletons.tolist())
    idx_kept = np.flatnonzero(keep)
    target = counts[counts >= 2].max() if np.any(counts >= 2) else 0

    new_X, new_y, new_src = [], [], []
    for label in labels:
        members = np.flatnonzero(y == label)
        need = target - len(members)
        if len(members) < 2 or need <= 0:
            continue
        k = min(k_neighbors, len(members) - 1)
        P = X[members]
        d = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        # k nearest per member, ties by position
        nn = np.argsort(d, axis=1, kind="stable")[:, :k]
        base = rng.integers(0, len(members), size=need)
        pick = nn[base, rng.integers(0, k, size=need)]
        u = rng.random(need)[:, None]
        new_X.append(P[base] + u * (P[pick] - P[base]))
        new_y.append(np.full(need, label, dtype=y.dtype))
        new_src.append(np.column_stack([members[base], members[pick]]))

    X_out = np.vstack([X[idx_kept], *new_X])
    y_out = np.concatenate([y[idx_kept], *new_y])
    if not return_sources:
        return X_out, y_out
    src = np.vstack([np.column_stack([idx_kept, idx_kept]), *new_src]).astype(np.intp)
    return X_out, y_out, src


class LinearOVR:
    """One-vs-rest linear max-margin classifier.

    Trained by per-sample subgradient descent on the L2-regularised hinge
    loss, on features standardised with the training mean and spread.
    """

    def __init__(self, epochs: int = 200, lr: float = 0.01, reg: float = 1e-3, seed=None):
        self.epochs = epochs
        self.lr = lr
        self.reg = reg
        self.seed = seed

    def fit(self, X, y) -> "LinearOVR":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        K = len(self.classes_)
        if K < 2:
            raise ValueError("need at least two classes to train a classifier")
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        Z = (X - self.mean_) / self.scale_
        T = np.where(y[:, None] == self.classes_[None, :], 1.0, -1.0)
        n, d = Z.shape
        W = np.zeros((K, d))
        b = np.zeros(K)
        rng = np.random.default_rng(self.seed)
        lr, reg = self.lr, self.reg
        for _ in range(self.epochs):
            for i in rng.permutation(n):
                z, t = Z[i], T[i]
                active = t * (W @ z + b) < 1.0
                W *= 1.0 - lr * reg
                if active.any():
                    ta = t[active]
                    W[active] += lr * ta[:, None] * z
                    b[active] += lr * ta
        self.coef_ = W
        self.intercept_ = b
        return self

    def decision_function(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_
        return Z @ self.coef_.T + self.intercept_

    def predict(self, X) -> np.ndarray:
        # argmax takes the first maximum, i.e. ties go to the lower label
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def train_classifier(X, y, epochs: int = 200, lr: float = 0.01, reg: float = 1e-3, seed=None) -> LinearOVR:
    return LinearOVR(epochs, lr, reg, seed).fit(X, y)


@dataclass(frozen=True)
class FoldRecord:
    train: np.ndarray
    test: np.ndarray
    sources: np.ndarray  # SMOTE provenance in original row indices, (n_train_out, 2)


@dataclass(frozen=True)
class ClassificationReport:
    labels: tuple
    precision: float
    recall: float
    f1: float
    accuracy: float
    per_class: dict
    confusion: np.ndarray
    n_folds: int
    averaging: str = "macro"
    folds: tuple[FoldRecord, ...] = field(default=(), repr=False, compare=False)


def stratified_folds(y, k: int, rng) -> np.ndarray:
    """Fold id per sample; each class is dealt round-robin after shuffling."""
    y = np.asarray(y)
    fold = np.empty(len(y), dtype=int)
    offset = 0
    for label in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == label))
        fold[members] = (offset + np.arange(len(members))) % k
        offset += len(members)
    return fold


def classification_metrics(y_true, y_pred, labels) -> tuple[dict, np.ndarray]:
    """Per-class precision/recall/F1/support and the confusion matrix.

    A class with no predictions (or no members) scores 0 for the undefined ratio.
    """
    pos = {c: i for i, c in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[pos[t], pos[p]] += 1
    tp = np.diag(cm).astype(float)
    pred = cm.sum(axis=0)
    support = cm.sum(axis=1)
    prec = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    rec = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = prec + rec
    f1 = np.divide(2 * prec * rec, denom, out=np.zeros_like(tp), where=denom > 0)
    per_class = {
        c: {"precision": prec[i], "recall": rec[i], "f1": f1[i], "support": int(support[i])}
        for i, c in enumerate(labels)
    }
    return per_class, cm


def kfold_eval(W, labels, k: int = 5, seed=0, k_neighbors: int = 5,
               epochs: int = 200, lr: float = 0.01, reg: float = 1e-3) -> ClassificationReport:
    """Stratified k-fold evaluation; SMOTE is fitted on each training split only."""
    if k < 2:
        raise ValueError("k must be >= 2")
    X = W.W if isinstance(W, EmbeddingMatrix) else np.asarray(W, dtype=np.float64)
    y = np.asarray(labels)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    classes, counts = np.unique(y, return_counts=True)
    rare = classes[counts < 2]
    if len(rare):
        logger.warning("excluding classes with fewer than 2 members: %s", rare.tolist())
    rows = np.flatnonzero(~np.isin(y, rare))
    X, y = X[rows], y[rows]
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("need at least two classes with 2+ members")
    small = classes[counts < k]
    if len(small):
        logger.warning("classes smaller than k=%d may be absent from some folds: %s", k, small.tolist())

    fold_ss, *stream = np.random.SeedSequence(seed).spawn(k + 1)
    fold = stratified_folds(y, k, np.random.default_rng(fold_ss))
    y_pred = np.empty_like(y)
    records = []
    for f in range(k):
        test = np.flatnonzero(fold == f)
        train = np.flatnonzero(fold != f)
        if len(test) == 0:
            continue
        smote_ss, clf_ss = stream[f].spawn(2)
        Xs, ys, src = smote(X[train], y[train], k_neighbors, np.random.default_rng(smote_ss),
                            return_sources=True, drop_singletons=False)
        if len(np.unique(ys)) < 2:
            raise ValueError(f"fold {f}: training split has a single class")
        clf = train_classifier(Xs, ys, epochs, lr, reg, np.random.default_rng(clf_ss))
        y_pred[test] = clf.predict(X[test])
        records.append(FoldRecord(rows[train], rows[test], rows[train][src]))

    per_class, cm = classification_metrics(y, y_pred, list(classes))
    return ClassificationReport(
        labels=tuple(classes.tolist()),
        precision=float(np.mean([v["precision"] for v in per_class.values()])),
        recall=float(np.mean([v["recall"] for v in per_class.values()])),
        f1=float(np.mean([v["f1"] for v in per_class.values()])),
        accuracy=float(np.trace(cm) / cm.sum()),
        per_class=per_class,
        confusion=cm,
        n_folds=k,
        folds=tuple(records),
    )


def write_report(report: ClassificationReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "precision", "recall", "f1", "support", "accuracy"])
        for label, m in report.per_class.items():
            w.writerow([label, format(m["precision"], ".17g"), format(m["recall"], ".17g"),
                        format(m["f1"], ".17g"), m["support"], ""])
        w.writerow([f"{report.averaging}_avg", format(report.precision, ".17g"),
                    format(report.recall, ".17g"), format(report.f1, ".17g"),
                    int(report.confusion.sum()), format(report.accuracy, ".17g")])
