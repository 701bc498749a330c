"""
Target:context training sets built from same-day return proximity.

For each asset on each day, its context is the C other assets whose returns
that day are closest in absolute difference. Optionally, sets whose target
return sits inside the day's interquartile range are discarded, and the
co-occurrence rates of context assets per target are used to weight the
hidden layer during training.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import ReturnsMatrix


@dataclass(frozen=True)
class ContextSet:
    target: int
    time: int
    context: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "context", tuple(int(j) for j in self.context))
        if self.target in self.context:
            raise ValueError(f"target {self.target} appears in its own context")
        if len(set(self.context)) != len(self.context):
            raise ValueError(f"duplicate context entries {self.context}")


@dataclass(frozen=True)
class CooccurrenceMatrix:
    beta: np.ndarray

    def __post_init__(self):
        b = np.array(self.beta, dtype=np.float64)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError(f"beta must be square, got shape {b.shape}")
        b.flags.writeable = False
        object.__setattr__(self, "beta", b)


def closest_contexts(returns_col, target: int, C: int) -> list[int]:
    """Indices of the C assets with returns closest to ``returns_col[target]``.

    Ordered by ascending absolute difference, ties by ascending index.
    """
    r = np.asarray(returns_col, dtype=np.float64)
    n = r.shape[0]
    if not 1 <= C < n:
        raise ValueError(f"context size C={C} must satisfy 1 <= C < {n}")
    d = np.abs(r - r[target])
    d[target] = np.inf
    kth = np.partition(d, C - 1)[C - 1]
    # everything at or below the C-th smallest gap, so ties at the boundary
    # are resolved by index rather than by partition order
    cand = np.flatnonzero(d <= kth)
    order = np.lexsort((cand, d[cand]))
    return cand[order][:C].tolist()


def iqr_retain(returns_col, target: int) -> bool:
    """True when the target's return lies strictly outside the day's [Q1, Q3]."""
    r = np.asarray(returns_col, dtype=np.float64)
    q1, q3 = np.percentile(r, [25, 75])
    x = r[target]
    return bool(x < q1 or x > q3)


def build_context_sets(r: ReturnsMatrix, C: int, apply_iqr: bool = False) -> list[ContextSet]:
    """All target:context sets, ordered by time then target index."""
    R = r.returns
    n, T = R.shape
    if not 1 <= C < n:
        raise ValueError(f"context size C={C} must satisfy 1 <= C < {n}")
    if apply_iqr and n < 4:
        raise ValueError("IQR filtering needs at least 4 assets")
    sets = []
    for t in range(T):
        col = R[:, t]
        if apply_iqr:
            q1, q3 = np.percentile(col, [25, 75])
            keep = (col < q1) | (col > q3)
        for i in range(n):
            if apply_iqr and not keep[i]:
                continue
            sets.append(ContextSet(i, t, tuple(closest_contexts(col, i, C))))
    return sets


def as_arrays(sets: list[ContextSet]) -> tuple[np.ndarray, np.ndarray]:
    """(targets, contexts) as integer arrays of shape (M,) and (M, C)."""
    if not sets:
        raise ValueError("no context sets")
    targets = np.array([s.target for s in sets], dtype=np.intp)
    contexts = np.array([s.context for s in sets], dtype=np.intp)
    return targets, contexts


def cooccurrence(sets: list[ContextSet], T: int, n_assets: int | None = None) -> CooccurrenceMatrix:
    """Rate at which each asset appears in each target's context, per time step."""
    if T < 1:
        raise ValueError("T must be positive")
    if n_assets is None:
        n_assets = 1 + max(max(s.target, *s.context) for s in sets) if sets else 0
    counts = np.zeros((n_assets, n_assets))
    if sets:
        targets, contexts = as_arrays(sets)
        np.add.at(counts, (np.repeat(targets, contexts.shape[1]), contexts.ravel()), 1.0)
    return CooccurrenceMatrix(counts / T)


def weights_for_set(beta: CooccurrenceMatrix, s: ContextSet) -> np.ndarray:
    """Hidden-layer weights proportional to the target's co-occurrence rates.

    Falls back to uniform 1/C when the rates are all equal (including all
    zero), which also keeps the weighted path bit-identical to plain averaging.
    """
    b = beta.beta[s.target, list(s.context)]
    C = len(s.context)
    if np.all(b == b[0]):
        return np.full(C, 1.0 / C)
    return b / b.sum()


def weights_array(beta: CooccurrenceMatrix, targets: np.ndarray, contexts: np.ndarray) -> np.ndarray:
    """Vectorised ``weights_for_set`` over many sets, shape (M, C)."""
    b = beta.beta[targets[:, None], contexts]
    C = contexts.shape[1]
    w = np.empty_like(b)
    flat = np.all(b == b[:, :1], axis=1)
    w[flat] = 1.0 / C
    w[~flat] = b[~flat] / b[~flat].sum(axis=1, keepdims=True)
    return w


def write_context_sets(sets: list[ContextSet], path) -> None:
    C = len(sets[0].context) if sets else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "target"] + [f"ctx{k + 1}" for k in range(C)])
        for s in sets:
            w.writerow([s.time, s.target, *s.context])


def read_context_sets(path) -> list[ContextSet]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["t", "target"]:
            raise ValueError(f"{path}: bad context-set header {header}")
        C = len(header) - 2
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != C + 2:
                raise ValueError(f"{path}:{lineno}: expected {C + 2} fields")
            t, i, *ctx = (int(x) for x in row)
            out.append(ContextSet(i, t, tuple(ctx)))
    return out
