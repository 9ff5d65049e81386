"""Cluster the r fitted-value vectors X b_1, ..., X b_r into Q groups.

The partition criterion is

    sum_q (1/|D_q|) sum_{l,m in D_q} ||X(b_l - b_m)||_2^2     (ordered pairs)

which equals twice the within-cluster sum of squares of the fitted vectors,
so Lloyd iterations on those vectors minimize it directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import ClusterPartition, CoefficientMatrix, DesignMatrix, canonical_form
from .errors import DegenerateInput


@dataclass(frozen=True)
class KMeansSettings:
    restarts: int = 20
    max_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1:
            raise ValueError("restarts and max_iters must be >= 1")


def partition_objective(X: DesignMatrix, B: CoefficientMatrix, D: ClusterPartition) -> float:
    """The pairwise fitted-value scatter of a partition (2x within-cluster SS)."""
    V = (X.values @ B.values).T
    return 2.0 * _wcss(V, D.zero_based(), D.Q)


def _wcss(V: np.ndarray, labels: np.ndarray, Q: int) -> float:
    total = 0.0
    for q in range(Q):
        pts = V[labels == q]
        if pts.shape[0]:
            total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def _centroids(V: np.ndarray, labels: np.ndarray, Q: int) -> np.ndarray:
    C = np.zeros((Q, V.shape[1]))
    for q in range(Q):
        pts = V[labels == q]
        if pts.shape[0]:
            C[q] = pts.mean(axis=0)
    return C


def _assign(V: np.ndarray, C: np.ndarray) -> np.ndarray:
    # argmin breaks ties toward the lowest cluster index
    d2 = ((V[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _repair_empty(V: np.ndarray, labels: np.ndarray, C: np.ndarray, Q: int) -> np.ndarray:
    labels = labels.copy()
    for q in range(Q):
        while not (labels == q).any():
            dist = ((V - C[labels]) ** 2).sum(axis=1)
            counts = np.bincount(labels, minlength=Q)
            movable = counts[labels] > 1
            dist = np.where(movable, dist, -1.0)
            far = int(dist.argmax())
            labels[far] = q
            C[q] = V[far]
    return labels


def _lloyd(V: np.ndarray, C: np.ndarray, Q: int, max_iters: int, history=None):
    labels = _repair_empty(V, _assign(V, C), C, Q)
    for _ in range(max_iters):
        C = _centroids(V, labels, Q)
        if history is not None:
            history.append(_wcss(V, labels, Q))
        new_labels = _repair_empty(V, _assign(V, C), C, Q)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, _wcss(V, labels, Q)


def _plus_plus_seeds(V: np.ndarray, Q: int, rng: np.random.Generator) -> np.ndarray:
    r = V.shape[0]
    chosen = [int(rng.integers(r))]
    d2 = ((V - V[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(Q - 1):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(r, p=d2 / total))
        else:
            remaining = [i for i in range(r) if i not in chosen]
            idx = remaining[0]
        chosen.append(idx)
        d2 = np.minimum(d2, ((V - V[idx]) ** 2).sum(axis=1))
    return V[chosen].copy()


def cluster_fitted(
    X: DesignMatrix,
    B: CoefficientMatrix,
    Q: int,
    settings: KMeansSettings = KMeansSettings(),
    previous: ClusterPartition | None = None,
) -> ClusterPartition:
    """Best-of-restarts k-means over the fitted-value vectors.

    When ``previous`` is supplied it is used both to seed an extra Lloyd run
    and as a standing candidate, so the returned partition's criterion never
    exceeds that of ``previous``.  If the fitted vectors have fewer than Q
    distinct values, the largest feasible cluster count is used instead (the
    returned partition's Q reports the reduction).
    """
    return cluster_vectors(X.values @ B.values, Q, settings, previous)


def cluster_vectors(
    columns: np.ndarray,
    Q: int,
    settings: KMeansSettings = KMeansSettings(),
    previous: ClusterPartition | None = None,
) -> ClusterPartition:
    """k-means over the columns of an n x r matrix (see ``cluster_fitted``)."""
    V = np.ascontiguousarray(np.asarray(columns, dtype=np.float64).T)
    r = V.shape[0]
    if Q < 1 or Q > r:
        raise DegenerateInput(f"Q={Q} not in 1..{r}")
    n_distinct = np.unique(V, axis=0).shape[0]
    Q_eff = min(Q, n_distinct)
    if Q_eff == 1:
        return ClusterPartition(np.ones(r, dtype=np.int64))
    if Q_eff == r:
        return ClusterPartition(np.arange(1, r + 1, dtype=np.int64))

    rng = np.random.default_rng(settings.seed)
    best_labels = None
    best_obj = np.inf
    for _ in range(settings.restarts):
        labels, obj = _lloyd(V, _plus_plus_seeds(V, Q_eff, rng), Q_eff, settings.max_iters)
        if obj < best_obj:
            best_obj, best_labels = obj, labels
    if previous is not None and previous.r == r:
        prev0 = previous.zero_based()
        if previous.Q == Q_eff:
            labels, obj = _lloyd(V, _centroids(V, prev0, Q_eff), Q_eff, settings.max_iters)
            if obj < best_obj:
                best_obj, best_labels = obj, labels
        prev_obj = _wcss(V, prev0, previous.Q)
        if prev_obj < best_obj:
            best_obj, best_labels = prev_obj, prev0
    return canonical_form(ClusterPartition(best_labels + 1))
