"""Core data containers, standardization, and partition arithmetic.

All containers are immutable after construction (their arrays are marked
read-only), so they can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, ZeroVarianceColumn

GAUSSIAN = "gaussian"
BINOMIAL = "binomial"

_CENTER_TOL = 1e-10


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, order="C", copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DesignMatrix:
    """Covariate matrix, centered and scaled so every column has ||X_j||^2 = n."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.atleast_2d(self.values)))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ResponseMatrix:
    """Response matrix: centered reals (gaussian) or raw 0/1 entries (binomial)."""

    values: np.ndarray
    kind: str = GAUSSIAN

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, BINOMIAL):
            raise ValueError(f"unknown response kind {self.kind!r}")
        vals = _frozen(np.atleast_2d(self.values))
        if self.kind == BINOMIAL and not np.isin(vals, (0.0, 1.0)).all():
            raise ValueError("binomial responses must contain only 0/1 entries")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CoefficientMatrix:
    """One coefficient column per response; row 0 holds intercepts when flagged."""

    values: np.ndarray
    has_intercept_row: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.atleast_2d(self.values)))

    @property
    def r(self) -> int:
        return self.values.shape[1]

    def slopes(self) -> np.ndarray:
        """Coefficient rows with the intercept row (if any) dropped."""
        return self.values[1:] if self.has_intercept_row else self.values


@dataclass(frozen=True)
class ClusterPartition:
    """Assignment of each response to one of Q clusters, labels 1..Q."""

    assignments: np.ndarray
    Q: int = 0

    def __post_init__(self):
        a = np.array(self.assignments, dtype=np.int64, copy=True)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("assignments must be a non-empty vector")
        if a.min() < 1:
            raise IndexOutOfRange("cluster labels must be positive")
        n_distinct = np.unique(a).size
        if self.Q:
            q = int(self.Q)
            if a.max() > q:
                raise IndexOutOfRange(f"cluster labels must lie in 1..{q}")
            if n_distinct != q:
                raise ValueError(f"every cluster 1..{q} needs at least one member")
        elif n_distinct == a.max():
            q = int(a.max())
        else:
            # labels with gaps (e.g. [3, 3, 3]): compact by first appearance
            relabel: dict[int, int] = {}
            for i, lab in enumerate(a):
                a[i] = relabel.setdefault(int(lab), len(relabel) + 1)
            q = n_distinct
        object.__setattr__(self, "assignments", _frozen(a, dtype=np.int64))
        object.__setattr__(self, "Q", q)

    @property
    def r(self) -> int:
        return self.assignments.size

    def zero_based(self) -> np.ndarray:
        """Cluster index per response as 0-based labels (solver internals)."""
        return np.asarray(self.assignments) - 1

    def sizes(self) -> np.ndarray:
        """Member count per cluster, index q-1 for cluster q."""
        return np.bincount(self.zero_based(), minlength=self.Q)


def partition_members(D: ClusterPartition, q: int) -> frozenset:
    """Members of cluster q as 1-based response indices."""
    if not 1 <= q <= D.Q:
        raise IndexOutOfRange(f"cluster index {q} outside 1..{D.Q}")
    return frozenset(int(i) + 1 for i in np.flatnonzero(D.assignments == q))


def canonical_form(D: ClusterPartition) -> ClusterPartition:
    """Relabel clusters by order of first appearance.

    Two partitions of the same responses are equal as set partitions iff
    their canonical assignment vectors are equal, regardless of labels.
    """
    relabel: dict[int, int] = {}
    out = np.empty(D.r, dtype=np.int64)
    for i, lab in enumerate(np.asarray(D.assignments)):
        out[i] = relabel.setdefault(int(lab), len(relabel) + 1)
    return ClusterPartition(out, Q=len(relabel))


def partitions_equal(a: ClusterPartition, b: ClusterPartition) -> bool:
    return a.r == b.r and np.array_equal(
        canonical_form(a).assignments, canonical_form(b).assignments
    )


@dataclass(frozen=True)
class Standardizer:
    """Centering/scaling maps fitted on training data.

    ``transform`` and ``inverse_y`` compose to the identity, so predictions
    made on the standardized scale can always be reported on the original one.
    """

    x_center: np.ndarray
    x_scale: np.ndarray
    y_center: np.ndarray
    y_scale: np.ndarray

    def __post_init__(self):
        for name in ("x_center", "x_scale", "y_center", "y_scale"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def p(self) -> int:
        return self.x_center.size

    @property
    def r(self) -> int:
        return self.y_center.size

    def transform_x(self, X_raw: np.ndarray) -> np.ndarray:
        X_raw = np.atleast_2d(np.asarray(X_raw, dtype=np.float64))
        if X_raw.shape[1] != self.p:
            raise DimensionMismatch(
                f"expected {self.p} covariate columns, got {X_raw.shape[1]}"
            )
        return (X_raw - self.x_center) / self.x_scale

    def transform_y(self, Y_raw: np.ndarray) -> np.ndarray:
        Y_raw = np.atleast_2d(np.asarray(Y_raw, dtype=np.float64))
        if Y_raw.shape[1] != self.r:
            raise DimensionMismatch(
                f"expected {self.r} response columns, got {Y_raw.shape[1]}"
            )
        return (Y_raw - self.y_center) / self.y_scale

    def inverse_y(self, Y_std: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(Y_std, dtype=np.float64)) * self.y_scale + self.y_center


@dataclass(frozen=True)
class TuningTriple:
    """Hyperparameters of one fit: cluster count Q and penalty weights."""

    Q: int
    gamma: float
    delta: float

    def __post_init__(self):
        if self.Q < 1:
            raise ValueError("Q must be a positive integer")
        if self.gamma < 0 or self.delta < 0:
            raise ValueError("gamma and delta must be nonnegative")


def standardize(X_raw, Y_raw, kind: str = GAUSSIAN):
    """Center/scale training data.

    X columns are centered and scaled so that ||X_j||^2 = n exactly.  Gaussian
    responses are centered and scaled to unit (population) standard deviation;
    binomial responses are validated but left untouched.  A constant gaussian
    response column is left at zero after centering (scale 1).

    Returns (DesignMatrix, ResponseMatrix, Standardizer).
    """
    X_raw = np.atleast_2d(np.asarray(X_raw, dtype=np.float64))
    Y_raw = np.atleast_2d(np.asarray(Y_raw, dtype=np.float64))
    if X_raw.shape[0] != Y_raw.shape[0]:
        raise DimensionMismatch(
            f"X has {X_raw.shape[0]} rows but Y has {Y_raw.shape[0]}"
        )
    n = X_raw.shape[0]
    if n < 2:
        raise DimensionMismatch("need at least 2 samples to standardize")
    if not (np.isfinite(X_raw).all() and np.isfinite(Y_raw).all()):
        raise ValueError("inputs must be finite (no NaN/inf)")

    x_center = X_raw.mean(axis=0)
    Xc = X_raw - x_center
    x_scale = np.sqrt((Xc**2).mean(axis=0))
    for j in range(X_raw.shape[1]):
        if x_scale[j] <= 1e-13 * max(1.0, abs(x_center[j])):
            raise ZeroVarianceColumn(j)
    X = Xc / x_scale

    if kind == GAUSSIAN:
        y_center = Y_raw.mean(axis=0)
        Yc = Y_raw - y_center
        y_scale = np.sqrt((Yc**2).mean(axis=0))
        y_scale = np.where(y_scale > 1e-13, y_scale, 1.0)
        Y = Yc / y_scale
    else:
        y_center = np.zeros(Y_raw.shape[1])
        y_scale = np.ones(Y_raw.shape[1])
        Y = Y_raw

    return (
        DesignMatrix(X),
        ResponseMatrix(Y, kind=kind),
        Standardizer(x_center, x_scale, y_center, y_scale),
    )
