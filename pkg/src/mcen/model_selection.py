"""K-fold cross-validation over (Q, gamma, delta) grids for both likelihoods.

Gaussian cells accumulate held-out squared prediction error on the original
response scale (summed over folds, minimized); binomial cells accumulate the
held-out Bernoulli log-likelihood with clamped probabilities (maximized).
Standardization is recomputed inside each fold-complement so no cell ever
sees its held-out rows.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .binomial_irls import (
    BinomialSettings,
    DEFAULT_BINOMIAL_SETTINGS,
    _design_with_intercept,
    _fit_binomial_standardized,
    delta_max_binomial,
    logistic,
    LINPRED_CLAMP,
    PROB_CLAMP,
)
from .data_model import (
    BINOMIAL,
    GAUSSIAN,
    ClusterPartition,
    TuningTriple,
    standardize,
)
from .errors import InvalidK, McenError
from .gaussian_cd import delta_max, GramCache
from .mcen_gaussian import DEFAULT_MCEN_SETTINGS, McenSettings, _fit_standardized

SQUARED_ERROR_MIN = "squared_error_min"
LOGLIK_MAX = "loglik_max"


@dataclass(frozen=True)
class CvGrid:
    """Search grid; delta_values = None derives a shared descending path from
    the full training data."""

    Q_values: tuple = (1, 2, 3, 4)
    gamma_values: tuple = (0.0, 0.25, 0.5, 1.0, 2.0)
    delta_values: tuple | None = None
    K: int = 10
    seed: int = 0
    n_delta: int = 10

    def __post_init__(self):
        if self.K < 2:
            raise InvalidK("K must be >= 2")
        if not self.Q_values or not len(self.gamma_values):
            raise ValueError("grids must be non-empty")
        object.__setattr__(self, "Q_values", tuple(int(q) for q in self.Q_values))
        object.__setattr__(self, "gamma_values", tuple(float(g) for g in self.gamma_values))
        if self.delta_values is not None:
            object.__setattr__(
                self, "delta_values", tuple(float(d) for d in self.delta_values)
            )


@dataclass(frozen=True)
class CvCell:
    Q: int
    gamma: float
    delta: float
    fold: int
    criterion: float


@dataclass(frozen=True)
class CvResult:
    table: tuple
    best: TuningTriple
    criterion_kind: str
    errors: tuple = ()

    def summed(self) -> dict:
        """Fold-summed criterion per (Q, gamma, delta); NaN if any fold failed."""
        acc: dict[tuple, float] = {}
        for cell in self.table:
            key = (cell.Q, cell.gamma, cell.delta)
            acc[key] = acc.get(key, 0.0) + cell.criterion
        return acc


def kfold_split(n: int, K: int, seed: int) -> list[np.ndarray]:
    """Disjoint index sets covering range(n), sizes differing by at most 1."""
    if K < 2 or K > n:
        raise InvalidK(f"K={K} not usable for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, K)]


def _delta_path(X_raw, Y_raw, kind: str, grid: CvGrid) -> np.ndarray:
    if grid.delta_values is not None:
        return np.asarray(grid.delta_values, dtype=np.float64)
    X, Y, _ = standardize(X_raw, Y_raw, kind=kind)
    if kind == GAUSSIAN:
        top = delta_max(X, Y)
    else:
        top = delta_max_binomial(_design_with_intercept(X.values), Y)
    if top == 0.0:
        return np.zeros(1)
    ratio = 0.05 if X.p > X.n else 0.001
    return np.geomspace(top, ratio * top, grid.n_delta)


def _fit_fold_path_gaussian(
    X_raw,
    Y_raw,
    train_idx: np.ndarray,
    Q: int,
    gamma: float,
    deltas: np.ndarray,
    settings: McenSettings,
    fixed_partition: ClusterPartition | None,
):
    """Standardize the fold-complement and fit the warm-started delta path.

    Returns (standardizer, list of coefficient matrices, one per delta).
    Only rows listed in train_idx are ever read.
    """
    X_raw = np.asarray(X_raw, dtype=np.float64)
    Y_raw = np.asarray(Y_raw, dtype=np.float64)
    X, Y, std = standardize(X_raw[train_idx], Y_raw[train_idx], kind=GAUSSIAN)
    gram = GramCache.from_data(X, Y)
    coefs = []
    init_B = None
    init_D = fixed_partition
    for delta in deltas:
        triple = TuningTriple(Q=Q, gamma=gamma, delta=float(delta))
        if fixed_partition is not None:
            from .mcen_gaussian import _solve_flagged

            B, _ = _solve_flagged(
                X, Y, fixed_partition, gamma, float(delta), init_B, settings.solver, gram
            )
            init_B = B
        else:
            f = _fit_standardized(
                X, Y, std, triple, settings, init_B=init_B, init_D=init_D, gram=gram
            )
            B, init_B, init_D = f.B_hat, f.B_hat, f.D_hat
        coefs.append(B)
    return std, coefs


def _fit_fold_path_binomial(
    X_raw,
    Y_raw,
    train_idx: np.ndarray,
    Q: int,
    gamma: float,
    deltas: np.ndarray,
    settings: BinomialSettings,
    fixed_partition: ClusterPartition | None,
):
    X_raw = np.asarray(X_raw, dtype=np.float64)
    Y_raw = np.asarray(Y_raw, dtype=np.float64)
    X, Y, std = standardize(X_raw[train_idx], Y_raw[train_idx], kind=BINOMIAL)
    coefs = []
    init_T = None
    init_D = fixed_partition
    for delta in deltas:
        triple = TuningTriple(Q=Q, gamma=gamma, delta=float(delta))
        if fixed_partition is not None:
            from .binomial_irls import CoefficientMatrix, _design_with_intercept, _irls

            th, _, _ = _irls(
                _design_with_intercept(X.values), Y.values, fixed_partition,
                gamma, float(delta), 0.0,
                init_T, settings,
            )
            T = CoefficientMatrix(th, has_intercept_row=True)
            init_T = T
        else:
            f = _fit_binomial_standardized(
                X.values, Y, std, triple, settings, init_Theta=init_T, init_D=init_D
            )
            T, init_T, init_D = f.Theta_hat, f.Theta_hat, f.D_hat
        coefs.append(T)
    return std, coefs


def _bernoulli_loglik(Y_true: np.ndarray, P: np.ndarray) -> float:
    return float((Y_true * np.log(P) + (1.0 - Y_true) * np.log(1.0 - P)).sum())


def _pick_best(sums: dict, maximize: bool) -> TuningTriple:
    valid = {k: v for k, v in sums.items() if np.isfinite(v)}
    if not valid:
        raise McenError("every cross-validation cell failed")
    opt = max(valid.values()) if maximize else min(valid.values())
    ties = [k for k, v in valid.items() if v == opt]
    # parsimony: smallest Q, then largest delta, then smallest gamma
    ties.sort(key=lambda k: (k[0], -k[2], k[1]))
    Q, gamma, delta = ties[0]
    return TuningTriple(Q=Q, gamma=gamma, delta=delta)


def _run_cv(X_raw, Y_raw, grid, kind, settings, fixed_partition, threads):
    X_raw = np.asarray(X_raw, dtype=np.float64)
    Y_raw = np.asarray(Y_raw, dtype=np.float64)
    n = X_raw.shape[0]
    deltas = _delta_path(X_raw, Y_raw, kind, grid)
    folds = kfold_split(n, grid.K, grid.seed)
    q_values = (fixed_partition.Q,) if fixed_partition is not None else grid.Q_values

    tasks = [
        (qi, gi, fi)
        for qi in range(len(q_values))
        for gi in range(len(grid.gamma_values))
        for fi in range(len(folds))
    ]

    def run_task(task):
        qi, gi, fi = task
        Q = q_values[qi]
        gamma = grid.gamma_values[gi]
        test_idx = folds[fi]
        train_idx = np.setdiff1d(np.arange(n), test_idx)
        try:
            if kind == GAUSSIAN:
                std, coefs = _fit_fold_path_gaussian(
                    X_raw, Y_raw, train_idx, Q, gamma, deltas, settings, fixed_partition
                )
                Xs = std.transform_x(X_raw[test_idx])
                crits = []
                for B in coefs:
                    pred = std.inverse_y(Xs @ B.values)
                    crits.append(float(((Y_raw[test_idx] - pred) ** 2).sum()))
            else:
                std, coefs = _fit_fold_path_binomial(
                    X_raw, Y_raw, train_idx, Q, gamma, deltas, settings, fixed_partition
                )
                Us = _design_with_intercept(std.transform_x(X_raw[test_idx]))
                crits = []
                for T in coefs:
                    eta = np.clip(Us @ T.values, -LINPRED_CLAMP, LINPRED_CLAMP)
                    P = np.clip(logistic(eta), PROB_CLAMP, 1.0 - PROB_CLAMP)
                    crits.append(_bernoulli_loglik(Y_raw[test_idx], P))
            return task, crits, None
        except McenError as err:
            return task, [float("nan")] * len(deltas), f"{type(err).__name__}: {err}"

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_task, tasks))
    else:
        results = [run_task(t) for t in tasks]

    cells = []
    errors = []
    for (qi, gi, fi), crits, err in results:
        if err is not None:
            errors.append((q_values[qi], grid.gamma_values[gi], fi, err))
        for delta, crit in zip(deltas, crits):
            cells.append(
                CvCell(
                    Q=q_values[qi],
                    gamma=grid.gamma_values[gi],
                    delta=float(delta),
                    fold=fi,
                    criterion=crit,
                )
            )
    sums: dict[tuple, float] = {}
    for cell in cells:
        key = (cell.Q, cell.gamma, cell.delta)
        sums[key] = sums.get(key, 0.0) + cell.criterion
    best = _pick_best(sums, maximize=(kind == BINOMIAL))
    return CvResult(
        table=tuple(cells),
        best=best,
        criterion_kind=LOGLIK_MAX if kind == BINOMIAL else SQUARED_ERROR_MIN,
        errors=tuple(errors),
    )


def cv_gaussian(
    X_raw,
    Y_raw,
    grid: CvGrid,
    settings: McenSettings = DEFAULT_MCEN_SETTINGS,
    fixed_partition: ClusterPartition | None = None,
    threads: int = 1,
) -> CvResult:
    """Select (Q, gamma, delta) by K-fold squared prediction error.

    ``fixed_partition`` switches to tuning the known-partition estimator
    (Q fixed by the partition, no clustering step).
    """
    return _run_cv(X_raw, Y_raw, grid, GAUSSIAN, settings, fixed_partition, threads)


def cv_binomial(
    X_raw,
    Y_raw,
    grid: CvGrid,
    settings: BinomialSettings = DEFAULT_BINOMIAL_SETTINGS,
    fixed_partition: ClusterPartition | None = None,
    threads: int = 1,
) -> CvResult:
    """Select (Q, gamma, delta) by K-fold held-out Bernoulli log-likelihood."""
    return _run_cv(X_raw, Y_raw, grid, BINOMIAL, settings, fixed_partition, threads)
