"""Two-step gaussian estimator: alternate k-means on fitted values with
fixed-partition coordinate descent until the partition stabilizes.

Each response is initialized by an independent elastic net; the quoted
objective values in ``objective_trace`` are on the standardized scale
(predictions are mapped back to the original scale by ``predict``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data_model import (
    GAUSSIAN,
    ClusterPartition,
    CoefficientMatrix,
    DesignMatrix,
    ResponseMatrix,
    Standardizer,
    TuningTriple,
    canonical_form,
    partitions_equal,
    standardize,
)
from .errors import MaxSweepsExceeded
from .gaussian_cd import (
    DEFAULT_SETTINGS,
    GramCache,
    SolverSettings,
    default_delta_grid,
    objective_fixed_groups,
    solve_elastic_net,
    solve_fixed_groups,
)
from .kmeans_fitted import KMeansSettings, cluster_fitted

OUTER_MAX = 50


@dataclass(frozen=True)
class McenSettings:
    """Controls for one two-step fit: inner solver, k-means, outer cap."""

    solver: SolverSettings = DEFAULT_SETTINGS
    kmeans: KMeansSettings = field(default_factory=KMeansSettings)
    outer_max: int = OUTER_MAX

    def with_seed(self, seed: int) -> "McenSettings":
        return replace(self, kmeans=replace(self.kmeans, seed=seed))


DEFAULT_MCEN_SETTINGS = McenSettings()


@dataclass(frozen=True)
class McenFit:
    """Result of one gaussian fit."""

    B_hat: CoefficientMatrix
    D_hat: ClusterPartition
    objective_trace: tuple
    outer_iters: int
    converged: bool
    standardizer: Standardizer
    triple: TuningTriple
    seed: int
    all_zero_init: bool = False

    @property
    def q_reduced(self) -> bool:
        return self.D_hat.Q < self.triple.Q


def sen_init(
    X: DesignMatrix,
    Y: ResponseMatrix,
    gamma: float,
    delta: float,
    settings: SolverSettings = DEFAULT_SETTINGS,
    gram: GramCache | None = None,
) -> CoefficientMatrix:
    """Separate elastic-net start: column c minimizes
    (1/2n)||y_c - Xb||^2 + delta*||b||_1 + gamma*||b||_2^2."""
    return solve_elastic_net(X, Y, gamma, delta, settings=settings, gram=gram)


def _solve_flagged(X, Y, D, gamma, delta, init, settings, gram):
    try:
        return solve_fixed_groups(X, Y, D, gamma, delta, init, settings, gram), True
    except MaxSweepsExceeded as err:
        return CoefficientMatrix(err.coefficients), False


def _fit_standardized(
    X: DesignMatrix,
    Y: ResponseMatrix,
    std: Standardizer,
    triple: TuningTriple,
    settings: McenSettings = DEFAULT_MCEN_SETTINGS,
    init_B: CoefficientMatrix | None = None,
    init_D: ClusterPartition | None = None,
    gram: GramCache | None = None,
) -> McenFit:
    """Core alternation on already-standardized data (shared with CV paths)."""
    if gram is None:
        gram = GramCache.from_data(X, Y)
    seed = settings.kmeans.seed
    r = Y.r

    init_ok = True
    if init_B is None:
        try:
            B = sen_init(X, Y, triple.gamma, triple.delta, settings.solver, gram)
        except MaxSweepsExceeded as err:
            B = CoefficientMatrix(err.coefficients)
            init_ok = False
        if not B.values.any():
            D1 = ClusterPartition(np.ones(r, dtype=np.int64))
            return McenFit(
                B_hat=B,
                D_hat=D1,
                objective_trace=(
                    objective_fixed_groups(B, X, Y, D1, triple.gamma, triple.delta),
                ),
                outer_iters=1,
                converged=True,
                standardizer=std,
                triple=triple,
                seed=seed,
                all_zero_init=True,
            )
    else:
        B = init_B

    trace: list[float] = []
    solver_ok = init_ok
    converged = False
    D_prev = init_D  # k-means candidate only; may come from a different delta
    solved_prev: ClusterPartition | None = None
    D = D_prev
    seen: set[tuple] = set()
    best: tuple[float, CoefficientMatrix, ClusterPartition] | None = None
    outer = 0
    for outer in range(1, settings.outer_max + 1):
        D = cluster_fitted(X, B, triple.Q, settings.kmeans, previous=D_prev)
        if solved_prev is not None and partitions_equal(D, solved_prev):
            D = solved_prev
            converged = True
            break
        trace.append(objective_fixed_groups(B, X, Y, D, triple.gamma, triple.delta))
        B, ok = _solve_flagged(X, Y, D, triple.gamma, triple.delta, B, settings.solver, gram)
        solver_ok = solver_ok and ok
        obj = objective_fixed_groups(B, X, Y, D, triple.gamma, triple.delta)
        trace.append(obj)
        if best is None or obj <= best[0]:
            best = (obj, B, D)
        key = tuple(canonical_form(D).assignments.tolist())
        if key in seen:
            # revisited an earlier partition without stabilizing: cycle
            _, B, D = best
            break
        seen.add(key)
        D_prev = D
        solved_prev = D

    return McenFit(
        B_hat=B,
        D_hat=canonical_form(D),
        objective_trace=tuple(trace),
        outer_iters=outer,
        converged=converged and solver_ok,
        standardizer=std,
        triple=triple,
        seed=seed,
    )


def fit(
    X_raw,
    Y_raw,
    triple: TuningTriple,
    settings: McenSettings = DEFAULT_MCEN_SETTINGS,
) -> McenFit:
    """Standardize raw data and run the two-step estimator."""
    X, Y, std = standardize(X_raw, Y_raw, kind=GAUSSIAN)
    return _fit_standardized(X, Y, std, triple, settings)


def predict(fit_result: McenFit, X_new) -> np.ndarray:
    """Predictions on the original response scale for raw covariate rows."""
    Xs = fit_result.standardizer.transform_x(X_new)
    return fit_result.standardizer.inverse_y(Xs @ fit_result.B_hat.values)


def fit_path(
    X_raw,
    Y_raw,
    Q: int,
    gamma: float,
    delta_grid=None,
    settings: McenSettings = DEFAULT_MCEN_SETTINGS,
) -> list[McenFit]:
    """Warm-started fits along a descending delta path.

    When no grid is given, the default geometric path starting at delta_max
    is used.
    """
    X, Y, std = standardize(X_raw, Y_raw, kind=GAUSSIAN)
    gram = GramCache.from_data(X, Y)
    if delta_grid is None:
        delta_grid = default_delta_grid(X, Y)
    delta_grid = np.asarray(delta_grid, dtype=np.float64)
    if delta_grid.size > 1 and not (np.diff(delta_grid) < 0).all():
        raise ValueError("delta_grid must be strictly descending")
    fits: list[McenFit] = []
    init_B = None
    init_D = None
    for delta in delta_grid:
        triple = TuningTriple(Q=Q, gamma=gamma, delta=float(delta))
        f = _fit_standardized(X, Y, std, triple, settings, init_B=init_B, init_D=init_D, gram=gram)
        fits.append(f)
        init_B, init_D = f.B_hat, f.D_hat
    return fits


