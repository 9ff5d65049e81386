"""Fixed-partition gaussian solver: coordinate descent plus closed-form oracles.

The solver minimizes, over the p x r coefficient matrix B and for a fixed
partition D of the responses,

    F(B) = (1/2n) ||Y - XB||_F^2  +  (delta/2) ||B||_1
         + (gamma/2n) sum_q (1/|D_q|) sum_{l,m in D_q} ||X(b_l - b_m)||_2^2,

where the inner sum runs over ordered pairs.  ``delta_max`` and the
``kkt_residual`` certificate refer to this same function, and its delta = 0
minimizer has the closed form implemented by ``closed_form_delta0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .data_model import ClusterPartition, CoefficientMatrix, DesignMatrix, ResponseMatrix
from .errors import MaxSweepsExceeded, SingularGram


@dataclass(frozen=True)
class SolverSettings:
    """Coordinate-descent controls.

    tol is the max absolute coefficient change per full sweep below which the
    solve stops; active_set alternates converged active-set sweeps with full
    violation-checking sweeps.
    """

    tol: float = 1e-7
    max_sweeps: int = 10_000
    active_set: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class GramCache:
    """R = X'X/n and X'Y/n, shared read-only by all per-cluster solves."""

    R: np.ndarray
    XtY: np.ndarray
    n: int

    @classmethod
    def from_data(cls, X: DesignMatrix, Y: ResponseMatrix) -> "GramCache":
        Xv = X.values
        R = np.ascontiguousarray(Xv.T @ Xv / X.n)
        XtY = np.ascontiguousarray(Xv.T @ Y.values / X.n)
        return cls(R=R, XtY=XtY, n=X.n)


def soft_threshold(a, b):
    """sign(a) * max(0, |a| - b); exactly zero on the tie |a| = b."""
    return np.sign(a) * np.maximum(np.abs(a) - b, 0.0)


def _cluster_arrays(D: ClusterPartition):
    assign0 = np.ascontiguousarray(D.zero_based(), dtype=np.int64)
    csize = np.ascontiguousarray(D.sizes(), dtype=np.int64)
    order = np.ascontiguousarray(np.argsort(assign0, kind="stable"), dtype=np.int64)
    return assign0, csize, order


def _run_gaussian(
    R: np.ndarray,
    XtY: np.ndarray,
    B0: np.ndarray,
    assign0: np.ndarray,
    csize: np.ndarray,
    order: np.ndarray,
    *,
    gamma2: float,
    l1: float,
    ridge2: float = 0.0,
    tol: float = DEFAULT_SETTINGS.tol,
    max_sweeps: int = DEFAULT_SETTINGS.max_sweeps,
    active_set: bool = True,
):
    """Array-level driver shared by the fixed-group and elastic-net solves."""
    Q = int(csize.size)
    p = R.shape[0]
    B_t = np.ascontiguousarray(B0.T, dtype=np.float64)
    XtY_t = np.ascontiguousarray(XtY.T, dtype=np.float64)
    G_t = np.ascontiguousarray(B_t @ R)
    CS_t = np.zeros((Q, p))
    for q in range(Q):
        CS_t[q] = G_t[assign0 == q].sum(axis=0)
    sweeps, converged = _backend.gaussian_sweeps(
        R, XtY_t, B_t, G_t, CS_t, assign0, csize, order,
        float(gamma2), float(l1), float(ridge2), float(tol), int(max_sweeps),
        bool(active_set),
    )
    return np.ascontiguousarray(B_t.T), sweeps, converged


def cd_update(
    j: int,
    k: int,
    B: CoefficientMatrix,
    D: ClusterPartition,
    gram: GramCache,
    gamma: float,
    delta: float,
) -> float:
    """One exact coordinate update for entry (j, k), current B held fixed.

    The (gamma, delta) arguments here follow the update-rule parametrization:
    the value returned minimizes the coordinate restriction of the objective
    with fusion weight gamma/2 and L1 weight delta/2.  ``solve_fixed_groups``
    therefore sweeps this update with gamma doubled to minimize F as written
    in the module docstring.
    """
    Bv = B.values
    assign0 = D.zero_based()
    q = assign0[k]
    d = int(D.sizes()[q])
    a = gamma * (d - 1.0) / d
    c = gamma / d
    Rj = gram.R[j]
    rjj = Rj[j]
    g_jk = float(Rj @ Bv[:, k])
    cross = 0.0
    for s in np.flatnonzero(assign0 == q):
        if s != k:
            cross += float(Rj @ Bv[:, s])
    num = gram.XtY[j, k] - (1.0 + a) * (g_jk - rjj * Bv[j, k]) + c * cross
    return float(soft_threshold(num, delta / 2.0) / (rjj * (1.0 + a)))


def solve_fixed_groups(
    X: DesignMatrix,
    Y: ResponseMatrix,
    D: ClusterPartition,
    gamma: float,
    delta: float,
    init: CoefficientMatrix | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
    gram: GramCache | None = None,
) -> CoefficientMatrix:
    """Minimize F(B) at the given partition by coordinate descent.

    The problem separates across clusters, so the result does not depend on
    the order clusters are processed in.  Raises MaxSweepsExceeded (carrying
    the last iterate) if the sweep cap is hit first.
    """
    if gram is None:
        gram = GramCache.from_data(X, Y)
    B0 = np.zeros((X.p, Y.r)) if init is None else np.array(init.values, dtype=np.float64)
    assign0, csize, order = _cluster_arrays(D)
    B, sweeps, converged = _run_gaussian(
        gram.R, gram.XtY, B0, assign0, csize, order,
        gamma2=2.0 * gamma, l1=delta / 2.0,
        tol=settings.tol, max_sweeps=settings.max_sweeps,
        active_set=settings.active_set,
    )
    if not converged:
        raise MaxSweepsExceeded(B, sweeps)
    return CoefficientMatrix(B)


def solve_elastic_net(
    X: DesignMatrix,
    Y: ResponseMatrix,
    gamma: float,
    delta: float,
    init: CoefficientMatrix | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
    gram: GramCache | None = None,
) -> CoefficientMatrix:
    """Independent per-response elastic nets:

    column c minimizes (1/2n)||y_c - Xb||^2 + delta*||b||_1 + gamma*||b||_2^2.
    """
    if gram is None:
        gram = GramCache.from_data(X, Y)
    r = Y.r
    B0 = np.zeros((X.p, r)) if init is None else np.array(init.values, dtype=np.float64)
    assign0 = np.arange(r, dtype=np.int64)
    csize = np.ones(r, dtype=np.int64)
    order = np.arange(r, dtype=np.int64)
    B, sweeps, converged = _run_gaussian(
        gram.R, gram.XtY, B0, assign0, csize, order,
        gamma2=0.0, l1=delta, ridge2=2.0 * gamma,
        tol=settings.tol, max_sweeps=settings.max_sweeps,
        active_set=settings.active_set,
    )
    if not converged:
        raise MaxSweepsExceeded(B, sweeps)
    return CoefficientMatrix(B)


def objective_fixed_groups(
    B,
    X: DesignMatrix,
    Y: ResponseMatrix,
    D: ClusterPartition,
    gamma: float,
    delta: float,
) -> float:
    """Evaluate F(B) (standardized scale)."""
    Bv = B.values if isinstance(B, CoefficientMatrix) else np.asarray(B)
    n = X.n
    V = X.values @ Bv
    loss = float(((Y.values - V) ** 2).sum()) / (2.0 * n)
    l1 = 0.5 * delta * float(np.abs(Bv).sum())
    fused = 0.0
    assign0 = D.zero_based()
    for q in range(D.Q):
        Vq = V[:, assign0 == q]
        fused += float(((Vq - Vq.mean(axis=1, keepdims=True)) ** 2).sum())
    return loss + l1 + gamma / n * fused


def _smooth_gradient(Bv, gram: GramCache, D: ClusterPartition, gamma: float) -> np.ndarray:
    G = gram.R @ Bv - gram.XtY
    if gamma != 0.0:
        assign0 = D.zero_based()
        centered = Bv.copy()
        for q in range(D.Q):
            members = assign0 == q
            centered[:, members] -= Bv[:, members].mean(axis=1, keepdims=True)
        G = G + 2.0 * gamma * (gram.R @ centered)
    return G


def kkt_residual(
    B,
    X: DesignMatrix,
    Y: ResponseMatrix,
    D: ClusterPartition,
    gamma: float,
    delta: float,
    gram: GramCache | None = None,
) -> float:
    """Max subgradient violation of F at B (0 iff B is exactly optimal).

    Nonzero entries contribute |grad + (delta/2) sign(b)|; zero entries
    contribute the excess of |grad| over delta/2.
    """
    if gram is None:
        gram = GramCache.from_data(X, Y)
    Bv = B.values if isinstance(B, CoefficientMatrix) else np.asarray(B)
    G = _smooth_gradient(Bv, gram, D, gamma)
    thr = delta / 2.0
    nonzero = Bv != 0.0
    res = np.where(
        nonzero,
        np.abs(G + thr * np.sign(Bv)),
        np.maximum(np.abs(G) - thr, 0.0),
    )
    return float(res.max()) if res.size else 0.0


def _ols_columns(X: DesignMatrix, Y: ResponseMatrix) -> np.ndarray:
    XtX = X.values.T @ X.values
    if X.n <= X.p:
        raise SingularGram(f"need n > p for least squares (n={X.n}, p={X.p})")
    try:
        np.linalg.cholesky(XtX)
    except np.linalg.LinAlgError as err:
        raise SingularGram("X'X is not positive definite") from err
    return np.linalg.solve(XtX, X.values.T @ Y.values)


def _cluster_blend(Bv: np.ndarray, D: ClusterPartition, gamma: float) -> np.ndarray:
    """Shrink each column toward its cluster mean by the factor 2g/(1+2g)."""
    out = np.array(Bv, dtype=np.float64)
    assign0 = D.zero_based()
    w = 2.0 * gamma / (1.0 + 2.0 * gamma)
    for q in range(D.Q):
        members = assign0 == q
        mean_q = out[:, members].mean(axis=1, keepdims=True)
        out[:, members] += w * (mean_q - out[:, members])
    return out


def closed_form_delta0(
    X: DesignMatrix,
    Y: ResponseMatrix,
    D: ClusterPartition,
    gamma: float,
) -> CoefficientMatrix:
    """Exact delta = 0 solution: per-response OLS blended toward cluster means.

    For l in D_q:  b_l = ols_l + (2 gamma / ((1 + 2 gamma) |D_q|))
                          * sum_{c in D_q, c != l} (ols_c - ols_l).
    Requires n > p and an invertible X'X (SingularGram otherwise).
    """
    ols = _ols_columns(X, Y)
    return CoefficientMatrix(_cluster_blend(ols, D, gamma))


def population_target(
    B_star: CoefficientMatrix,
    D: ClusterPartition,
    gamma: float,
) -> CoefficientMatrix:
    """Large-sample limit of the delta = 0 estimator: the same cluster blend
    applied to the true coefficients."""
    return CoefficientMatrix(_cluster_blend(B_star.values, D, gamma))


def delta_max(X: DesignMatrix, Y: ResponseMatrix) -> float:
    """Smallest delta at which B = 0 solves F for gamma = 0:

    2 * max_{j,k} |sum_i y_ik x_ij / n|.
    """
    return float(2.0 * np.abs(X.values.T @ Y.values).max() / X.n)


def default_delta_grid(
    X: DesignMatrix,
    Y: ResponseMatrix,
    n_points: int = 100,
) -> np.ndarray:
    """Descending geometric path from delta_max down to ratio * delta_max.

    The floor ratio is 0.001 (0.05 when p > n, where the unpenalized problem
    is ill-posed).
    """
    top = delta_max(X, Y)
    if top == 0.0:
        return np.zeros(1)
    ratio = 0.05 if X.p > X.n else 0.001
    return np.geomspace(top, ratio * top, n_points)
