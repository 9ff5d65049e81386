"""Binomial (logistic) variant: reweighted least squares with proximal
coordinate descent, unpenalized intercepts, and the two-step alternation.

At fixed partition D the solver minimizes

    G(T) = 2 * sum_k sum_i [ log(1 + exp(u_i't_k)) - y_ik u_i't_k ]
         + delta * ||T_slopes||_1
         + (gamma/2n) sum_q (1/|D_q|) sum_{l,m in D_q} ||U(t_l - t_m)||_2^2,

whose quadratic model around the current probabilities is

    sum_k sum_i w_ik (z_ik - u_i't_k)^2  (+ the same penalties),

the factor two on the likelihood matching that model's scale.  Accepted
reweighting steps never increase G (step-halving enforces this), and row 0 of
T (the intercepts) is exempt from the L1 rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .data_model import (
    BINOMIAL,
    ClusterPartition,
    CoefficientMatrix,
    ResponseMatrix,
    Standardizer,
    TuningTriple,
    canonical_form,
    partitions_equal,
    standardize,
)
from .errors import DimensionMismatch, MaxSweepsExceeded, SeparationDetected
from .gaussian_cd import SolverSettings, soft_threshold
from .kmeans_fitted import KMeansSettings, cluster_vectors

PROB_CLAMP = 1e-5
WEIGHT_FLOOR = 1e-5
LINPRED_CLAMP = 30.0
MAX_HALVINGS = 10
# The probability/weight clamps bound the working responses, so separated
# fits normally settle at a finite clamped solution; the separation error
# only fires on a predictor that keeps growing past the clamp round after
# round (a true runaway).
SEPARATION_PATIENCE = 10


@dataclass(frozen=True)
class BinomialSettings:
    """Reweighting loop controls around the inner proximal solver."""

    inner: SolverSettings = field(default_factory=lambda: SolverSettings(tol=1e-8))
    outer_tol: float = 1e-7
    max_irls: int = 100
    kmeans: KMeansSettings = field(default_factory=KMeansSettings)
    outer_max: int = 50

    def with_seed(self, seed: int) -> "BinomialSettings":
        return replace(self, kmeans=replace(self.kmeans, seed=seed))


DEFAULT_BINOMIAL_SETTINGS = BinomialSettings()


@dataclass(frozen=True)
class WorkingSet:
    """Working responses Z, weights W and probabilities Pi at one expansion."""

    Z: np.ndarray
    W: np.ndarray
    Pi: np.ndarray


@dataclass(frozen=True)
class BinomialFit:
    Theta_hat: CoefficientMatrix
    D_hat: ClusterPartition
    nll_trace: tuple
    converged: bool
    standardizer: Standardizer
    triple: TuningTriple
    seed: int
    outer_iters: int = 1


def logistic(eta):
    """exp(eta)/(1 + exp(eta)) without overflow for any real eta."""
    eta = np.asarray(eta, dtype=np.float64)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    if out.ndim == 0:
        return float(out)
    return out


def working_quantities(y, pi):
    """IRLS linearization at probability pi: weight w = pi(1-pi) and
    working response z = logit(pi) + (y - pi)/w."""
    y = np.asarray(y, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    w = pi * (1.0 - pi)
    z = np.log(pi / (1.0 - pi)) + (y - pi) / w
    if z.ndim == 0:
        return float(z), float(w)
    return z, w


def _design_with_intercept(X_std: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X_std.shape[0], 1)), X_std])


def compute_working_set(U: np.ndarray, Theta: np.ndarray, Yv: np.ndarray) -> WorkingSet:
    eta = np.clip(U @ Theta, -LINPRED_CLAMP, LINPRED_CLAMP)
    Pi = np.clip(logistic(eta), PROB_CLAMP, 1.0 - PROB_CLAMP)
    W = np.maximum(Pi * (1.0 - Pi), WEIGHT_FLOOR)
    Z = np.log(Pi / (1.0 - Pi)) + (Yv - Pi) / W
    return WorkingSet(Z=Z, W=W, Pi=Pi)


def negative_log_likelihood(Theta, U: np.ndarray, Yv: np.ndarray) -> float:
    Tv = Theta.values if isinstance(Theta, CoefficientMatrix) else np.asarray(Theta)
    eta = U @ Tv
    return float((np.logaddexp(0.0, eta) - Yv * eta).sum())


def _fusion_value(V: np.ndarray, D: ClusterPartition) -> float:
    """sum_q (1/|D_q|) sum over ordered pairs of squared column differences,
    which telescopes to 2 * sum_q sum_{l in D_q} ||v_l - mean_q||^2."""
    assign0 = D.zero_based()
    total = 0.0
    for q in range(D.Q):
        Vq = V[:, assign0 == q]
        total += 2.0 * float(((Vq - Vq.mean(axis=1, keepdims=True)) ** 2).sum())
    return total


def binomial_objective(
    Theta,
    U: np.ndarray,
    Yv: np.ndarray,
    D: ClusterPartition,
    gamma: float,
    delta: float,
) -> float:
    """Penalized negative log-likelihood G minimized by the solver."""
    Tv = Theta.values if isinstance(Theta, CoefficientMatrix) else np.asarray(Theta)
    n = U.shape[0]
    val = 2.0 * negative_log_likelihood(Tv, U, Yv)
    val += delta * float(np.abs(Tv[1:]).sum())
    if gamma != 0.0:
        val += gamma / (2.0 * n) * _fusion_value(U @ Tv, D)
    return val


def quadratic_objective(
    Theta,
    U: np.ndarray,
    ws: WorkingSet,
    D: ClusterPartition,
    gamma: float,
    delta: float,
) -> float:
    """Weighted quadratic model plus penalties (what the inner sweeps minimize)."""
    Tv = Theta.values if isinstance(Theta, CoefficientMatrix) else np.asarray(Theta)
    n = U.shape[0]
    val = float((ws.W * (ws.Z - U @ Tv) ** 2).sum())
    val += delta * float(np.abs(Tv[1:]).sum())
    if gamma != 0.0:
        val += gamma / (2.0 * n) * _fusion_value(U @ Tv, D)
    return val


def proximal_cd_update(
    j: int,
    k: int,
    Theta,
    D: ClusterPartition,
    U: np.ndarray,
    W: np.ndarray,
    Z: np.ndarray,
    gamma: float,
    delta: float,
) -> float:
    """One exact proximal update for coefficient (j, k); j = 0 is the
    intercept and is never soft-thresholded."""
    Tv = Theta.values if isinstance(Theta, CoefficientMatrix) else np.asarray(Theta)
    n = U.shape[0]
    assign0 = D.zero_based()
    q = assign0[k]
    d = int(D.sizes()[q])
    fd = gamma * (d - 1.0) / (n * d)
    fc = gamma / (n * d)
    Rt = U.T @ U
    Uj = U[:, j]
    wk = W[:, k]
    cross_loss = 0.0
    for c in range(U.shape[1]):
        if c != j:
            cross_loss += float(Uj @ (wk * U[:, c])) * Tv[c, k]
    fus_self = fd * (float(Rt[j] @ Tv[:, k]) - Rt[j, j] * Tv[j, k])
    fus_cross = 0.0
    for s in np.flatnonzero(assign0 == q):
        if s != k:
            fus_cross += float(Rt[j] @ Tv[:, s])
    num = float((wk * Z[:, k]) @ Uj) - cross_loss - fus_self + fc * fus_cross
    den = Rt[j, j] * fd + float(Uj @ (wk * Uj))
    if j == 0:
        return num / den
    return float(soft_threshold(num, delta / 2.0)) / den


def _inner_solve(U, Ut, U2, Rt, ws, Theta, assign0, csize, order, gamma, delta, ridge, inner):
    """Run proximal sweeps on the current quadratic model; returns new Theta."""
    n = U.shape[0]
    W_t = np.ascontiguousarray(ws.W.T)
    Th_t = np.ascontiguousarray(Theta.T)
    E_t = np.ascontiguousarray(ws.Z.T - Th_t @ Ut)
    AW_t = np.ascontiguousarray(W_t @ U2)
    G_t = np.ascontiguousarray(Th_t @ Rt)
    Q = int(csize.size)
    CS_t = np.zeros((Q, U.shape[1]))
    for q in range(Q):
        CS_t[q] = G_t[assign0 == q].sum(axis=0)
    sweeps, converged = _backend.binomial_sweeps(
        Ut, W_t, E_t, AW_t, Rt, Th_t, G_t, CS_t, assign0, csize, order,
        float(gamma) / n, float(delta) / 2.0, float(ridge),
        inner.tol, inner.max_sweeps, inner.active_set,
    )
    return np.ascontiguousarray(Th_t.T), converged


def _null_intercepts(Yv: np.ndarray) -> np.ndarray:
    pbar = np.clip(Yv.mean(axis=0), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return np.log(pbar / (1.0 - pbar))


def _irls(U, Yv, D, gamma, delta, ridge, init, settings: BinomialSettings):
    """Shared reweighting loop; returns (Theta, accepted-objective trace, converged).

    ``ridge`` adds a per-slope quadratic penalty (used by the separate
    per-response starts); the fusion penalty uses ``gamma`` and D.
    """
    n, P = U.shape
    r = Yv.shape[1]
    assign0 = np.ascontiguousarray(D.zero_based(), dtype=np.int64)
    csize = np.ascontiguousarray(D.sizes(), dtype=np.int64)
    order = np.ascontiguousarray(np.argsort(assign0, kind="stable"), dtype=np.int64)
    Ut = np.ascontiguousarray(U.T)
    U2 = np.ascontiguousarray(U * U)
    Rt = np.ascontiguousarray(U.T @ U)

    if init is None:
        Theta = np.zeros((P, r))
        Theta[0] = _null_intercepts(Yv)
    else:
        Theta = np.array(init.values if isinstance(init, CoefficientMatrix) else init,
                         dtype=np.float64)

    def objective(T):
        val = binomial_objective(T, U, Yv, D, gamma, delta)
        if ridge != 0.0:
            val += ridge * float((T[1:] ** 2).sum())
        return val

    cur_obj = objective(Theta)
    trace = [cur_obj]
    converged = False
    clamp_strikes = 0
    prev_max_eta = 0.0
    for _ in range(settings.max_irls):
        eta = U @ Theta
        max_eta = float(np.abs(eta).max())
        # a predictor that sits past the clamp AND keeps growing is diverging;
        # one that merely saturates is handled by the probability clamps
        if max_eta > LINPRED_CLAMP and max_eta > 1.01 * prev_max_eta:
            clamp_strikes += 1
            if clamp_strikes >= SEPARATION_PATIENCE:
                err = SeparationDetected(
                    "linear predictor exceeded its clamp and kept growing for "
                    f"{clamp_strikes} consecutive reweighting rounds"
                )
                err.coefficients = Theta
                raise err
        else:
            clamp_strikes = 0
        prev_max_eta = max_eta
        ws = compute_working_set(U, Theta, Yv)
        cand, _ = _inner_solve(
            U, Ut, U2, Rt, ws, Theta, assign0, csize, order,
            gamma, delta, ridge, settings.inner,
        )
        step = cand - Theta
        accepted = None
        for h in range(MAX_HALVINGS + 1):
            trial = Theta + step * (0.5**h)
            trial_obj = objective(trial)
            if trial_obj <= cur_obj + 1e-12 * max(1.0, abs(cur_obj)):
                accepted = (trial, trial_obj)
                break
        if accepted is None:
            return Theta, trace, False
        new_theta, new_obj = accepted
        max_change = float(np.abs(new_theta - Theta).max())
        Theta = new_theta
        cur_obj = new_obj
        trace.append(cur_obj)
        if max_change < settings.outer_tol:
            converged = True
            break
    return Theta, trace, converged


def _check_binomial_inputs(U: np.ndarray, Y: ResponseMatrix):
    if U.shape[0] != Y.n:
        raise DimensionMismatch(f"U has {U.shape[0]} rows but Y has {Y.n}")
    if Y.kind != BINOMIAL:
        raise ValueError("responses must be binomial 0/1")
    if not np.allclose(U[:, 0], 1.0):
        raise ValueError("first column of U must be the intercept column of ones")


def solve_fixed_groups_binomial(
    U: np.ndarray,
    Y: ResponseMatrix,
    D: ClusterPartition,
    gamma: float,
    delta: float,
    init: CoefficientMatrix | None = None,
    settings: BinomialSettings = DEFAULT_BINOMIAL_SETTINGS,
) -> CoefficientMatrix:
    """Minimize G at a fixed partition; raises MaxSweepsExceeded (with the
    last iterate attached) when the reweighting cap is hit first."""
    _check_binomial_inputs(U, Y)
    Theta, _, converged = _irls(U, Y.values, D, gamma, delta, 0.0, init, settings)
    if not converged:
        raise MaxSweepsExceeded(Theta, settings.max_irls)
    return CoefficientMatrix(Theta, has_intercept_row=True)


def sen_glm_init(
    U: np.ndarray,
    Y: ResponseMatrix,
    gamma: float,
    delta: float,
    settings: BinomialSettings = DEFAULT_BINOMIAL_SETTINGS,
) -> CoefficientMatrix:
    """Per-response elastic-net logistic starts: column k minimizes the
    quadratic-model objective with slope penalties delta*L1 + gamma*L2 and an
    unpenalized intercept."""
    _check_binomial_inputs(U, Y)
    singletons = ClusterPartition(np.arange(1, Y.r + 1, dtype=np.int64))
    Theta, _, converged = _irls(U, Y.values, singletons, 0.0, delta, gamma, None, settings)
    if not converged:
        raise MaxSweepsExceeded(Theta, settings.max_irls)
    return CoefficientMatrix(Theta, has_intercept_row=True)


def delta_max_binomial(U: np.ndarray, Y: ResponseMatrix) -> float:
    """Smallest delta at which all slopes are zero for gamma = 0 (intercepts
    at the per-response mean logits)."""
    resid = Y.values - Y.values.mean(axis=0)
    return float(2.0 * np.abs(U[:, 1:].T @ resid).max())


def fit_binomial(
    X_raw,
    Y,
    triple: TuningTriple,
    settings: BinomialSettings = DEFAULT_BINOMIAL_SETTINGS,
) -> BinomialFit:
    """Two-step binomial estimator: k-means on linear-predictor vectors
    alternated with fixed-partition reweighted solves."""
    if isinstance(Y, ResponseMatrix):
        Y_raw = Y.values
    else:
        Y_raw = np.asarray(Y, dtype=np.float64)
    X, Yb, std = standardize(X_raw, Y_raw, kind=BINOMIAL)
    return _fit_binomial_standardized(X.values, Yb, std, triple, settings)


def _fit_binomial_standardized(
    X_std: np.ndarray,
    Yb: ResponseMatrix,
    std: Standardizer,
    triple: TuningTriple,
    settings: BinomialSettings = DEFAULT_BINOMIAL_SETTINGS,
    init_Theta: CoefficientMatrix | None = None,
    init_D: ClusterPartition | None = None,
) -> BinomialFit:
    """Core alternation on standardized covariates (shared with CV paths)."""
    U = _design_with_intercept(X_std)
    seed = settings.kmeans.seed

    init_ok = True
    if init_Theta is None:
        try:
            Theta = sen_glm_init(U, Yb, triple.gamma, triple.delta, settings)
        except MaxSweepsExceeded as err:
            Theta = CoefficientMatrix(err.coefficients, has_intercept_row=True)
            init_ok = False
    else:
        Theta = init_Theta
    trace: list[float] = []
    converged = False
    solver_ok = init_ok
    D_prev: ClusterPartition | None = init_D
    solved_prev: ClusterPartition | None = None
    D = init_D
    seen: set[tuple] = set()
    best = None
    outer = 0
    for outer in range(1, settings.outer_max + 1):
        # step 2(a): cluster the r linear-predictor vectors U t_k
        D = cluster_vectors(U @ Theta.values, triple.Q, settings.kmeans, previous=D_prev)
        if solved_prev is not None and partitions_equal(D, solved_prev):
            D = solved_prev
            converged = True
            break
        th_arr, seg_trace, ok = _irls(
            U, Yb.values, D, triple.gamma, triple.delta, 0.0, Theta, settings
        )
        Theta = CoefficientMatrix(th_arr, has_intercept_row=True)
        solver_ok = solver_ok and ok
        trace.extend(seg_trace)
        obj = seg_trace[-1]
        if best is None or obj <= best[0]:
            best = (obj, Theta, D)
        key = tuple(canonical_form(D).assignments.tolist())
        if key in seen:
            _, Theta, D = best
            break
        seen.add(key)
        D_prev = D
        solved_prev = D

    return BinomialFit(
        Theta_hat=Theta,
        D_hat=canonical_form(D),
        nll_trace=tuple(trace),
        converged=converged and solver_ok,
        standardizer=std,
        triple=triple,
        seed=seed,
        outer_iters=outer,
    )


def predict_proba(fit_result: BinomialFit, X_new) -> np.ndarray:
    """Predicted probabilities (clamped into [1e-5, 1 - 1e-5]) for raw rows."""
    Xs = fit_result.standardizer.transform_x(X_new)
    U = _design_with_intercept(Xs)
    eta = np.clip(U @ fit_result.Theta_hat.values, -LINPRED_CLAMP, LINPRED_CLAMP)
    return np.clip(logistic(eta), PROB_CLAMP, 1.0 - PROB_CLAMP)
