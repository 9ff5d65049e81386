"""Independent reference implementations used as test oracles.

Everything here is deliberately written against the plain textbook form of
each quantity (explicit loops, proximal gradient instead of coordinate
descent) so it shares no code path with the package internals it checks.
"""

from __future__ import annotations

import numpy as np

from mcen.data_model import ClusterPartition, standardize


def random_problem(rng, n=None, p=None, r=None, kind="gaussian", snr=1.0):
    """Standardized random regression problem with a random partition."""
    n = n if n is not None else int(rng.integers(20, 51))
    p = p if p is not None else int(rng.integers(5, 61))
    r = r if r is not None else int(rng.integers(2, 7))
    X_raw = rng.normal(size=(n, p))
    B_true = rng.normal(size=(p, r)) * (rng.random((p, r)) < 0.4) * snr
    noise = rng.normal(size=(n, r))
    if kind == "gaussian":
        Y_raw = X_raw @ B_true + noise
        X, Y, std = standardize(X_raw, Y_raw, kind="gaussian")
    else:
        pi = 1.0 / (1.0 + np.exp(-np.clip(X_raw @ B_true, -30, 30)))
        Y_raw = (rng.random((n, r)) < pi).astype(float)
        X, Y, std = standardize(X_raw, Y_raw, kind="binomial")
    D = random_partition(rng, r)
    return X, Y, std, D


def random_partition(rng, r, Q=None):
    """Uniformly messy valid partition of r responses."""
    if Q is None:
        Q = int(rng.integers(1, r + 1))
    labels = np.concatenate([np.arange(1, Q + 1), rng.integers(1, Q + 1, size=r - Q)])
    rng.shuffle(labels)
    return ClusterPartition(labels.astype(np.int64))


def objective_textbook(B, Xv, Yv, D, gamma, delta):
    """Fixed-partition objective evaluated with explicit pair loops:
    (1/2n)||Y-XB||^2 + (delta/2)||B||_1 + (gamma/2n) sum_q (1/|D_q|)
    sum over ordered pairs of ||X(b_l - b_m)||^2."""
    n = Xv.shape[0]
    resid = Yv - Xv @ B
    total = 0.5 / n * float((resid**2).sum()) + 0.5 * delta * float(np.abs(B).sum())
    assign = np.asarray(D.assignments)
    for q in range(1, D.Q + 1):
        members = np.flatnonzero(assign == q)
        s = 0.0
        for l in members:
            for m in members:
                diff = Xv @ (B[:, l] - B[:, m])
                s += float(diff @ diff)
        total += gamma / (2.0 * n) * s / len(members)
    return total


def binomial_objective_textbook(Theta, U, Yv, D, gamma, delta):
    """2*NLL + delta*||slopes||_1 + (gamma/2n)*pairwise fusion, pair loops."""
    n = U.shape[0]
    eta = U @ Theta
    nll = float((np.logaddexp(0.0, eta) - Yv * eta).sum())
    total = 2.0 * nll + delta * float(np.abs(Theta[1:]).sum())
    assign = np.asarray(D.assignments)
    for q in range(1, D.Q + 1):
        members = np.flatnonzero(assign == q)
        s = 0.0
        for l in members:
            for m in members:
                diff = U @ (Theta[:, l] - Theta[:, m])
                s += float(diff @ diff)
        total += gamma / (2.0 * n) * s / len(members)
    return total


def fista_elastic_net(Xv, y, l1, l2, max_iter=100_000, tol=1e-13):
    """Proximal-gradient minimizer of (1/2n)||y - Xb||^2 + l1*||b||_1
    + l2*||b||_2^2 (the reference for every lasso/elastic-net reduction)."""
    n, p = Xv.shape
    XtX = Xv.T @ Xv / n
    Xty = Xv.T @ y / n
    L = float(np.linalg.eigvalsh(XtX).max()) + 2.0 * l2
    beta = np.zeros(p)
    z = beta.copy()
    t_acc = 1.0
    step = 1.0 / L
    for _ in range(max_iter):
        grad = XtX @ z - Xty + 2.0 * l2 * z
        v = z - step * grad
        new = np.sign(v) * np.maximum(np.abs(v) - step * l1, 0.0)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2))
        z = new + (t_acc - 1.0) / t_next * (new - beta)
        if np.abs(new - beta).max() < tol:
            beta = new
            break
        beta = new
        t_acc = t_next
    return beta


def fista_logistic(U, y, l1, l2, max_iter=200_000, tol=1e-12):
    """Proximal-gradient minimizer of NLL(t) + l1*||t_slopes||_1
    + l2*||t_slopes||_2^2 with an unpenalized intercept (column 0 of U)."""
    n, P = U.shape
    L = float(np.linalg.eigvalsh(U.T @ U).max()) / 4.0 + 2.0 * l2
    theta = np.zeros(P)
    z = theta.copy()
    t_acc = 1.0
    step = 1.0 / L
    for _ in range(max_iter):
        eta = U @ z
        pi = 1.0 / (1.0 + np.exp(-eta))
        grad = U.T @ (pi - y)
        grad[1:] += 2.0 * l2 * z[1:]
        v = z - step * grad
        new = v.copy()
        new[1:] = np.sign(v[1:]) * np.maximum(np.abs(v[1:]) - step * l1, 0.0)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2))
        z = new + (t_acc - 1.0) / t_next * (new - theta)
        if np.abs(new - theta).max() < tol:
            theta = new
            break
        theta = new
        t_acc = t_next
    return theta


def deviance_logistic(theta, U, y):
    eta = U @ theta
    return 2.0 * float((np.logaddexp(0.0, eta) - y * eta).sum())


def partitions_into_blocks(r, Q):
    """All set partitions of range(r) into exactly Q nonempty blocks, as
    0-based label vectors in restricted-growth form."""
    out = []

    def grow(labels, used):
        i = len(labels)
        if i == r:
            if used == Q:
                out.append(np.array(labels))
            return
        if used + (r - i) < Q:
            return
        for lab in range(min(used + 1, Q)):
            grow(labels + [lab], max(used, lab + 1))

    grow([], 0)
    return out


def same_partition(labels_a, labels_b):
    """Label-invariant equality of two assignment vectors."""
    la, lb = np.asarray(labels_a), np.asarray(labels_b)
    if la.shape != lb.shape:
        return False
    seen = {}
    for a, b in zip(la, lb):
        if a in seen:
            if seen[a] != b:
                return False
        else:
            if b in seen.values():
                return False
            seen[a] = b
    return True
