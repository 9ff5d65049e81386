"""Pure NumPy coordinate-descent kernels (fallback backend).

Semantics match ``_speedups`` exactly: same update formulas, same sweep
order, same active-set schedule, so either backend may serve any caller.

Layout note: all per-response matrices arrive transposed (responses on the
leading axis) so the per-coordinate rank-1 updates touch contiguous rows.

The gaussian kernel performs exact coordinatewise minimization of

    (1/2n)||Y - XB||_F^2 + l1*||B||_1 + (ridge2/2)*||B||_2^2
      + (gamma2/4n) * sum_q (1/|D_q|) sum_{l,m in D_q} ||X(b_l - b_m)||^2

given R = X'X/n and XtY = X'Y/n (the (l, m) sum runs over ordered pairs).
The binomial kernel minimizes the weighted quadratic model

    sum_k sum_i w_ik (z_ik - u_i't_k)^2 + 2*l1*||T_(slopes)||_1
      + ridge*||T_(slopes)||_2^2 + (fus/2) * sum_q (1/|D_q|) sum_{l,m} ||U(t_l - t_m)||^2

given Rt = U'U, with row 0 of T (intercepts) exempt from l1 and ridge.
"""

from __future__ import annotations

import numpy as np


def _soft(a: float, b: float) -> float:
    if a > b:
        return a - b
    if a < -b:
        return a + b
    return 0.0


def gaussian_sweeps(
    R,
    XtY_t,
    B_t,
    G_t,
    CS_t,
    assign0,
    csize,
    order,
    gamma2: float,
    l1: float,
    ridge2: float,
    tol: float,
    max_sweeps: int,
    use_active: bool,
):
    """Run coordinate-descent sweeps in place; return (sweeps, converged).

    B_t, G_t = B_t @ R and the per-cluster sums CS_t are updated together and
    must be consistent on entry.
    """
    r, p = B_t.shape
    a_fac = np.empty(r)
    c_fac = np.empty(r)
    for k in range(r):
        d = csize[assign0[k]]
        a_fac[k] = gamma2 * (d - 1.0) / d
        c_fac[k] = gamma2 / d
    rdiag = np.diagonal(R).copy()

    def sweep(active):
        max_change = 0.0
        for k in order:
            q = assign0[k]
            a = a_fac[k]
            c = c_fac[k]
            Bk = B_t[k]
            Gk = G_t[k]
            CSq = CS_t[q]
            for j in range(p):
                if active is not None and not active[k, j]:
                    continue
                rjj = rdiag[j]
                num = (
                    XtY_t[k, j]
                    - (1.0 + a) * (Gk[j] - rjj * Bk[j])
                    + c * (CSq[j] - Gk[j])
                )
                new = _soft(num, l1) / (rjj * (1.0 + a) + ridge2)
                delta = new - Bk[j]
                if delta != 0.0:
                    Bk[j] = new
                    Rj = R[j]
                    Gk += delta * Rj
                    CSq += delta * Rj
                    ad = abs(delta)
                    if ad > max_change:
                        max_change = ad
        return max_change

    sweeps = 0
    while sweeps < max_sweeps:
        mc = sweep(None)
        sweeps += 1
        if mc < tol:
            return sweeps, True
        if use_active:
            active = B_t != 0.0
            while sweeps < max_sweeps:
                mc = sweep(active)
                sweeps += 1
                if mc < tol:
                    break
    return sweeps, False


def binomial_sweeps(
    Ut,
    W_t,
    E_t,
    AW_t,
    Rt,
    Th_t,
    G_t,
    CS_t,
    assign0,
    csize,
    order,
    fus: float,
    l1: float,
    ridge: float,
    tol: float,
    max_sweeps: int,
    use_active: bool,
):
    """Proximal coordinate-descent sweeps on the weighted quadratic model.

    E_t holds working residuals z - U@theta per response and is kept in sync
    with Th_t; column index 0 of Th_t is the unpenalized intercept.
    """
    r, P = Th_t.shape
    fd = np.empty(r)
    fc = np.empty(r)
    for k in range(r):
        d = csize[assign0[k]]
        fd[k] = fus * (d - 1.0) / d
        fc[k] = fus / d
    rdiag = np.diagonal(Rt).copy()

    def sweep(active):
        max_change = 0.0
        for k in order:
            q = assign0[k]
            wk = W_t[k]
            ek = E_t[k]
            Tk = Th_t[k]
            Gk = G_t[k]
            CSq = CS_t[q]
            for j in range(P):
                if active is not None and not active[k, j]:
                    continue
                Uj = Ut[j]
                wres = float(np.dot(Uj, wk * ek))
                num = (
                    wres
                    + AW_t[k, j] * Tk[j]
                    - fd[k] * (Gk[j] - rdiag[j] * Tk[j])
                    + fc[k] * (CSq[j] - Gk[j])
                )
                den = AW_t[k, j] + fd[k] * rdiag[j]
                if j > 0:
                    den += ridge
                    new = _soft(num, l1) / den
                else:
                    new = num / den
                delta = new - Tk[j]
                if delta != 0.0:
                    Tk[j] = new
                    ek -= delta * Uj
                    Rj = Rt[j]
                    Gk += delta * Rj
                    CSq += delta * Rj
                    ad = abs(delta)
                    if ad > max_change:
                        max_change = ad
        return max_change

    sweeps = 0
    while sweeps < max_sweeps:
        mc = sweep(None)
        sweeps += 1
        if mc < tol:
            return sweeps, True
        if use_active:
            active = Th_t != 0.0
            active[:, 0] = True
            while sweeps < max_sweeps:
                mc = sweep(active)
                sweeps += 1
                if mc < tol:
                    break
    return sweeps, False
