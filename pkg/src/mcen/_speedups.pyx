# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled coordinate-descent kernels.

Drop-in twins of the functions in ``_kernels_py``; see that module for the
objective each kernel minimizes and the layout conventions.
"""

import numpy as np

cimport numpy as cnp


cdef inline double _soft(double a, double b) nogil:
    if a > b:
        return a - b
    if a < -b:
        return a + b
    return 0.0


def gaussian_sweeps(
    double[:, ::1] R,
    double[:, ::1] XtY_t,
    double[:, ::1] B_t,
    double[:, ::1] G_t,
    double[:, ::1] CS_t,
    long[::1] assign0,
    long[::1] csize,
    long[::1] order,
    double gamma2,
    double l1,
    double ridge2,
    double tol,
    long max_sweeps,
    bint use_active,
):
    cdef Py_ssize_t r = B_t.shape[0]
    cdef Py_ssize_t p = B_t.shape[1]
    cdef cnp.ndarray[double, ndim=1] a_fac_a = np.empty(r)
    cdef cnp.ndarray[double, ndim=1] c_fac_a = np.empty(r)
    cdef cnp.ndarray[double, ndim=1] rdiag_a = np.diagonal(np.asarray(R)).copy()
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] active_a = np.zeros((r, p), dtype=np.uint8)
    cdef double[::1] a_fac = a_fac_a
    cdef double[::1] c_fac = c_fac_a
    cdef double[::1] rdiag = rdiag_a
    cdef cnp.uint8_t[:, ::1] active = active_a

    cdef Py_ssize_t k, j, t, q, d
    cdef double a, c, num, new, delta, mc, ad, rjj
    cdef long sweeps = 0
    cdef bint converged = 0
    cdef bint restrict_active

    for k in range(r):
        d = csize[assign0[k]]
        a_fac[k] = gamma2 * (d - 1.0) / d
        c_fac[k] = gamma2 / d

    with nogil:
        while sweeps < max_sweeps:
            # full sweep
            mc = 0.0
            for t in range(r):
                k = order[t]
                q = assign0[k]
                a = a_fac[k]
                c = c_fac[k]
                for j in range(p):
                    rjj = rdiag[j]
                    num = (
                        XtY_t[k, j]
                        - (1.0 + a) * (G_t[k, j] - rjj * B_t[k, j])
                        + c * (CS_t[q, j] - G_t[k, j])
                    )
                    new = _soft(num, l1) / (rjj * (1.0 + a) + ridge2)
                    delta = new - B_t[k, j]
                    if delta != 0.0:
                        B_t[k, j] = new
                        _axpy(G_t, k, R, j, delta, p)
                        _axpy(CS_t, q, R, j, delta, p)
                        ad = delta if delta > 0.0 else -delta
                        if ad > mc:
                            mc = ad
            sweeps += 1
            if mc < tol:
                converged = 1
                break
            if use_active:
                for k in range(r):
                    for j in range(p):
                        active[k, j] = 1 if B_t[k, j] != 0.0 else 0
                while sweeps < max_sweeps:
                    mc = 0.0
                    for t in range(r):
                        k = order[t]
                        q = assign0[k]
                        a = a_fac[k]
                        c = c_fac[k]
                        for j in range(p):
                            if not active[k, j]:
                                continue
                            rjj = rdiag[j]
                            num = (
                                XtY_t[k, j]
                                - (1.0 + a) * (G_t[k, j] - rjj * B_t[k, j])
                                + c * (CS_t[q, j] - G_t[k, j])
                            )
                            new = _soft(num, l1) / (rjj * (1.0 + a) + ridge2)
                            delta = new - B_t[k, j]
                            if delta != 0.0:
                                B_t[k, j] = new
                                _axpy(G_t, k, R, j, delta, p)
                                _axpy(CS_t, q, R, j, delta, p)
                                ad = delta if delta > 0.0 else -delta
                                if ad > mc:
                                    mc = ad
                    sweeps += 1
                    if mc < tol:
                        break
    return sweeps, bool(converged)


cdef inline void _axpy(
    double[:, ::1] M, Py_ssize_t row, double[:, ::1] R, Py_ssize_t j, double delta, Py_ssize_t p
) nogil:
    cdef Py_ssize_t i
    for i in range(p):
        M[row, i] += delta * R[j, i]


def binomial_sweeps(
    double[:, ::1] Ut,
    double[:, ::1] W_t,
    double[:, ::1] E_t,
    double[:, ::1] AW_t,
    double[:, ::1] Rt,
    double[:, ::1] Th_t,
    double[:, ::1] G_t,
    double[:, ::1] CS_t,
    long[::1] assign0,
    long[::1] csize,
    long[::1] order,
    double fus,
    double l1,
    double ridge,
    double tol,
    long max_sweeps,
    bint use_active,
):
    cdef Py_ssize_t r = Th_t.shape[0]
    cdef Py_ssize_t P = Th_t.shape[1]
    cdef Py_ssize_t n = Ut.shape[1]
    cdef cnp.ndarray[double, ndim=1] fd_a = np.empty(r)
    cdef cnp.ndarray[double, ndim=1] fc_a = np.empty(r)
    cdef cnp.ndarray[double, ndim=1] rdiag_a = np.diagonal(np.asarray(Rt)).copy()
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] active_a = np.zeros((r, P), dtype=np.uint8)
    cdef double[::1] fd = fd_a
    cdef double[::1] fc = fc_a
    cdef double[::1] rdiag = rdiag_a
    cdef cnp.uint8_t[:, ::1] active = active_a

    cdef Py_ssize_t k, j, t, q, d, i
    cdef double num, den, new, delta, mc, ad, wres
    cdef long sweeps = 0
    cdef bint converged = 0

    for k in range(r):
        d = csize[assign0[k]]
        fd[k] = fus * (d - 1.0) / d
        fc[k] = fus / d

    with nogil:
        while sweeps < max_sweeps:
            mc = _binomial_one_sweep(
                Ut, W_t, E_t, AW_t, Rt, Th_t, G_t, CS_t, assign0, order,
                fd, fc, rdiag, l1, ridge, active, 0, r, P, n,
            )
            sweeps += 1
            if mc < tol:
                converged = 1
                break
            if use_active:
                for k in range(r):
                    active[k, 0] = 1
                    for j in range(1, P):
                        active[k, j] = 1 if Th_t[k, j] != 0.0 else 0
                while sweeps < max_sweeps:
                    mc = _binomial_one_sweep(
                        Ut, W_t, E_t, AW_t, Rt, Th_t, G_t, CS_t, assign0, order,
                        fd, fc, rdiag, l1, ridge, active, 1, r, P, n,
                    )
                    sweeps += 1
                    if mc < tol:
                        break
    return sweeps, bool(converged)


cdef double _binomial_one_sweep(
    double[:, ::1] Ut,
    double[:, ::1] W_t,
    double[:, ::1] E_t,
    double[:, ::1] AW_t,
    double[:, ::1] Rt,
    double[:, ::1] Th_t,
    double[:, ::1] G_t,
    double[:, ::1] CS_t,
    long[::1] assign0,
    long[::1] order,
    double[::1] fd,
    double[::1] fc,
    double[::1] rdiag,
    double l1,
    double ridge,
    cnp.uint8_t[:, ::1] active,
    bint restrict_active,
    Py_ssize_t r,
    Py_ssize_t P,
    Py_ssize_t n,
) nogil:
    cdef Py_ssize_t k, j, t, q, i
    cdef double num, den, new, delta, ad, wres
    cdef double mc = 0.0
    for t in range(r):
        k = order[t]
        q = assign0[k]
        for j in range(P):
            if restrict_active and not active[k, j]:
                continue
            wres = 0.0
            for i in range(n):
                wres += Ut[j, i] * W_t[k, i] * E_t[k, i]
            num = (
                wres
                + AW_t[k, j] * Th_t[k, j]
                - fd[k] * (G_t[k, j] - rdiag[j] * Th_t[k, j])
                + fc[k] * (CS_t[q, j] - G_t[k, j])
            )
            den = AW_t[k, j] + fd[k] * rdiag[j]
            if j > 0:
                den += ridge
                new = _soft(num, l1) / den
            else:
                new = num / den
            delta = new - Th_t[k, j]
            if delta != 0.0:
                Th_t[k, j] = new
                for i in range(n):
                    E_t[k, i] -= delta * Ut[j, i]
                _axpy(G_t, k, Rt, j, delta, P)
                _axpy(CS_t, q, Rt, j, delta, P)
                ad = delta if delta > 0.0 else -delta
                if ad > mc:
                    mc = ad
    return mc
