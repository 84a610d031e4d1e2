# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simplex kernels.

Semantics must stay in lockstep with _kernels_py: same eligibility
predicates, same first-index tie-breaking, same floating-point
expressions (the build disables FP contraction), so pivot sequences are
bit-identical across backends.
"""

from libc.stdint cimport int64_t

BACKEND = "compiled"


def dantzig_price(double[::1] z, signed char[::1] status, double tol):
    cdef Py_ssize_t j, best = -1
    cdef Py_ssize_t n = z.shape[0]
    cdef double s, s_best = tol
    for j in range(n):
        if status[j] == 0:
            s = -z[j]
        elif status[j] == 1:
            s = z[j]
        elif status[j] == 4:
            s = z[j] if z[j] >= 0.0 else -z[j]
        else:
            continue
        if s > s_best:
            s_best = s
            best = j
    return best


def steepest_edge_price(double[::1] z, signed char[::1] status, double tol,
                        double[::1] norms2):
    cdef Py_ssize_t j, best = -1
    cdef Py_ssize_t n = z.shape[0]
    cdef double raw, s, s_best = -1.0
    for j in range(n):
        if status[j] == 0:
            raw = -z[j]
        elif status[j] == 1:
            raw = z[j]
        elif status[j] == 4:
            raw = z[j] if z[j] >= 0.0 else -z[j]
        else:
            continue
        if raw > tol:
            s = (z[j] * z[j]) / (1.0 + norms2[j])
            if s > s_best:
                s_best = s
                best = j
    return best


def bland_price(double[::1] z, signed char[::1] status, double tol):
    cdef Py_ssize_t j
    cdef Py_ssize_t n = z.shape[0]
    cdef double s
    for j in range(n):
        if status[j] == 0:
            if -z[j] > tol:
                return j
        elif status[j] == 1:
            if z[j] > tol:
                return j
        elif status[j] == 4:
            s = z[j] if z[j] >= 0.0 else -z[j]
            if s > tol:
                return j
    return -1


def ratio_test(double[::1] col, double[::1] beta, double[::1] lb_b,
               double[::1] ub_b, double dirn, double t_bound,
               double piv_tol, bint bland, int64_t[::1] basis):
    cdef Py_ssize_t i, r = -1
    cdef Py_ssize_t m = col.shape[0]
    cdef double rate, ti, t_min = t_bound
    cdef double t_best, key, best_key
    cdef double INF = float("inf")

    if m == 0:
        return float(t_bound), -1

    # pass 1: smallest blocking step among basic rows
    t_min = INF
    for i in range(m):
        rate = -dirn * col[i]
        if rate < -piv_tol:
            ti = (lb_b[i] - beta[i]) / rate
        elif rate > piv_tol:
            ti = (ub_b[i] - beta[i]) / rate
        else:
            continue
        if ti < 0.0:
            ti = 0.0
        if ti < t_min:
            t_min = ti

    if not (t_min < t_bound):
        return float(t_bound), -1

    # pass 2: tie-break among rows attaining t_min
    if bland:
        best_key = INF
        for i in range(m):
            rate = -dirn * col[i]
            if rate < -piv_tol:
                ti = (lb_b[i] - beta[i]) / rate
            elif rate > piv_tol:
                ti = (ub_b[i] - beta[i]) / rate
            else:
                continue
            if ti < 0.0:
                ti = 0.0
            if ti == t_min:
                key = basis[i]
                if key < best_key:
                    best_key = key
                    r = i
    else:
        best_key = -1.0
        for i in range(m):
            rate = -dirn * col[i]
            if rate < -piv_tol:
                ti = (lb_b[i] - beta[i]) / rate
            elif rate > piv_tol:
                ti = (ub_b[i] - beta[i]) / rate
            else:
                continue
            if ti < 0.0:
                ti = 0.0
            if ti == t_min:
                key = col[i]
                if key < 0.0:
                    key = -key
                if key > best_key:
                    best_key = key
                    r = i
    return float(t_min), r


def pivot_update(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j):
    cdef Py_ssize_t i, k
    cdef Py_ssize_t nrows = T.shape[0]
    cdef Py_ssize_t ncols = T.shape[1]
    cdef double piv = T[r, j]
    cdef double f
    for k in range(ncols):
        T[r, k] /= piv
    T[r, j] = 1.0
    for i in range(nrows):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for k in range(ncols):
                T[i, k] -= f * T[r, k]
        T[i, j] = 0.0
    T[r, j] = 1.0
