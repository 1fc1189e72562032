# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled grid enumeration for the brute-force allocation oracle.

Walks every lattice point ``k`` with ``0 <= k_i <= kmax_i`` and
``sum(k) <= budget_units`` in lexicographic order (last coordinate fastest)
and keeps the first point with the best welfare of ``u_i = p_i * (k_i * step)``.
Family codes are shared with ``swfopt._grid_py``.
"""

import numpy as np
from libc.math cimport fabs, sqrt, log, pow, NAN, INFINITY, isnan

cdef enum:
    MAXN = 8

cdef enum:
    F_UTIL = 0
    F_RR = 1
    F_RMD = 2
    F_CV = 3
    F_GINI = 4
    F_HOOVER = 5
    F_MCLOONE = 6
    F_MAXIMIN = 7
    F_ALPHA = 8
    F_PF = 9
    F_KS = 10
    F_THRESHOLD = 11
    F_LEXIMAX = 12


cdef void _sort(double* a, int n) noexcept nogil:
    cdef int i, j
    cdef double x
    for i in range(1, n):
        x = a[i]
        j = i - 1
        while j >= 0 and a[j] > x:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = x


cdef double _welfare(int fam, double* u, int n, double alpha, double delta,
                     double eps, double* umax) noexcept nogil:
    cdef int i, j, cnt
    cdef double s = 0.0, m, lo, hi, med, v, acc
    cdef double srt[MAXN]
    cdef bint clamp
    if fam == F_UTIL:
        for i in range(n):
            s += u[i]
        return s
    if fam == F_MAXIMIN:
        lo = u[0]
        for i in range(1, n):
            if u[i] < lo:
                lo = u[i]
        return lo
    if fam == F_ALPHA:
        clamp = alpha > 1.0
        if not clamp:
            for i in range(n):
                if u[i] <= 0.0:
                    clamp = True
        for i in range(n):
            v = u[i]
            if clamp and v < eps:
                v = eps
            s += pow(v, 1.0 - alpha)
        return s / (1.0 - alpha)
    if fam == F_PF:
        for i in range(n):
            v = u[i] if u[i] > eps else eps
            s += log(v)
        return s
    if fam == F_THRESHOLD:
        lo = u[0]
        for i in range(1, n):
            if u[i] < lo:
                lo = u[i]
        for i in range(n):
            v = u[i] - delta
            s += v if v > lo else lo
        return (n - 1) * delta + s
    if fam == F_KS:
        lo = INFINITY
        hi = -INFINITY
        for i in range(n):
            v = u[i] / umax[i]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
            s += u[i]
        m = 0.5 * (lo + hi)
        if hi - lo <= 1e-9 * fabs(m) and m >= -1e-9 and m <= 1.0 + 1e-9:
            return s
        return 0.0
    # remaining families are scale-free inequality indices
    for i in range(n):
        s += u[i]
    m = s / n
    if fam == F_MCLOONE:
        for i in range(n):
            srt[i] = u[i]
        _sort(srt, n)
        if n % 2 == 1:
            med = srt[n // 2]
        else:
            med = 0.5 * (srt[n // 2 - 1] + srt[n // 2])
        if med == 0.0:
            return NAN
        acc = 0.0
        cnt = 0
        for i in range(n):
            if u[i] <= med:
                acc += u[i]
                cnt += 1
        return acc / (cnt * med)
    if m == 0.0:
        return NAN
    if fam == F_RR:
        lo = u[0]
        hi = u[0]
        for i in range(1, n):
            if u[i] < lo:
                lo = u[i]
            if u[i] > hi:
                hi = u[i]
        return -(hi - lo) / m
    if fam == F_RMD or fam == F_HOOVER:
        acc = 0.0
        for i in range(n):
            acc += fabs(u[i] - m)
        if fam == F_RMD:
            return -acc / m
        return -(acc / m) / (2.0 * n)
    if fam == F_CV:
        acc = 0.0
        for i in range(n):
            acc += (u[i] - m) * (u[i] - m)
        return -sqrt(acc / n) / m
    if fam == F_GINI:
        acc = 0.0
        for i in range(n):
            for j in range(n):
                acc += fabs(u[i] - u[j])
        return 1.0 - acc / (2.0 * m * n * n)
    return NAN


cdef int _lex_cmp(double* a, double* b, int n) noexcept nogil:
    cdef int i
    for i in range(n):
        if a[i] > b[i]:
            return 1
        if a[i] < b[i]:
            return -1
    return 0


def grid_argmax(const double[::1] p, const long long[::1] kmax, long long budget_units,
                double step, int family, double alpha, double delta, double eps,
                const double[::1] umax):
    """Return ``(best_k, best_value, n_points)``; ``best_k`` is None when no
    grid point has a defined welfare value."""
    cdef int n = p.shape[0]
    if n < 1 or n > MAXN:
        raise ValueError(f"compiled grid kernel supports 1..{MAXN} players, got {n}")
    if kmax.shape[0] != n:
        raise ValueError("kmax length must match p")
    if family == F_KS and umax.shape[0] != n:
        raise ValueError("umax length must match p")
    cdef long long k[MAXN]
    cdef long long best[MAXN]
    cdef double u[MAXN]
    cdef double srt[MAXN]
    cdef double best_sorted[MAXN]
    cdef double* um = &umax[0] if umax.shape[0] > 0 else NULL
    cdef long long used = 0, count = 0
    cdef double val, best_val = -INFINITY
    cdef bint found = False, separable, any_nonpos
    cdef int i
    cdef long long j
    # per-player lookup tables: utility, raw term, clamped term
    cdef long long off[MAXN]
    cdef long long total = 0
    for i in range(n):
        off[i] = total
        total += kmax[i] + 1
    util_tab = np.empty(total, dtype=np.float64)
    term_tab = np.empty(total, dtype=np.float64)
    clamp_tab = np.empty(total, dtype=np.float64)
    cdef double[::1] ut = util_tab
    cdef double[::1] tt = term_tab
    cdef double[::1] ct = clamp_tab
    separable = family == F_UTIL or family == F_ALPHA or family == F_PF
    for i in range(n):
        for j in range(kmax[i] + 1):
            val = p[i] * (j * step)
            ut[off[i] + j] = val
            if family == F_ALPHA:
                tt[off[i] + j] = pow(val, 1.0 - alpha) if alpha <= 1.0 else pow(val if val > eps else eps, 1.0 - alpha)
                ct[off[i] + j] = pow(val if val > eps else eps, 1.0 - alpha)
            elif family == F_PF:
                tt[off[i] + j] = log(val if val > eps else eps)
                ct[off[i] + j] = tt[off[i] + j]
            else:
                tt[off[i] + j] = val
                ct[off[i] + j] = val
    for i in range(n):
        k[i] = 0
        best[i] = 0
    with nogil:
        while True:
            count += 1
            any_nonpos = False
            for i in range(n):
                u[i] = ut[off[i] + k[i]]
                if u[i] <= 0.0:
                    any_nonpos = True
            if separable:
                val = 0.0
                if any_nonpos:
                    for i in range(n):
                        val += ct[off[i] + k[i]]
                else:
                    for i in range(n):
                        val += tt[off[i] + k[i]]
                if family == F_ALPHA:
                    val = val / (1.0 - alpha)
                if not found or val > best_val:
                    found = True
                    best_val = val
                    for i in range(n):
                        best[i] = k[i]
            elif family == F_LEXIMAX:
                for i in range(n):
                    srt[i] = u[i]
                _sort(srt, n)
                if not found or _lex_cmp(srt, best_sorted, n) > 0:
                    found = True
                    for i in range(n):
                        best_sorted[i] = srt[i]
                        best[i] = k[i]
                    best_val = srt[0]
            else:
                val = _welfare(family, u, n, alpha, delta, eps, um)
                if not isnan(val) and (not found or val > best_val):
                    found = True
                    best_val = val
                    for i in range(n):
                        best[i] = k[i]
            # odometer step, pruned by the budget
            i = n - 1
            while i >= 0:
                if k[i] < kmax[i] and used < budget_units:
                    k[i] += 1
                    used += 1
                    break
                used -= k[i]
                k[i] = 0
                i -= 1
            if i < 0:
                break
    if not found:
        return None, float("nan"), count
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = best[i]
    return out, best_val, count
