# cython: language_level=3
"""Compiled hot kernels.

Same API and semantics as ``_kernels_py``; results agree with it up to the
last-bit differences between libm ``exp`` and numpy's vectorized ``exp``.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange, threadid
from libc.math cimport exp, log, sqrt, isnan, isfinite, nextafter, NAN, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

NAME = "compiled"

cdef double LOG_2PI = 1.8378770664093453


cdef inline Py_ssize_t _search(const double* c, Py_ssize_t n, double v) noexcept nogil:
    # first i with c[i] > v
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if c[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef double _cumulate(const double[::1] logw, double* c) noexcept nogil:
    # exp(logw - max) accumulated into c; returns max, or NaN when degenerate
    cdef Py_ssize_t n = logw.shape[0], i
    cdef double m = -INFINITY, acc = 0.0, x
    for i in range(n):
        x = logw[i]
        if isnan(x):
            return NAN
        if x > m:
            m = x
    if not isfinite(m):
        return NAN
    for i in range(n):
        acc += exp(logw[i] - m)
        c[i] = acc
    return m


def inverse_cdf(const double[::1] cumw, const double[::1] u, total=None):
    cdef Py_ssize_t n = cumw.shape[0], k, m = u.shape[0]
    cdef double tot = cumw[n - 1] if total is None else total
    cdef double cap = nextafter(tot, 0.0), v
    out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    with nogil:
        for k in range(m):
            v = u[k] * tot
            if v > cap:
                v = cap
            o[k] = _search(&cumw[0], n, v)
    return out


def multinomial_logw(const double[::1] logw, const double[::1] u, cnp.int64_t[::1] idx):
    cdef Py_ssize_t n = logw.shape[0], k, m = u.shape[0]
    cdef double mx, tot, cap, v
    cdef double* c = <double*> malloc(n * sizeof(double))
    if c == NULL:
        raise MemoryError()
    try:
        with nogil:
            mx = _cumulate(logw, c)
            if not isnan(mx):
                tot = c[n - 1]
                cap = nextafter(tot, 0.0)
                for k in range(m):
                    v = u[k] * tot
                    if v > cap:
                        v = cap
                    idx[k] = _search(c, n, v)
        if isnan(mx):
            return np.nan
        return mx + log(tot / n)
    finally:
        free(c)


def systematic_logw(const double[::1] logw, double u0, cnp.int64_t[::1] idx):
    cdef Py_ssize_t n = logw.shape[0], k, m = idx.shape[0], j = 0
    cdef double mx, tot, cap, v
    cdef double* c = <double*> malloc(n * sizeof(double))
    if c == NULL:
        raise MemoryError()
    try:
        with nogil:
            mx = _cumulate(logw, c)
            if not isnan(mx):
                tot = c[n - 1]
                cap = nextafter(tot, 0.0)
                for k in range(m):
                    v = ((k + u0) / m) * tot
                    if v > cap:
                        v = cap
                    while j < n - 1 and c[j] <= v:
                        j += 1
                    idx[k] = j
        if isnan(mx):
            return np.nan
        return mx + log(tot / n)
    finally:
        free(c)


def log_mean_exp(const double[::1] logw):
    cdef Py_ssize_t n = logw.shape[0], i
    cdef double m = -INFINITY, acc = 0.0, x
    with nogil:
        for i in range(n):
            x = logw[i]
            if isnan(x):
                m = NAN
                break
            if x > m:
                m = x
        if isfinite(m):
            for i in range(n):
                acc += exp(logw[i] - m)
    if not isfinite(m):
        return np.nan
    return m + log(acc / n)


def backward_indices(const double[::1] hx, const double[::1] x_next,
                     const double[::1] beta, const double[::1] tau2,
                     const double[::1] u, cnp.int64_t[::1] idx, int threads=1):
    cdef Py_ssize_t n = hx.shape[0], m = x_next.shape[0], i, j, best
    cdef double d, dmin, scale, acc, v, cap
    cdef double* buf
    cdef double* c
    if threads < 1:
        threads = 1
    buf = <double*> malloc(threads * n * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        for i in prange(m, nogil=True, num_threads=threads, schedule="static"):
            c = buf + threadid() * n
            dmin = INFINITY
            best = 0
            for j in range(n):
                d = x_next[i] - beta[i] * hx[j]
                d = d * d
                c[j] = d
                if d < dmin:
                    dmin = d
                    best = j
            if tau2[i] <= 0:
                idx[i] = best
                continue
            scale = 0.5 / tau2[i]
            acc = 0.0
            for j in range(n):
                acc = acc + exp(-(c[j] - dmin) * scale)
                c[j] = acc
            cap = nextafter(acc, 0.0)
            v = u[i] * acc
            if v > cap:
                v = cap
            idx[i] = _search(c, n, v)
    finally:
        free(buf)
    return idx


def pl_scalar_step(const double[::1] x, double y, const double[:] beta, const double[:] s2k,
                   const double[:] t2, bint nonlinear, const double[::1] u,
                   const double[::1] z, cnp.int64_t[::1] idx, double[::1] x_prev,
                   double[::1] x_next):
    """Fused resample-propagate step for the scalar models.

    Weights ``N(y; beta g(x), s2k + t2)``, multinomial resample with the
    uniforms ``u``, then ``x_next = a + A (y - a) + sqrt(A s2k) z`` with
    ``a = beta g(x)`` and ``A = t2 / (t2 + s2k)``.  Length-1 parameter
    arrays are shared by all particles.  Returns the log mean weight, NaN
    when every weight vanishes.
    """
    cdef Py_ssize_t n = x.shape[0], i, j
    cdef Py_ssize_t sb = 1 if beta.shape[0] > 1 else 0
    cdef Py_ssize_t ss = 1 if s2k.shape[0] > 1 else 0
    cdef Py_ssize_t st = 1 if t2.shape[0] > 1 else 0
    cdef double mx = -INFINITY, tot, cap, v, a, A, R, V, d, gx
    cdef double* lw = <double*> malloc(n * sizeof(double))
    if lw == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                gx = x[i]
                if nonlinear:
                    gx = gx / (1.0 + gx * gx)
                v = s2k[i * ss] + t2[i * st]
                d = y - beta[i * sb] * gx
                lw[i] = -0.5 * (LOG_2PI + log(v) + d * d / v)
                if isnan(lw[i]):
                    mx = NAN
                    break
                if lw[i] > mx:
                    mx = lw[i]
            if isfinite(mx):
                tot = 0.0
                for i in range(n):
                    tot += exp(lw[i] - mx)
                    lw[i] = tot
                cap = nextafter(tot, 0.0)
                for i in range(n):
                    v = u[i] * tot
                    if v > cap:
                        v = cap
                    j = _search(lw, n, v)
                    idx[i] = j
                    gx = x[j]
                    x_prev[i] = gx
                    if nonlinear:
                        gx = gx / (1.0 + gx * gx)
                    a = beta[j * sb] * gx
                    R = t2[j * st]
                    V = s2k[j * ss]
                    A = R / (R + V)
                    x_next[i] = a + A * (y - a) + sqrt(A * V) * z[i]
        if not isfinite(mx):
            return np.nan
        return mx + log(tot / n)
    finally:
        free(lw)
