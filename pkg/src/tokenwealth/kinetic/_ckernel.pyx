# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exchange loop. Same arithmetic, in the same order, as _pykernel."""
from libc.stdint cimport int64_t


cdef inline void _trade(double* w, const double* lam, int v,
                        Py_ssize_t j, Py_ssize_t k, double e) noexcept nogil:
    cdef double xj = w[j]
    cdef double xk = w[k]
    cdef double total = xj + xk
    cdef double a, b, d, share, pool, lj, lk
    if v == 0:
        a = e * total
        b = (1.0 - e) * total
    elif v == 1:
        d = (2.0 * e - 1.0) * (xj if xj < xk else xk)
        a = xj + d
        b = xk - d
    elif v == 2:
        lj = lam[j]
        share = (1.0 - lj) * total
        a = lj * xj + e * share
        b = lj * xk + (1.0 - e) * share
    else:
        lj = lam[j]
        lk = lam[k]
        pool = (1.0 - lj) * xj + (1.0 - lk) * xk
        a = lj * xj + e * pool
        b = lk * xk + (1.0 - e) * pool
    if a >= b:
        if a > total:
            a = total
        w[j] = a
        w[k] = total - a
    else:
        if b > total:
            b = total
        w[j] = total - b
        w[k] = b


def exchange(double[::1] wealth, const double[::1] lambdas, int variant,
             const int64_t[::1] js, const int64_t[::1] ks, const double[::1] eps):
    """Apply the transactions ``(js[i], ks[i], eps[i])`` to ``wealth`` in place."""
    cdef Py_ssize_t i, m = js.shape[0]
    if ks.shape[0] != m or eps.shape[0] != m:
        raise ValueError("draw arrays differ in length")
    if lambdas.shape[0] != wealth.shape[0]:
        raise ValueError("one propensity per agent is required")
    cdef double* w = &wealth[0]
    cdef const double* lam = &lambdas[0]
    with nogil:
        for i in range(m):
            _trade(w, lam, variant, js[i], ks[i], eps[i])
