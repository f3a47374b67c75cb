# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Bellman kernels over the component (CSR-like) layout.

Component row ``a * n_states + s`` holds the successors of ``(s, a)`` in
``succ[indptr[row]:indptr[row + 1]]``.  All kernels work on a contiguous slice
``[start, end)`` of ``rows`` so callers can split a sweep across threads.
Per-state sums run in stored component order.
"""

from libc.math cimport fabs, INFINITY
from libc.stdint cimport int64_t, uint8_t, uint16_t, uint32_t, uint64_t

ctypedef fused idx_t:
    uint8_t
    uint16_t
    uint32_t
    uint64_t


cdef inline double _row_dot(const int64_t[::1] indptr, const idx_t[::1] succ, const double[::1] prob,
                            const double[::1] V, Py_ssize_t row) noexcept nogil:
    cdef double acc = 0.0
    cdef int64_t k
    for k in range(indptr[row], indptr[row + 1]):
        acc = acc + prob[k] * V[succ[k]]
    return acc


def expected(const int64_t[::1] indptr, const idx_t[::1] succ, const double[::1] prob,
             Py_ssize_t n_states, Py_ssize_t action, const int64_t[::1] rows,
             const double[::1] V, double[::1] out, Py_ssize_t start, Py_ssize_t end):
    cdef Py_ssize_t i, s
    cdef Py_ssize_t base = action * n_states
    with nogil:
        for i in range(start, end):
            s = rows[i]
            out[s] = _row_dot(indptr, succ, prob, V, base + s)


def q_values(const int64_t[::1] indptr, const idx_t[::1] succ, const double[::1] prob,
             Py_ssize_t n_states, Py_ssize_t n_actions, const int64_t[::1] rows,
             const double[::1] V, double[:, ::1] q_out, Py_ssize_t start, Py_ssize_t end):
    cdef Py_ssize_t i, a, s
    with nogil:
        for i in range(start, end):
            s = rows[i]
            for a in range(n_actions):
                q_out[i, a] = _row_dot(indptr, succ, prob, V, a * n_states + s)


def backup(const int64_t[::1] indptr, const idx_t[::1] succ, const double[::1] prob,
           Py_ssize_t n_states, Py_ssize_t n_actions, const int64_t[::1] rows,
           const double[::1] V, const double[::1] r, double gamma, double tie_rtol,
           double[::1] V_out, int64_t[::1] pi_out, double[:, ::1] q_out,
           Py_ssize_t start, Py_ssize_t end):
    cdef Py_ssize_t i, a, s
    cdef double acc, best, scaled, floor
    with nogil:
        for i in range(start, end):
            s = rows[i]
            best = -INFINITY
            for a in range(n_actions):
                acc = _row_dot(indptr, succ, prob, V, a * n_states + s)
                q_out[i, a] = acc
                if acc > best:
                    best = acc
            scaled = gamma * best
            floor = scaled - tie_rtol * (fabs(scaled) if fabs(scaled) > 1.0 else 1.0)
            for a in range(n_actions):
                if gamma * q_out[i, a] >= floor:
                    pi_out[i] = a
                    break
            V_out[s] = r[s] + gamma * best


def policy_sweep(const int64_t[::1] indptr, const idx_t[::1] succ, const double[::1] prob,
                 Py_ssize_t n_states, const int64_t[::1] rows, const int64_t[::1] policy,
                 const double[::1] V, const double[::1] r, double gamma, double[::1] V_out,
                 Py_ssize_t start, Py_ssize_t end):
    cdef Py_ssize_t i, s
    with nogil:
        for i in range(start, end):
            s = rows[i]
            V_out[s] = r[s] + gamma * _row_dot(indptr, succ, prob, V, policy[i] * n_states + s)
