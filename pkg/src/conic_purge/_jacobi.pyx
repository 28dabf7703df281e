# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Cyclic Jacobi diagonalization kernel for dense symmetric matrices.

Row-cyclic pivot order, fixed independent of the data, so results are
bit-identical across runs for a given input.
"""

from libc.math cimport fabs, sqrt


def jacobi_cyclic(double[:, ::1] a, double[:, ::1] u,
                  int max_sweeps, double rel_tol):
    """Diagonalize symmetric ``a`` in place; accumulate rotations into ``u``.

    ``u`` must come in as the identity; on return its ROWS are the
    eigenvectors (row i pairs with diagonal entry a[i, i]).  Returns
    ``(sweeps_used, off_norm, target)`` where convergence means
    off_norm <= target = rel_tol * frobenius(a_input).
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k, sweep
    cdef double apq, app, aqq, theta, t, c, s, tmp_p, tmp_q
    cdef double off, fro, target, thresh
    cdef int sweeps_used = 0

    fro = 0.0
    for p in range(n):
        for q in range(n):
            fro += a[p, q] * a[p, q]
    fro = sqrt(fro)
    target = rel_tol * fro if fro > 0.0 else 0.0

    off = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            off += 2.0 * a[p, q] * a[p, q]
    off = sqrt(off)

    for sweep in range(max_sweeps):
        if off <= target:
            break
        sweeps_used = sweep + 1
        # cheap rotations are skipped early on, everything is swept later
        thresh = 0.05 * off * off / (n * n) if sweep < 3 else 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0 or apq * apq <= thresh:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = 0.5 * (aqq - app) / apq
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    tmp_p = a[p, k]
                    tmp_q = a[q, k]
                    a[p, k] = c * tmp_p - s * tmp_q
                    a[q, k] = s * tmp_p + c * tmp_q
                for k in range(n):
                    a[k, p] = a[p, k]
                    a[k, q] = a[q, k]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    tmp_p = u[p, k]
                    tmp_q = u[q, k]
                    u[p, k] = c * tmp_p - s * tmp_q
                    u[q, k] = s * tmp_p + c * tmp_q
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        off = sqrt(off)

    return sweeps_used, off, target
