# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot kernels; same signatures as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


def schur_accumulate(double[:, ::1] M, const int[::1] indptr, const int[::1] indices,
                     const double[::1] data, const double[:, ::1] Y):
    # row p of Y stays hot while the columns of G stream past
    cdef Py_ssize_t n = M.shape[0]
    cdef Py_ssize_t p, q, k
    cdef double acc
    cdef const double[::1] yrow
    with nogil:
        for p in range(n):
            yrow = Y[p]
            for q in range(p, n):
                acc = 0.0
                for k in range(indptr[q], indptr[q + 1]):
                    acc = acc + data[k] * yrow[indices[k]]
                M[p, q] += acc


def svec_kron(const double[:, ::1] Ti, const long[::1] I, const long[::1] J,
              const double[::1] w):
    cdef Py_ssize_t m = I.shape[0]
    cdef Py_ssize_t a, b
    cdef long ia, ja, ib, jb
    out = np.empty((m, m))
    cdef double[:, ::1] K = out
    with nogil:
        for a in range(m):
            ia = I[a]
            ja = J[a]
            for b in range(a, m):
                ib = I[b]
                jb = J[b]
                K[a, b] = 0.5 * w[a] * w[b] * (Ti[ia, ib] * Ti[ja, jb] + Ti[ia, jb] * Ti[ja, ib])
                K[b, a] = K[a, b]
    return out


cdef void _rhs(double[::1] x, double[::1] h, const double[:, ::1] A, const double[:, ::1] B,
               const double[:, :, ::1] K, const double[:, :, :, ::1] Mk, double gamma,
               double[::1] u, double[::1] q, double[::1] dx, double[::1] dh) noexcept nogil:
    cdef Py_ssize_t nx = x.shape[0], nu = B.shape[1], r = h.shape[0]
    cdef Py_ssize_t i, j, k, l, c
    cdef double s, mean, acc
    for c in range(nu):
        s = 0.0
        for k in range(r):
            for l in range(nx):
                s = s + h[k] * K[k, c, l] * x[l]
        u[c] = s
    for i in range(nx):
        s = 0.0
        for l in range(nx):
            s = s + A[i, l] * x[l]
        for c in range(nu):
            s = s + B[i, c] * u[c]
        dx[i] = s
    mean = 0.0
    for j in range(r):
        s = 0.0
        for k in range(r):
            acc = 0.0
            for i in range(nx):
                for l in range(nx):
                    acc = acc + x[i] * Mk[k, j, i, l] * x[l]
            s = s + h[k] * acc
        q[j] = -gamma * s
        mean = mean + q[j]
    mean = mean / r
    for j in range(r):
        dh[j] = q[j] - mean


def rk4_integrate(A_cl_parts, x0, ahat0, alpha, K, Mk, double gamma, double dt,
                  Py_ssize_t nsteps, bint clamp):
    A_np, B_np = A_cl_parts
    cdef const double[:, ::1] A = np.ascontiguousarray(A_np, dtype=float)
    cdef const double[:, ::1] B = np.ascontiguousarray(B_np, dtype=float)
    cdef const double[:, :, ::1] Kv = np.ascontiguousarray(K, dtype=float)
    cdef const double[:, :, :, ::1] Mv = np.ascontiguousarray(Mk, dtype=float)
    cdef Py_ssize_t nx = A.shape[0], nu = B.shape[1], r = Kv.shape[0]
    xs_np = np.empty((nsteps + 1, nx))
    hs_np = np.empty((nsteps + 1, r))
    cdef double[:, ::1] xs = xs_np
    cdef double[:, ::1] hs = hs_np
    cdef double[::1] x = np.array(x0, dtype=float)
    cdef double[::1] h = np.array(ahat0, dtype=float)
    cdef double[::1] xt = np.empty(nx), ht = np.empty(r)
    cdef double[::1] u = np.empty(nu), q = np.empty(r)
    cdef double[:, ::1] kx = np.empty((4, nx)), kh = np.empty((4, r))
    cdef Py_ssize_t step, i, stage, done = nsteps
    cdef double c, total
    cdef bint bad
    xs[0, :] = x
    hs[0, :] = h
    with nogil:
        for step in range(nsteps):
            for stage in range(4):
                c = 0.0 if stage == 0 else (dt if stage == 3 else 0.5 * dt)
                for i in range(nx):
                    xt[i] = x[i] + (c * kx[stage - 1, i] if stage > 0 else 0.0)
                for i in range(r):
                    ht[i] = h[i] + (c * kh[stage - 1, i] if stage > 0 else 0.0)
                _rhs(xt, ht, A, B, Kv, Mv, gamma, u, q, kx[stage], kh[stage])
            for i in range(nx):
                x[i] = x[i] + dt / 6.0 * (kx[0, i] + 2.0 * kx[1, i] + 2.0 * kx[2, i] + kx[3, i])
            for i in range(r):
                h[i] = h[i] + dt / 6.0 * (kh[0, i] + 2.0 * kh[1, i] + 2.0 * kh[2, i] + kh[3, i])
            if clamp:
                total = 0.0
                for i in range(r):
                    if h[i] < 0.0:
                        h[i] = 0.0
                    total = total + h[i]
                for i in range(r):
                    h[i] = h[i] / total
            bad = False
            for i in range(nx):
                if not isfinite(x[i]):
                    bad = True
            for i in range(r):
                if not isfinite(h[i]):
                    bad = True
            if bad:
                done = step
                break
            xs[step + 1, :] = x
            hs[step + 1, :] = h
    return xs_np, hs_np, done
