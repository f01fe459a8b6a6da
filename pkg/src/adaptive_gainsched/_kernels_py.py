"""Pure-Python/NumPy implementations of the hot kernels."""

import numpy as np


def schur_accumulate(M, indptr, indices, data, Y):
    """``M[p, q] += sum_k G[k, q] * Y[p, k]`` for ``q >= p`` and a CSC matrix ``G``.

    With ``Y = G^T K`` this adds the upper triangle of ``G^T K G``.
    """
    n = M.shape[0]
    for p in range(n):
        lo, hi = indptr[p], indptr[p + 1]
        if lo == hi:
            continue
        M[p, p:] += Y[p:, indices[lo:hi]] @ data[lo:hi]


def svec_kron(Ti, I, J, w):
    """svec-coordinate matrix of ``U -> Ti U Ti`` for symmetric ``Ti``.

    ``I, J, w`` are the row, column and weight of every svec entry.
    """
    K = Ti[np.ix_(I, I)] * Ti[np.ix_(J, J)] + Ti[np.ix_(I, J)] * Ti[np.ix_(J, I)]
    K *= 0.5 * np.outer(w, w)
    return K


def rk4_integrate(A_cl_parts, x0, ahat0, alpha, K, Mk, gamma, dt, nsteps, clamp):
    """Classical RK4 on the augmented state ``(x, alpha_hat)``.

    ``A_cl_parts`` is ``(A_alpha, B_alpha)`` for the (constant) true
    parameter; ``K`` has shape ``(r, n_u, n_x)``; ``Mk`` has shape
    ``(r, r, n_x, n_x)`` with ``Mk[k, j]`` the adaptation matrices. Returns
    arrays of states and estimates at every step, plus the number of steps
    completed before any non-finite value.
    """
    A, B = A_cl_parts
    r = K.shape[0]
    nx = x0.size
    xs = np.empty((nsteps + 1, nx))
    hs = np.empty((nsteps + 1, r))
    xs[0] = x0
    hs[0] = ahat0
    x = x0.copy()
    h = ahat0.copy()

    def rhs(x, h):
        u = np.tensordot(h, K, axes=1) @ x
        dx = A @ x + B @ u
        q = np.einsum("i,kjil,l->kj", x, Mk, x)
        g = -gamma * (h @ q)
        dh = g - g.mean()
        return dx, dh

    done = nsteps
    for step in range(nsteps):
        k1x, k1h = rhs(x, h)
        k2x, k2h = rhs(x + 0.5 * dt * k1x, h + 0.5 * dt * k1h)
        k3x, k3h = rhs(x + 0.5 * dt * k2x, h + 0.5 * dt * k2h)
        k4x, k4h = rhs(x + dt * k3x, h + dt * k3h)
        x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        h = h + dt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
        if clamp:
            h = np.maximum(h, 0.0)
            h = h / h.sum()
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(h))):
            done = step
            break
        xs[step + 1] = x
        hs[step + 1] = h
    return xs, hs, done
