"""Primal-dual interior-point method for the phase-I feasibility program.

Solves::

    minimise t
    s.t.   S_c = smat(g0_c + G_c y) + t I  >= 0     (semidefinite blocks)
           bound - |y_i| >= 0                     (box)

with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. The
slack ``S`` is kept exactly consistent with ``(y, t)`` from a strictly
feasible start, so every iterate with ``t < 0`` is itself a certificate.
The Lagrange multipliers give a lower bound on ``t*`` that certifies
infeasibility once it turns positive.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import kernels

log = logging.getLogger(__name__)

STEP_FRACTION = 0.98
START_SHIFT = 1.0


@dataclass
class IpmResult:
    y: np.ndarray
    t: float
    lower: float
    iterations: int
    status: str  # "target", "infeasible", "converged", "boundary", "max_iter", "stalled"


def _svec_layout(n):
    i, j = np.triu_indices(n)
    # column-major upper triangle: sort by (j, i)
    order = np.lexsort((i, j))
    i, j = i[order], j[order]
    w = np.where(i == j, 1.0, np.sqrt(2.0))
    return i, j, w


class _Block:
    """One semidefinite block with its data in svec coordinates."""

    def __init__(self, dim, g0, G):
        self.dim = dim
        i, j, w = _svec_layout(dim)
        self.i, self.j = i.astype(np.int64), j.astype(np.int64)
        self.w = np.ascontiguousarray(w)
        self.g0 = g0
        eye = np.zeros(g0.size)
        eye[self.i == self.j] = 1.0
        self.G = sp.hstack([G, sp.csr_matrix(eye.reshape(-1, 1))], format="csc")
        self.G.sort_indices()
        self.G.indptr = self.G.indptr.astype(np.int32)
        self.G.indices = self.G.indices.astype(np.int32)
        self.GT = self.G.T.tocsr()

    def smat(self, v):
        S = np.zeros((self.dim, self.dim))
        S[self.i, self.j] = v / self.w
        S[self.j, self.i] = v / self.w
        return S

    def svec(self, S):
        return self.w * S[self.i, self.j]

    def kron_operator(self, Ti):
        """svec form of ``U -> Ti U Ti``."""
        return kernels.svec_kron(np.ascontiguousarray(Ti), self.i, self.j, self.w)


def _jordan(A, B):
    return 0.5 * (A @ B + B @ A)


def _max_step(lam_isqrt, D):
    """Largest ``a`` with ``diag(lam) + a D >= 0``."""
    E = lam_isqrt[:, None] * D * lam_isqrt[None, :]
    ev = np.linalg.eigvalsh(0.5 * (E + E.T))[0]
    return np.inf if ev >= 0 else -1.0 / ev


def solve_phase1(cones, nvar, bound, *, max_iter=500, tol=1e-8, target=None,
                 gap_tol=1e-9, verbose=False):
    """Run the interior-point iteration.

    ``cones`` is a sequence of ``(dim, g0, G)`` in svec coordinates.
    ``target``: stop as soon as ``t <= -target`` (defaults to ``1e-3 * bound``).
    """
    if target is None:
        target = 1e-3 * bound
    blocks = [_Block(d, np.asarray(g0, float), sp.csc_matrix(G)) for d, g0, G in cones]
    n = nvar + 1
    nu = sum(b.dim for b in blocks) + 2 * nvar

    # strictly feasible, roughly centred start: every block near t I, Z = I / sum(dim)
    worst = min(np.linalg.eigvalsh(b.smat(b.g0))[0] for b in blocks)
    spread = max(np.abs(np.linalg.eigvalsh(b.smat(b.g0))).max() for b in blocks)
    w = np.zeros(n)
    w[-1] = max(0.0, -worst) + START_SHIFT * max(1.0, spread)
    total_dim = sum(b.dim for b in blocks)
    Z = [np.eye(b.dim) / total_dim for b in blocks]
    mu0 = w[-1] / total_dim
    zl = np.full(2 * nvar, mu0 / bound)

    c = np.zeros(n)
    c[-1] = 1.0
    schur = kernels.schur_accumulate
    lower = -np.inf
    status = "max_iter"
    it = 0

    def slacks(w):
        S = [b.smat(b.g0 + b.G @ w) for b in blocks]
        y = w[:-1]
        sl = np.concatenate([bound - y, bound + y])
        return S, sl

    S, sl = slacks(w)
    for it in range(1, max_iter + 1):
        # NT scaling per block
        scal = []
        try:
            for b, Sb, Zb in zip(blocks, S, Z):
                Ls = la.cholesky(Sb, lower=True)
                Lz = la.cholesky(Zb, lower=True)
                U, d, Vt = la.svd(Lz.T @ Ls)
                Dh = np.sqrt(d)
                R = (Ls @ Vt.T) / Dh[None, :]
                Rinv = Dh[:, None] * (Vt @ la.solve_triangular(Ls, np.eye(b.dim), lower=True))
                scal.append((R, Rinv, d))
        except (la.LinAlgError, ValueError):
            status = "stalled"
            break

        gap = sum(np.vdot(Sb, Zb) for Sb, Zb in zip(S, Z)) + sl @ zl
        mu = gap / nu

        # dual residual and certified lower bound
        gz = np.zeros(n)
        for b, Zb in zip(blocks, Z):
            gz += b.GT @ b.svec(Zb)
        gz[:-1] += zl[nvar:] - zl[:nvar]
        trace = sum(np.trace(Zb) for Zb in Z)
        scale = 1.0 / trace
        rd_y = c[:-1] - scale * gz[:-1]
        dual_obj = -scale * (sum(np.vdot(b.smat(b.g0), Zb) for b, Zb in zip(blocks, Z))
                             + bound * zl.sum())
        lower = max(lower, dual_obj - bound * np.abs(rd_y).sum())
        t = w[-1]
        if verbose:
            log.info("it %3d  t=% .6e  lower=% .6e  mu=%.2e  rd=%.2e", it, t, lower, mu,
                     np.abs(rd_y).max() if trace > 0 else np.nan)
        if t <= -target:
            status = "target"
            break
        if lower > tol:
            status = "infeasible"
            break
        if t - lower <= gap_tol * max(1.0, abs(t)):
            status = "converged"
            break
        if gap <= gap_tol and t > -tol:
            # complementary and pinned at the boundary: t* is zero to working accuracy
            status = "boundary"
            break

        rd = c - gz  # want G^T z = c

        # Schur complement
        M = np.zeros((n, n))
        Tis = []
        for b, (R, Rinv, d) in zip(blocks, scal):
            Ti = Rinv.T @ Rinv
            Tis.append(Ti)
            K = b.kron_operator(Ti)
            Y = np.ascontiguousarray(b.GT @ K)
            schur(M, b.G.indptr, b.G.indices, b.G.data, Y)
        M = np.triu(M)
        M = M + np.triu(M, 1).T
        ratio = zl / sl
        M[:nvar, :nvar] += np.diag(ratio[:nvar] + ratio[nvar:])
        try:
            cho = la.cho_factor(M, lower=False, check_finite=False)
        except la.LinAlgError:
            M[np.diag_indices(n)] += 1e-12 * max(1.0, np.abs(np.diag(M)).max())
            try:
                cho = la.cho_factor(M, lower=False, check_finite=False)
            except la.LinAlgError:
                status = "stalled"
                break

        def direction(rcs, rl):
            rhs = -rd.copy()
            Qs = []
            for b, (R, Rinv, d), rc in zip(blocks, scal, rcs):
                Q = 2.0 * rc / (d[:, None] + d[None, :])
                Qs.append(Q)
                rhs += b.GT @ b.svec(Rinv.T @ Q @ Rinv)
            lp = rl / sl
            rhs[:-1] += lp[nvar:] - lp[:nvar]
            dw = la.cho_solve(cho, rhs, check_finite=False)
            dS, dZ = [], []
            for b, (R, Rinv, d), Q, Ti in zip(blocks, scal, Qs, Tis):
                dSb = b.smat(b.G @ dw)
                dS.append(dSb)
                dZ.append(Rinv.T @ Q @ Rinv - Ti @ dSb @ Ti)
            dy = dw[:-1]
            dsl = np.concatenate([-dy, dy])
            dzl = (rl - zl * dsl) / sl
            return dw, dS, dZ, dsl, dzl

        def scaled(dS, dZ):
            out = []
            for (R, Rinv, d), dSb, dZb in zip(scal, dS, dZ):
                out.append((Rinv @ dSb @ Rinv.T, R.T @ dZb @ R))
            return out

        def step_length(sc, dsl, dzl):
            a = np.inf
            for (R, Rinv, d), (ds, dz) in zip(scal, sc):
                li = 1.0 / np.sqrt(d)
                a = min(a, _max_step(li, ds), _max_step(li, dz))
            neg = dsl < 0
            if np.any(neg):
                a = min(a, np.min(-sl[neg] / dsl[neg]))
            neg = dzl < 0
            if np.any(neg):
                a = min(a, np.min(-zl[neg] / dzl[neg]))
            return a

        # predictor
        rcs = [-np.diag(d * d) for (R, Rinv, d) in scal]
        rl = -sl * zl
        dw, dS, dZ, dsl, dzl = direction(rcs, rl)
        sc = scaled(dS, dZ)
        a_aff = min(1.0, step_length(sc, dsl, dzl))
        gap_aff = 0.0
        for (R, Rinv, d), (ds, dz) in zip(scal, sc):
            gap_aff += np.vdot(np.diag(d) + a_aff * ds, np.diag(d) + a_aff * dz)
        gap_aff += (sl + a_aff * dsl) @ (zl + a_aff * dzl)
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3

        # corrector
        rcs = [-np.diag(d * d) + sigma * mu * np.eye(d.size) - _jordan(ds, dz)
               for (R, Rinv, d), (ds, dz) in zip(scal, sc)]
        rl = -sl * zl + sigma * mu - dsl * dzl
        dw, dS, dZ, dsl, dzl = direction(rcs, rl)
        sc = scaled(dS, dZ)
        alpha = min(1.0, STEP_FRACTION * step_length(sc, dsl, dzl))
        if verbose:
            log.info("     alpha=%.3e sigma=%.2e", alpha, sigma)
        if alpha < 1e-10:
            status = "stalled"
            break

        w_new = w + alpha * dw
        S_new, sl_new = slacks(w_new)
        # guard against round-off pushing the recomputed slack out of the cone
        ok = np.all(sl_new > 0)
        if ok:
            try:
                for Sb in S_new:
                    la.cholesky(Sb, lower=True)
            except la.LinAlgError:
                ok = False
        if not ok:
            if verbose:
                log.info("     recomputed slack left the cone")
            status = "stalled"
            break
        w, S, sl = w_new, S_new, sl_new
        Z = [Zb + alpha * dZb for Zb, dZb in zip(Z, dZ)]
        Z = [0.5 * (Zb + Zb.T) for Zb in Z]
        zl = zl + alpha * dzl
    return IpmResult(w[:-1].copy(), float(w[-1]), float(lower), it, status)
