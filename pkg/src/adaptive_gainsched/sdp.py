"""Semidefinite feasibility in conic standard form.

A problem is a list of cones ``svec(G0_c) + G_c y`` that must be positive
semidefinite; the decision vector handed back to callers is ``x = var_scale * y``.
``svec`` stacks the upper triangle column by column with off-diagonal entries
weighted by ``sqrt(2)``, so ``svec(S1) . svec(S2) = trace(S1 S2)``.

Feasibility is decided by a phase-I program::

    minimise t  s.t.  svec(G0_c) + G_c y + t svec(I) in PSD,  |y| <= bound

``t* < -tol`` with an independent eigenvalue re-check gives ``FEASIBLE``,
``t* > tol`` gives ``INFEASIBLE``; anything else is ``INCONCLUSIVE``.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
INCONCLUSIVE = "Inconclusive"

SQRT2 = np.sqrt(2.0)


def svec_indices(n: int):
    """Row/column index arrays of the svec ordering and the matching weights."""
    rows, cols = [], []
    for j in range(n):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    rows = np.array(rows, dtype=int)
    cols = np.array(cols, dtype=int)
    w = np.where(rows == cols, 1.0, SQRT2)
    return rows, cols, w


def svec(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    i, j, w = svec_indices(S.shape[0])
    return w * 0.5 * (S[i, j] + S[j, i])


def smat(v, n: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if n is None:
        n = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if n * (n + 1) // 2 != v.size:
        raise ValueError("vector length is not triangular")
    i, j, w = svec_indices(n)
    S = np.zeros((n, n))
    S[i, j] = v / w
    S[j, i] = v / w
    return S


def min_eigenvalue(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


@dataclass
class SdpCone:
    dim: int
    g0: np.ndarray
    G: sp.csr_matrix
    label: str = ""

    def __post_init__(self):
        self.g0 = np.asarray(self.g0, dtype=float)
        self.G = sp.csr_matrix(self.G)
        m = self.dim * (self.dim + 1) // 2
        if self.g0.shape != (m,) or self.G.shape[0] != m:
            raise ValueError(f"cone of dimension {self.dim} needs {m} svec rows")

    def matrix(self, y) -> np.ndarray:
        return smat(self.g0 + self.G @ y, self.dim)


def _sparse_json(M):
    if M is None:
        return None
    coo = M.tocoo()
    return {"shape": list(coo.shape),
            "triplets": [[int(a), int(b), float(v)] for a, b, v in zip(coo.row, coo.col, coo.data)]}


def _sparse_from_json(data):
    if data is None:
        return None
    trip = np.array(data["triplets"], dtype=float).reshape(-1, 3)
    return sp.csr_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))),
                         shape=tuple(data["shape"]))


@dataclass
class SdpProblem:
    """Cones over ``nvar`` solver variables ``y``.

    The original decision vector is ``x = basis @ (var_scale * (shift + embed @ y))``;
    ``shift``, ``embed`` and ``basis`` default to zero and identities. They
    carry linear equalities eliminated before solving and a change of
    variables.
    """

    nvar: int
    cones: list = field(default_factory=list)
    var_scale: np.ndarray | None = None
    bound: float = 1e4
    shift: np.ndarray | None = None
    embed: sp.csr_matrix | None = None
    basis: sp.csr_matrix | None = None

    def __post_init__(self):
        if self.embed is not None:
            self.embed = sp.csr_matrix(self.embed)
            if self.embed.shape[1] != self.nvar:
                raise ValueError("embed must have one column per solver variable")
        nfull = self.nvar if self.embed is None else self.embed.shape[0]
        if self.var_scale is None:
            self.var_scale = np.ones(nfull)
        self.var_scale = np.asarray(self.var_scale, dtype=float)
        if self.var_scale.shape != (nfull,):
            raise ValueError("var_scale must have one entry per decision variable")
        self.shift = np.zeros(nfull) if self.shift is None else np.asarray(self.shift, float)
        if self.shift.shape != (nfull,):
            raise ValueError("shift must have one entry per decision variable")
        if self.basis is not None:
            self.basis = sp.csr_matrix(self.basis)
            if self.basis.shape != (nfull, nfull):
                raise ValueError("basis must be square over the decision variables")
        for c in self.cones:
            if c.G.shape[1] != self.nvar:
                raise ValueError(f"cone {c.label!r} references {c.G.shape[1]} variables")

    def decision(self, y) -> np.ndarray:
        """Map solver variables back to the original decision vector."""
        y = np.asarray(y, dtype=float)
        full = y if self.embed is None else self.embed @ y
        x = self.var_scale * (self.shift + full)
        return x if self.basis is None else self.basis @ x

    def cone_min_eigs(self, y) -> np.ndarray:
        return np.array([min_eigenvalue(c.matrix(y)) for c in self.cones])

    def to_json(self) -> str:
        cones = []
        for c in self.cones:
            coo = c.G.tocoo()
            cones.append({
                "dim": c.dim, "label": c.label, "g0": c.g0.tolist(),
                "triplets": [[int(a), int(b), float(v)]
                             for a, b, v in zip(coo.row, coo.col, coo.data)],
            })
        return json.dumps({"nvar": self.nvar, "bound": self.bound,
                           "var_scale": self.var_scale.tolist(), "cones": cones,
                           "shift": self.shift.tolist(), "embed": _sparse_json(self.embed),
                           "basis": _sparse_json(self.basis)})

    @classmethod
    def from_json(cls, text: str) -> "SdpProblem":
        data = json.loads(text)
        nvar = int(data["nvar"])
        cones = []
        for c in data["cones"]:
            m = c["dim"] * (c["dim"] + 1) // 2
            trip = np.array(c["triplets"], dtype=float).reshape(-1, 3)
            G = sp.csr_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))),
                              shape=(m, nvar))
            cones.append(SdpCone(c["dim"], c["g0"], G, c.get("label", "")))
        return cls(nvar, cones, np.array(data["var_scale"]), float(data["bound"]),
                   data.get("shift"), _sparse_from_json(data.get("embed")),
                   _sparse_from_json(data.get("basis")))


@dataclass
class SolverOptions:
    max_iter: int = 500
    tol: float = 1e-8
    recheck_slack: float = 0.0
    backend: str = "ipm"
    bound: float | None = None
    direct_method: str = "qdldl"
    target: float | None = None
    verbose: bool = False


@dataclass
class SdpSolution:
    status: str
    x: np.ndarray | None
    t: float | None
    cone_min_eigs: np.ndarray | None
    iterations: int
    seconds: float
    message: str = ""
    y: np.ndarray | None = None

    @property
    def margin(self) -> float | None:
        if self.cone_min_eigs is None or len(self.cone_min_eigs) == 0:
            return None
        return float(self.cone_min_eigs.min())


def _stack(problem: SdpProblem, bound: float):
    """Phase-I data over ``z = [y, t]``: ``A z + s = b`` with cone list."""
    n = problem.nvar
    blocks, rhs = [], []
    for c in problem.cones:
        eye = svec(np.eye(c.dim))
        blocks.append(sp.hstack([-c.G, sp.csr_matrix(-eye.reshape(-1, 1))]))
        rhs.append(c.g0)
    box = sp.hstack([sp.identity(n), sp.csr_matrix((n, 1))])
    blocks += [box, -box]
    rhs += [np.full(n, bound), np.full(n, bound)]
    A = sp.vstack(blocks, format="csc")
    b = np.concatenate(rhs)
    return A, b


def _solve_clarabel(problem, opts, bound):
    import clarabel

    n = problem.nvar
    A, b = _stack(problem, bound)
    P = sp.csc_matrix((n + 1, n + 1))
    q = np.zeros(n + 1)
    q[-1] = 1.0
    cones = [clarabel.PSDTriangleConeT(c.dim) for c in problem.cones]
    cones.append(clarabel.NonnegativeConeT(2 * n))
    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.max_iter = opts.max_iter
    settings.presolve_enable = False
    settings.direct_solve_method = opts.direct_method
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    sol = solver.solve()
    status = str(sol.status)
    ok = status in ("Solved", "AlmostSolved")
    z = np.asarray(sol.x, dtype=float)
    return ok, z[:n], float(z[n]), int(sol.iterations), status, None


def _solve_ipm(problem, opts, bound):
    from .ipm import solve_phase1

    # a feasibility verdict needs t < -tol only; stop well past it, not at the optimum
    target = 100.0 * opts.tol if opts.target is None else opts.target
    res = solve_phase1([(c.dim, c.g0, c.G) for c in problem.cones], problem.nvar, bound,
                       max_iter=opts.max_iter, tol=opts.tol, target=target,
                       verbose=opts.verbose)
    ok = res.status in ("target", "infeasible", "converged", "boundary")
    return ok, res.y, res.t, res.iterations, res.status, res.lower


def _solve_cvxopt(problem, opts, bound):
    import cvxopt
    from cvxopt import solvers

    n = problem.nvar
    # cvxopt 's' cones are full column-major symmetric matrices: G z + s = h
    rows_l = sp.vstack([sp.hstack([sp.identity(n), sp.csr_matrix((n, 1))]),
                        sp.hstack([-sp.identity(n), sp.csr_matrix((n, 1))])])
    h_parts = [np.full(2 * n, bound)]
    g_parts = [rows_l]
    dims = {"l": 2 * n, "q": [], "s": []}
    for c in problem.cones:
        d = c.dim
        i, j, w = svec_indices(d)
        # full-matrix entry (p, q) column-major picks svec entry of (min, max)
        full_rows, full_src, full_w = [], [], []
        pos = {}
        for k, (a, bb) in enumerate(zip(i, j)):
            pos[(a, bb)] = k
        for col in range(d):
            for row in range(d):
                a, bb = min(row, col), max(row, col)
                k = pos[(a, bb)]
                full_rows.append(col * d + row)
                full_src.append(k)
                full_w.append(1.0 / w[k])
        T = sp.csr_matrix((full_w, (full_rows, full_src)), shape=(d * d, len(i)))
        Gfull = T @ c.G
        eye = np.eye(d).ravel(order="F")
        g_parts.append(sp.hstack([-Gfull, sp.csr_matrix(-eye.reshape(-1, 1))]))
        h_parts.append(T @ c.g0)
        dims["s"].append(d)
    G = sp.vstack(g_parts).tocoo()
    h = np.concatenate(h_parts)
    cG = cvxopt.spmatrix(G.data.tolist(), G.row.tolist(), G.col.tolist(), size=G.shape)
    cvec = np.zeros(n + 1)
    cvec[-1] = 1.0
    old = dict(solvers.options)
    solvers.options.update({"show_progress": opts.verbose, "maxiters": opts.max_iter})
    try:
        res = solvers.conelp(cvxopt.matrix(cvec), cG, cvxopt.matrix(h), dims)
    finally:
        solvers.options.clear()
        solvers.options.update(old)
    ok = res["status"] == "optimal"
    if res["x"] is None:
        return False, np.zeros(n), float("nan"), int(res.get("iterations", 0)), res["status"], None
    z = np.array(res["x"]).ravel()
    lower = float(res["dual objective"]) if ok else None
    return ok, z[:n], float(z[n]), int(res.get("iterations", 0)), res["status"], lower


BACKENDS = {"ipm": _solve_ipm, "clarabel": _solve_clarabel, "cvxopt": _solve_cvxopt}


def solve_feasibility(problem: SdpProblem, options: SolverOptions | None = None) -> SdpSolution:
    """Decide feasibility of every cone; the verdict is re-checked by eigenvalues."""
    opts = options or SolverOptions()
    if opts.backend not in BACKENDS:
        raise ValueError(f"unknown backend {opts.backend!r}; choose from {sorted(BACKENDS)}")
    if not problem.cones:
        raise ValueError("problem has no cones")
    bound = problem.bound if opts.bound is None else opts.bound
    t0 = time.perf_counter()
    try:
        ok, y, t, iters, msg, lower = BACKENDS[opts.backend](problem, opts, bound)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("backend %s failed: %s", opts.backend, exc)
        return SdpSolution(INCONCLUSIVE, None, None, None, 0,
                           time.perf_counter() - t0, f"numerical breakdown: {exc}")
    seconds = time.perf_counter() - t0
    if not np.all(np.isfinite(y)) or not np.isfinite(t):
        return SdpSolution(INCONCLUSIVE, None, None, None, iters, seconds,
                           f"non-finite iterate ({msg})")
    eigs = problem.cone_min_eigs(y)
    x = problem.decision(y)
    if t < -opts.tol:
        # any interior iterate with t < 0 is a certificate, converged or not
        if eigs.min() >= -opts.recheck_slack:
            status, note = FEASIBLE, msg
        else:
            status, note = INCONCLUSIVE, (
                f"solver reported t*={t:.3g} but re-check found eigenvalue {eigs.min():.3g}")
    elif (lower if lower is not None else t) > opts.tol:
        status, note = INFEASIBLE, msg
    elif not ok:
        status, note = INCONCLUSIVE, f"solver stopped: {msg}"
    else:
        status, note = INCONCLUSIVE, f"t*={t:.3g} within tolerance of the boundary"
    return SdpSolution(status, x, t, eigs, iters, seconds, note, y)
