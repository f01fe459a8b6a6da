"""Symbolic assembly of the adaptive gain-scheduling LMIs.

Decision variables: ``P_i`` (symmetric), ``L_ij``, ``N``, ``X_i`` and the
slack multiplier ``Nslack`` of the structural relaxation. Indices in names
are 1-based (``P1``, ``L2_3``, ``X4``); function arguments are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .affine import AffineMatrixExpr, DecisionLayout, bmat
from .geometry import (
    annihilator_rows,
    affine_annihilator_at,
    affine_annihilator_rows,
    combined_annihilator_at,
    coupled_annihilator_at,
    coupled_annihilator_rows,
    pairwise_annihilator_at,
    parameter_vertices,
)
from .model import PolytopicSystem

LESS = "<"      # expr < -eps I
GREATER = ">"   # expr > +eps I

THETA_FORMS = ("consistent", "printed")
ANNIHILATOR_BUILDERS = {
    "affine": affine_annihilator_at,
    "coupled": coupled_annihilator_at,
    "pairwise": pairwise_annihilator_at,
    "blockdiag": combined_annihilator_at,
}
ANNIHILATORS = tuple(ANNIHILATOR_BUILDERS)


def slack_columns(r: int, nx: int, annihilator: str = "coupled") -> int:
    if annihilator == "affine":
        return affine_annihilator_rows(r, nx)
    if annihilator == "coupled":
        return coupled_annihilator_rows(r, nx)
    if annihilator == "pairwise":
        return coupled_annihilator_rows(r, nx, full=True)
    if annihilator == "blockdiag":
        return annihilator_rows(r, nx)
    raise ValueError(f"unknown annihilator {annihilator!r}; choose from {ANNIHILATORS}")


def build_layout(sys: PolytopicSystem, annihilator: str = "coupled") -> DecisionLayout:
    r, nx, nu = sys.r, sys.n_x, sys.n_u
    layout = DecisionLayout()
    for i in range(r):
        layout.add(f"P{i + 1}", (nx, nx), symmetric=True)
    for i in range(r):
        for j in range(r):
            layout.add(f"L{i + 1}_{j + 1}", (nx, nx))
    layout.add("N", (nx, nx))
    for i in range(r):
        layout.add(f"X{i + 1}", (nu, nx))
    layout.add("Nslack", (4 * nx * r, slack_columns(r, nx, annihilator)))
    return layout.freeze()


def expected_scalar_count(r: int, nx: int, nu: int, annihilator: str = "coupled") -> int:
    return (r * nx * (nx + 1) // 2 + r * r * nx * nx + nx * nx + r * nu * nx
            + 4 * nx * r * slack_columns(r, nx, annihilator))


def _closed_loop_term(sys, layout, i, j):
    """``A_i N + B_i X_j``."""
    return sys.A[i] @ layout.var("N") + sys.B[i] @ layout.var(f"X{j + 1}")


def build_Qhat(sys: PolytopicSystem, layout: DecisionLayout, mu: float, i: int, j: int):
    """``[[He(A_i N + B_i X_j), *], [P_i - N^T + mu (A_i N + B_i X_j), -mu (N + N^T)]]``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    nv = layout.nvar
    N = layout.var("N")
    AN = _closed_loop_term(sys, layout, i, j)
    lower = layout.var(f"P{i + 1}") - N.T + mu * AN
    out = bmat([[AN.he(), lower.T], [lower, -mu * N.he()]], nv)
    out.symmetric = True
    return out


def build_Psi_Phi(sys: PolytopicSystem, layout: DecisionLayout, mu: float, i: int, j: int):
    """``Psi = [[He(B_i X_j) + L_ij, *], [0, 0]]``, ``Phi = [[L_ij, *], [-mu B_i X_j, 0]]``.

    The star in ``Psi`` mirrors the zero lower-left block. ``Phi`` is
    symmetric only when ``L_ij`` is; its quadratic form is what matters.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    nv = layout.nvar
    nx = sys.n_x
    L = layout.var(f"L{i + 1}_{j + 1}")
    BX = sys.B[i] @ layout.var(f"X{j + 1}")
    zero = AffineMatrixExpr.zeros((nx, nx), nv)
    psi = bmat([[BX.he() + L, zero], [zero, zero]], nv)
    low = -mu * BX
    phi = bmat([[L, low.T], [low, zero]], nv)
    return psi, phi


def build_theta(sys: PolytopicSystem, layout: DecisionLayout, mu: float, form: str = "consistent"):
    """Lifted matrix whose quadratic form in ``[alpha kron I; delta kron I]`` is
    ``sum a_i a_j Qhat_ij - sum d_i d_j Psi_ij - sum a_i d_j Phi_ij``.

    ``form="printed"`` reproduces the alternative placement with ``+Psi`` in
    the lower-right corner and ``Phi_ij`` at block ``(i, j)`` of the lower-left
    corner; it does *not* satisfy the identity above and exists for comparison.
    """
    if form not in THETA_FORMS:
        raise ValueError(f"unknown theta form {form!r}")
    r, nv = sys.r, layout.nvar
    if r < 2:
        raise ValueError("r must be at least 2")
    Q = [[build_Qhat(sys, layout, mu, i, j) for j in range(r)] for i in range(r)]
    PP = [[build_Psi_Phi(sys, layout, mu, i, j) for j in range(r)] for i in range(r)]
    Qb = bmat(Q, nv)
    Psib = bmat([[PP[i][j][0] for j in range(r)] for i in range(r)], nv)
    if form == "consistent":
        Phib = bmat([[PP[q][p][1] for q in range(r)] for p in range(r)], nv)
        psi_sign = -1.0
    else:
        Phib = bmat([[PP[p][q][1] for q in range(r)] for p in range(r)], nv)
        psi_sign = 1.0
    low = -0.5 * Phib
    theta = bmat([[Qb.sym(), low.T], [low, psi_sign * Psib.sym()]], nv)
    theta.symmetric = True
    return theta


def theta_scaling(sys: PolytopicSystem, mu: float) -> np.ndarray:
    """Diagonal congruence for the lifted matrix: derivative rows scaled by ``mu**-0.5``.

    ``D M D < 0`` iff ``M < 0``; the scaling lifts the ``-mu (N + N^T)``
    blocks to unit order.
    """
    nx = sys.n_x
    unit = np.concatenate([np.ones(nx), np.full(nx, mu ** -0.5)])
    return np.tile(unit, 2 * sys.r)


@dataclass
class LmiConstraint:
    expr: AffineMatrixExpr
    sense: str
    label: str = ""
    scale: np.ndarray | None = None

    def __post_init__(self):
        if self.sense not in (LESS, GREATER):
            raise ValueError(f"unknown sense {self.sense!r}")
        s = self.expr.shape
        if s[0] != s[1]:
            raise ValueError("constraint expressions must be square")
        if self.scale is not None:
            self.scale = np.asarray(self.scale, dtype=float)
            if self.scale.shape != (s[0],) or np.any(self.scale <= 0):
                raise ValueError("scale must be a positive vector matching the constraint")

    @property
    def size(self) -> int:
        return self.expr.shape[0]

    def canonical(self, x) -> np.ndarray:
        """Matrix required to be positive definite with margin: ``+-F(x)`` scaled."""
        val = self.expr.evaluate(x)
        val = 0.5 * (val + val.T)
        if self.sense == LESS:
            val = -val
        if self.scale is not None:
            val = self.scale[:, None] * val * self.scale[None, :]
        return val


@dataclass
class LmiProgram:
    layout: DecisionLayout
    constraints: list = field(default_factory=list)
    eps: float = 1e-8
    var_scale: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    basis: sp.csr_matrix | None = None

    def add(self, constraint: LmiConstraint):
        if constraint.expr.nvar != self.layout.nvar:
            raise ValueError("constraint refers to a different decision layout")
        self.constraints.append(constraint)

    def __len__(self):
        return len(self.constraints)

    def margins(self, x) -> np.ndarray:
        """Smallest eigenvalue of every canonical (positive-definite side) matrix."""
        return np.array([np.linalg.eigvalsh(c.canonical(x))[0] for c in self.constraints])

    def to_json(self) -> str:
        cons = []
        for c in self.constraints:
            coo = c.expr.coef.tocoo()
            cons.append({
                "label": c.label, "sense": c.sense, "size": c.size,
                "constant": c.expr.const.tolist(),
                "scale": None if c.scale is None else c.scale.tolist(),
                "triplets": [[int(r_), int(k), float(v)]
                             for r_, k, v in zip(coo.row, coo.col, coo.data)],
            })
        return json.dumps({
            "nvar": self.layout.nvar, "eps": self.eps,
            "variables": self.layout.table(), "constraints": cons,
            "var_scale": None if self.var_scale is None else self.var_scale.tolist(),
            "meta": self.meta,
        })


def slack_variable_scale(sys: PolytopicSystem, layout: DecisionLayout, mu: float) -> np.ndarray:
    """Per-scalar unit change making the congruence-scaled slack terms unit order.

    Entry ``(a, b)`` of the slack multiplier enters the scaled constraint with
    weight ``d_a d_b``; dividing it out keeps the solver's variables balanced.
    """
    v = np.ones(layout.nvar)
    spec = layout["Nslack"]
    d = theta_scaling(sys, mu)
    rows = spec.shape[1]
    # column scale of the annihilator side follows the same [z, dz] pattern
    unit = np.concatenate([np.ones(sys.n_x), np.full(sys.n_x, mu ** -0.5)])
    dcol = np.tile(unit, rows // (2 * sys.n_x))
    v[spec.offset:spec.offset + spec.size] = 1.0 / np.outer(d, dcol).ravel()
    return v


def lyapunov_basis(layout: DecisionLayout, r: int, mu: float) -> sp.csr_matrix:
    """Change of variables ``x = T z`` separating the stiff ``P_i - N^T`` directions.

    In ``z`` the ``N`` slot holds ``Z`` with ``N = sym(Z) + sqrt(mu) skew(Z)``
    and each ``P_i`` slot holds ``E_i`` with ``P_i = sym(Z) + sqrt(mu) E_i``.
    Feasible points need ``P_i - N^T = O(sqrt(mu))``; in ``z`` that difference
    is a unit-order variable instead of a cancellation. Other slots map to
    themselves.
    """
    root = np.sqrt(mu)
    n = layout.nvar
    T = sp.lil_matrix((n, n))
    fixed = {"N"} | {f"P{i + 1}" for i in range(r)}
    for name, spec in layout.specs.items():
        if name not in fixed:
            idx = np.arange(spec.offset, spec.offset + spec.size)
            T[idx, idx] = 1.0
    nN = layout["N"]
    for k in range(nN.size):
        e = np.zeros(nN.size)
        e[k] = 1.0
        Z = e.reshape(nN.shape)
        sym, skew = 0.5 * (Z + Z.T), 0.5 * (Z - Z.T)
        col = layout.pack({"N": sym + root * skew,
                           **{f"P{i + 1}": sym for i in range(r)}})
        T[:, nN.offset + k] = col.reshape(-1, 1)
    for i in range(r):
        spec = layout[f"P{i + 1}"]
        iu = np.triu_indices(spec.shape[0])
        for k, (a_, b_) in enumerate(zip(*iu)):
            E = np.zeros(spec.shape)
            E[a_, b_] = E[b_, a_] = 1.0
            col = layout.pack({f"P{i + 1}": root * E})
            T[:, spec.offset + k] = col.reshape(-1, 1)
    return T.tocsr()


def build_synthesis_program(sys: PolytopicSystem, layout: DecisionLayout | None = None,
                            mu: float = 1e-11, eps: float = 1e-8, *,
                            theta_form: str = "consistent", annihilator: str = "coupled",
                            mismatch: str = "simplex", scaled: bool = True) -> LmiProgram:
    """Finite LMI family: ``P_i > eps I`` and, at every parameter vertex
    ``(alpha, delta)``, ``Theta + He(Nslack B(alpha, delta)) < -eps I``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if layout is None:
        layout = build_layout(sys, annihilator)
    r, nx = sys.r, sys.n_x
    if layout["Nslack"].shape[1] != slack_columns(r, nx, annihilator):
        raise ValueError("layout was built for a different annihilator")
    make_ann = ANNIHILATOR_BUILDERS[annihilator]
    points = parameter_vertices(r, mismatch)
    theta = build_theta(sys, layout, mu, form=theta_form)
    slack = layout.var("Nslack")
    scale = theta_scaling(sys, mu) if scaled else None
    prog = LmiProgram(layout, eps=eps,
                      var_scale=slack_variable_scale(sys, layout, mu) if scaled else None,
                      meta={"mu": mu, "r": r, "n_x": nx, "n_u": sys.n_u,
                            "theta_form": theta_form, "annihilator": annihilator,
                            "mismatch": mismatch, "vertex_pairs": len(points)},
                      basis=lyapunov_basis(layout, r, mu) if scaled else None)
    for i in range(r):
        prog.add(LmiConstraint(layout.var(f"P{i + 1}"), GREATER, f"P{i + 1}"))
    for label, alpha, delta in points:
        expr = theta + (slack @ make_ann(alpha, delta, nx)).he()
        expr.symmetric = True
        prog.add(LmiConstraint(expr, LESS, f"theta[{label}]", scale))
    return prog


def trace_normalization(layout: DecisionLayout, r: int) -> tuple:
    """Coefficients ``a`` and right-hand side ``b`` of ``sum_i trace(P_i) = b``.

    The LMIs are homogeneous, so without this the zero decision vector sits
    on the boundary of every instance and infeasibility cannot be certified.
    """
    a = layout.pack({f"P{i + 1}": np.eye(layout[f"P{i + 1}"].shape[0]) for i in range(r)})
    return a, float(r)


def _eliminate(a, b, G_list, g0_list):
    """Substitute ``a . y = b`` out of the cones by solving for its largest entry."""
    p = int(np.argmax(np.abs(a)))
    n = a.size
    keep = np.delete(np.arange(n), p)
    embed = sp.lil_matrix((n, n - 1))
    embed[keep, np.arange(n - 1)] = 1.0
    embed[p, :] = -a[keep] / a[p]
    embed = embed.tocsr()
    shift = np.zeros(n)
    shift[p] = b / a[p]
    G_out = [(G @ embed).tocsr() for G in G_list]
    g_out = [g0 + G @ shift for G, g0 in zip(G_list, g0_list)]
    return G_out, g_out, shift, embed


def compile_standard_form(program: LmiProgram, bound: float = 1e4, normalize: bool = True):
    """Translate an LMI program into phase-I-ready conic data.

    Each constraint becomes the cone ``D (+-F(x)) D - eps I`` in svec form,
    expressed in the balanced variables ``y = x / var_scale``. With
    ``normalize`` the trace normalisation of the ``P_i`` is eliminated first.
    """
    from .sdp import SdpCone, SdpProblem, svec, svec_indices

    if len(program) == 0:
        raise ValueError("cannot compile an empty program")
    nvar = program.layout.nvar
    vscale = np.ones(nvar) if program.var_scale is None else program.var_scale
    V = sp.diags(vscale)
    if program.basis is not None:
        V = program.basis @ V
    Gs, g0s, dims, labels = [], [], [], []
    for c in program.constraints:
        s = c.size
        sign = -1.0 if c.sense == LESS else 1.0
        d = np.ones(s) if c.scale is None else c.scale
        i, j, w = svec_indices(s)
        rowmap = np.concatenate([i * s + j, j * s + i])
        weights = np.concatenate([0.5 * w * d[i] * d[j]] * 2) * sign
        pick = sp.csr_matrix((weights, (np.tile(np.arange(i.size), 2), rowmap)),
                             shape=(i.size, s * s))
        G = (pick @ c.expr.coef @ V).tocsr()
        G.eliminate_zeros()
        const = sign * (d[:, None] * c.expr.const * d[None, :]) - program.eps * np.eye(s)
        Gs.append(G)
        g0s.append(svec(const))
        dims.append(s)
        labels.append(c.label)
    shift = embed = None
    if normalize:
        r = program.meta.get("r")
        if r is None:
            raise ValueError("normalisation needs the vertex count in program.meta['r']")
        a, b = trace_normalization(program.layout, r)
        a = V.T @ a
        Gs, g0s, shift, embed = _eliminate(a, b, Gs, g0s)
    cones = [SdpCone(s, g0, G, lab) for s, g0, G, lab in zip(dims, g0s, Gs, labels)]
    return SdpProblem(cones[0].G.shape[1], cones, vscale.copy(), bound, shift, embed,
                      program.basis)
