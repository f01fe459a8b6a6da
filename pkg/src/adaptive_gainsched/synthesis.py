"""Controller synthesis: solve the LMIs, extract gains, re-check the certificate."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .assembly import (
    ANNIHILATORS,
    THETA_FORMS,
    build_synthesis_program,
    compile_standard_form,
)
from .geometry import MISMATCH_SETS, parameter_vertices
from .model import PolytopicSystem, random_delta_point, random_simplex_point
from .sdp import FEASIBLE, INCONCLUSIVE, INFEASIBLE, SolverOptions, solve_feasibility

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
EXTRACTION_TOL = 1e-8


@dataclass
class SynthesisOptions:
    mu: float = 1e-11
    eps: float = 1e-8
    solver: SolverOptions = field(default_factory=SolverOptions)
    certificate_samples: int = 1000
    seed: int = 0
    annihilator: str = "coupled"
    mismatch: str = "simplex"
    theta_form: str = "consistent"
    bound: float = 1e3

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.annihilator not in ANNIHILATORS:
            raise ValueError(f"annihilator must be one of {ANNIHILATORS}")
        if self.mismatch not in MISMATCH_SETS:
            raise ValueError(f"mismatch must be one of {MISMATCH_SETS}")
        if self.theta_form not in THETA_FORMS:
            raise ValueError(f"theta_form must be one of {THETA_FORMS}")
        if self.certificate_samples < 0:
            raise ValueError("certificate_samples must be nonnegative")
        if isinstance(self.solver, dict):
            self.solver = SolverOptions(**self.solver)

    def to_dict(self) -> dict:
        return asdict(self)


def _he(M):
    return M + M.T


@dataclass(frozen=True)
class ControllerRealization:
    """Gains and certificate matrices recovered from a feasible solve.

    Arrays are stacked over the vertex index: ``K[i]``, ``P[i]``, ``X[i]``
    and ``L[i, j]``. Derived: ``Pcal[i] = N^-T P_i N^-1`` and the adaptation
    matrices ``M[k, j] = N^-T L_kj N^-1 + He(N^-T B_k K_j)``.
    """

    system: PolytopicSystem
    mu: float
    K: np.ndarray
    N: np.ndarray
    P: np.ndarray
    L: np.ndarray
    X: np.ndarray
    slack: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.K.shape[0]

    @property
    def n_inv(self) -> np.ndarray:
        return np.linalg.inv(self.N)

    @property
    def Pcal(self) -> np.ndarray:
        Ni = self.n_inv
        out = np.stack([Ni.T @ p @ Ni for p in self.P])
        return 0.5 * (out + out.transpose(0, 2, 1))

    @property
    def M(self) -> np.ndarray:
        Ni = self.n_inv
        r = self.r
        out = np.empty((r, r) + self.N.shape)
        for k in range(r):
            for j in range(r):
                out[k, j] = Ni.T @ self.L[k, j] @ Ni + _he(Ni.T @ self.system.B[k] @ self.K[j])
        return out

    @property
    def n_condition(self) -> float:
        return float(np.linalg.cond(self.N))

    def with_gains(self, K) -> "ControllerRealization":
        """Copy with replaced gains; the certificate is *not* recomputed."""
        return ControllerRealization(self.system, self.mu, np.array(K, dtype=float), self.N,
                                     self.P, self.L, self.X, self.slack, dict(self.meta))

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(), "mu": self.mu,
            "K": self.K.tolist(), "N": self.N.tolist(), "P": self.P.tolist(),
            "L": self.L.tolist(), "X": self.X.tolist(), "slack": self.slack.tolist(),
            "Pcal": self.Pcal.tolist(), "M": self.M.tolist(), "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControllerRealization":
        return cls(PolytopicSystem.from_dict(data["system"]), float(data["mu"]),
                   np.array(data["K"], dtype=float), np.array(data["N"], dtype=float),
                   np.array(data["P"], dtype=float), np.array(data["L"], dtype=float),
                   np.array(data["X"], dtype=float), np.array(data["slack"], dtype=float),
                   dict(data.get("meta", {})))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ControllerRealization":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        """Short content hash of gains and certificate, for run manifests."""
        h = hashlib.sha256()
        for arr in (self.K, self.N, self.P, self.L):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        h.update(repr(self.mu).encode())
        return h.hexdigest()[:16]


@dataclass
class SynthesisResult:
    status: str
    realization: ControllerRealization | None
    message: str
    seconds: float
    margin: float | None = None
    iterations: int = 0
    report: "CertificateReport | None" = None

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def certificate_matrix(sys: PolytopicSystem, P, N, X, L, mu, alpha, delta) -> np.ndarray:
    """``sum a_i a_j Qhat_ij - d_i d_j Psi_ij - a_i d_j Phi_ij``, symmetrised."""
    nx = sys.n_x
    r = sys.r
    Z = np.zeros((nx, nx))
    out = np.zeros((2 * nx, 2 * nx))
    for i in range(r):
        for j in range(r):
            AN = sys.A[i] @ N + sys.B[i] @ X[j]
            BX = sys.B[i] @ X[j]
            w = alpha[i] * alpha[j]
            if w:
                low = P[i] - N.T + mu * AN
                out += w * np.block([[_he(AN), low.T], [low, -mu * _he(N)]])
            w = delta[i] * delta[j]
            if w:
                out -= w * np.block([[_he(BX) + L[i, j], Z], [Z, Z]])
            w = alpha[i] * delta[j]
            if w:
                low = -mu * BX
                out -= w * np.block([[L[i, j], low.T], [low, Z]])
    return 0.5 * (out + out.T)


@dataclass
class CertificateReport:
    passed: bool
    worst: float
    worst_alpha: list
    worst_delta: list
    max_eigs: np.ndarray
    p_min_eig: float
    samples: int

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict}: {self.samples} samples, worst max-eigenvalue {self.worst:.3e}, "
                f"min eig(P_i) {self.p_min_eig:.3e}")


def certificate_samples(r: int, n_samples: int, seed=0) -> list:
    """Vertex pairs first (``alpha = e_m``, ``alpha + delta = e_p``), then random valid pairs."""
    pts = [(a, d) for _, a, d in parameter_vertices(r, "simplex")]
    rng = np.random.default_rng(seed)
    while len(pts) < n_samples:
        a = random_simplex_point(r, rng)
        pts.append((a, random_delta_point(r, rng, a)))
    return pts


def verify_certificate(sys: PolytopicSystem, realization: ControllerRealization,
                       n_samples: int = 1000, seed=0) -> CertificateReport:
    """Re-evaluate the certificate on sampled ``(alpha, delta)`` pairs.

    Uses ``X_j = K_j N`` so that edited gains are caught. Eigenvalues are
    taken after the congruence ``diag(I, mu^-1/2 I)``, which keeps the sign
    and balances the derivative rows.
    """
    R = realization
    X = np.stack([k @ R.N for k in R.K])
    d = np.concatenate([np.ones(sys.n_x), np.full(sys.n_x, R.mu ** -0.5)])
    pts = certificate_samples(sys.r, max(n_samples, 0), seed)
    eigs = np.empty(len(pts))
    for s, (a, dl) in enumerate(pts):
        W = certificate_matrix(sys, R.P, R.N, X, R.L, R.mu, a, dl)
        eigs[s] = np.linalg.eigvalsh(d[:, None] * W * d[None, :])[-1]
    p_min = min(np.linalg.eigvalsh(0.5 * (p + p.T))[0] for p in R.P)
    w = int(np.argmax(eigs))
    return CertificateReport(bool(np.all(eigs < 0) and p_min > 0), float(eigs[w]),
                             pts[w][0].tolist(), pts[w][1].tolist(), eigs, float(p_min),
                             len(pts))


def hurwitz_check(sys: PolytopicSystem, realization: ControllerRealization) -> list:
    """Spectral abscissa of ``A_i + B_i K_i`` for every vertex."""
    return [float(np.linalg.eigvals(a + b @ k).real.max())
            for a, b, k in zip(sys.A, sys.B, realization.K)]


def extract_realization(sys, program, x, mu, meta=None) -> ControllerRealization:
    vals = program.layout.unpack(x)
    r = sys.r
    N = vals["N"]
    P = np.stack([vals[f"P{i + 1}"] for i in range(r)])
    X = np.stack([vals[f"X{i + 1}"] for i in range(r)])
    L = np.stack([np.stack([vals[f"L{i + 1}_{j + 1}"] for j in range(r)]) for i in range(r)])
    K = np.stack([np.linalg.solve(N.T, xi.T).T for xi in X])
    return ControllerRealization(sys, mu, K, N, P, L, X, vals["Nslack"], dict(meta or {}))


def synthesize(sys: PolytopicSystem, options: SynthesisOptions | None = None,
               **overrides) -> SynthesisResult:
    """Solve the LMIs for ``sys``; on success extract and verify a realization.

    Keyword overrides replace fields of ``options`` (e.g. ``mu=1e-3``).
    """
    opts = options or SynthesisOptions()
    if overrides:
        opts = SynthesisOptions(**{**opts.to_dict(), **overrides})
    if sys.r < 2:
        raise ValueError("synthesis needs at least two vertices")
    t0 = time.perf_counter()
    program = build_synthesis_program(sys, mu=opts.mu, eps=opts.eps,
                                      theta_form=opts.theta_form,
                                      annihilator=opts.annihilator, mismatch=opts.mismatch)
    problem = compile_standard_form(program, bound=opts.bound)
    sol = solve_feasibility(problem, opts.solver)
    base = dict(status=sol.status, realization=None, message=sol.message,
                seconds=0.0, margin=sol.margin, iterations=sol.iterations)
    if sol.status != FEASIBLE:
        base["seconds"] = time.perf_counter() - t0
        return SynthesisResult(**base)

    cond = float(np.linalg.cond(program.layout.unpack(sol.x)["N"]))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        base.update(status=INCONCLUSIVE, seconds=time.perf_counter() - t0,
                    message=f"N is ill-conditioned (cond={cond:.3g} > {COND_LIMIT:.0e})")
        return SynthesisResult(**base)
    meta = {"margin": sol.margin, "iterations": sol.iterations,
            "solve_seconds": sol.seconds, "n_condition": cond, "options": opts.to_dict(),
            "program": program.meta}
    real = extract_realization(sys, program, sol.x, opts.mu, meta)

    scale = np.maximum(1.0, np.abs(real.X).max(axis=(1, 2)))
    resid = np.abs(np.einsum("iuk,kl->iul", real.K, real.N) - real.X).max(axis=(1, 2))
    if np.any(resid > EXTRACTION_TOL * scale):
        base.update(status=INCONCLUSIVE, seconds=time.perf_counter() - t0,
                    message=f"gain extraction residual {resid.max():.3g} too large")
        return SynthesisResult(**base)

    report = verify_certificate(sys, real, opts.certificate_samples, opts.seed)
    base.update(seconds=time.perf_counter() - t0, report=report)
    if not report.passed:
        base.update(status=INCONCLUSIVE, message=f"certificate re-check failed: {report.summary()}")
        return SynthesisResult(**base)
    real.meta["certificate"] = report.summary()
    base.update(realization=real, message=f"{sol.message}; {report.summary()}")
    return SynthesisResult(**base)


__all__ = [
    "COND_LIMIT", "CertificateReport", "ControllerRealization", "FEASIBLE", "INCONCLUSIVE",
    "INFEASIBLE", "SynthesisOptions", "SynthesisResult", "certificate_matrix",
    "certificate_samples", "extract_realization", "hurwitz_check", "synthesize",
    "verify_certificate",
]
