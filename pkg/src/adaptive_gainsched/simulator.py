"""Closed-loop simulation with the adaptive scheduling law."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .model import SIMPLEX_TOL, PolytopicSystem, as_simplex_point, evaluate_combination
from .synthesis import ControllerRealization

SUM_TOL = 1e-12


def g_values(realization: ControllerRealization, x, ahat, gamma: float, M=None) -> np.ndarray:
    """``g_j = -gamma * sum_k ahat_k x' M_kj x``."""
    M = realization.M if M is None else M
    x = np.asarray(x, dtype=float)
    q = np.einsum("i,kjil,l->kj", x, M, x)
    return -gamma * (np.asarray(ahat, dtype=float) @ q)


def adaptation_rhs(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return g - g.mean()


def control_input(realization: ControllerRealization, x, ahat) -> np.ndarray:
    return np.tensordot(np.asarray(ahat, dtype=float), realization.K, axes=1) @ np.asarray(x, dtype=float)


def lyapunov_value(realization: ControllerRealization, x, alpha, ahat, gamma: float,
                   Pcal=None) -> float:
    """``x' P(alpha) x + |ahat - alpha|^2 / (2 gamma)``.

    With ``gamma = 0`` the estimate is frozen and only the quadratic part is
    returned.
    """
    Pcal = realization.Pcal if Pcal is None else Pcal
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    v = float(x @ np.tensordot(alpha, Pcal, axes=1) @ x)
    if gamma > 0:
        v += float(np.sum((np.asarray(ahat, dtype=float) - alpha) ** 2)) / (2.0 * gamma)
    return v


@dataclass
class SimulationConfig:
    """``alpha`` is a constant simplex point or a list of ``(t_start, alpha)``
    segments; the first segment must start at 0."""

    x0: list
    alpha: list
    ahat0: list
    gamma: float = 10.0
    t_end: float = 1.0
    dt: float = 1e-4
    clamp_simplex: bool = False

    def __post_init__(self):
        self.x0 = [float(v) for v in np.ravel(self.x0)]
        self.ahat0 = [float(v) for v in np.ravel(self.ahat0)]
        if abs(sum(self.ahat0) - 1.0) > SUM_TOL:
            raise ValueError("ahat0 must sum to 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= self.dt:
            raise ValueError("t_end must be at least dt")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        segs = self.schedule()
        if segs[0][0] != 0.0 or any(b[0] <= a[0] for a, b in zip(segs, segs[1:])):
            raise ValueError("alpha schedule must start at 0 and increase")

    def schedule(self) -> list:
        a = self.alpha
        if len(a) and isinstance(a[0], (list, tuple)) and len(a[0]) == 2 \
                and isinstance(a[0][1], (list, tuple, np.ndarray)):
            return [(float(t), as_simplex_point(w)) for t, w in a]
        return [(0.0, as_simplex_point(a))]

    @property
    def nsteps(self) -> int:
        return int(round(self.t_end / self.dt))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = [[t, w.tolist()] for t, w in self.schedule()] if len(self.schedule()) > 1 \
            else self.schedule()[0][1].tolist()
        return d


@dataclass
class SimulationTrace:
    t: np.ndarray
    x: np.ndarray
    ahat: np.ndarray
    u: np.ndarray
    V: np.ndarray
    g: np.ndarray
    alpha: np.ndarray
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def sum_drift(self) -> float:
        return float(np.abs(self.ahat.sum(axis=1) - 1.0).max())

    @property
    def in_simplex(self) -> np.ndarray:
        """Per-sample flag: ``ahat`` inside the unit simplex."""
        return self.ahat.min(axis=1) >= -SIMPLEX_TOL

    def lyapunov_increases(self, slack: float = 1e-8) -> np.ndarray:
        """Indices ``k`` where ``V`` grows by more than ``slack * V`` from step k
        to k+1 while ``ahat`` stays in the simplex on both ends."""
        inside = self.in_simplex
        grow = self.V[1:] > self.V[:-1] * (1.0 + slack)
        return np.flatnonzero(grow & inside[1:] & inside[:-1])

    def summary(self) -> dict:
        x0 = np.linalg.norm(self.x[0])
        xf = np.linalg.norm(self.x[-1])
        return {
            "final_norm": float(xf),
            "norm_ratio": float(xf / x0) if x0 > 0 else 0.0,
            "max_sum_drift": self.sum_drift,
            "lyapunov_increases": int(self.lyapunov_increases().size),
            "left_simplex": bool(not self.in_simplex.all()),
            "adaptation_frozen": bool(np.all(self.ahat == self.ahat[0])),
            "diverged": self.diverged,
        }

    def to_csv(self, path):
        nx, r, nu = self.x.shape[1], self.ahat.shape[1], self.u.shape[1]
        header = (["t"] + [f"x_{i + 1}" for i in range(nx)] + [f"ahat_{i + 1}" for i in range(r)]
                  + [f"u_{i + 1}" for i in range(nu)] + ["V"])
        data = np.column_stack([self.t, self.x, self.ahat, self.u, self.V])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(map(lambda row: [repr(float(v)) for v in row], data))

    def write(self, csv_path, manifest_path=None):
        """CSV trace plus a JSON manifest next to it (``<csv>.json`` by default)."""
        csv_path = Path(csv_path)
        self.to_csv(csv_path)
        manifest_path = Path(manifest_path) if manifest_path else csv_path.with_suffix(".json")
        manifest = {**self.meta, "summary": self.summary(), "trace": csv_path.name}
        manifest_path.write_text(json.dumps(manifest, indent=2))
        return manifest_path


def read_trace_csv(path) -> dict:
    """Columns of a trace CSV as float arrays keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {name: data[:, i] for i, name in enumerate(rows[0])}


def simulate(sys: PolytopicSystem, realization: ControllerRealization,
             config: SimulationConfig, implementation=None) -> SimulationTrace:
    """Fixed-step RK4 on ``(x, ahat)`` under ``u = K(ahat) x``.

    On a non-finite state the trace is cut at the last finite sample and
    ``diverged`` is set.
    """
    if realization.K.shape != (sys.r, sys.n_u, sys.n_x):
        raise ValueError("realization does not match the system dimensions")
    x0 = np.asarray(config.x0, dtype=float)
    h0 = np.asarray(config.ahat0, dtype=float)
    if x0.size != sys.n_x or h0.size != sys.r:
        raise ValueError("x0 / ahat0 have the wrong length")
    rk4 = kernels.get("rk4_integrate", implementation)
    K = np.ascontiguousarray(realization.K)
    M = np.ascontiguousarray(realization.M)
    n = config.nsteps
    segs = config.schedule()
    bounds = [min(n, int(round(t / config.dt))) for t, _ in segs] + [n]

    xs = [x0[None, :]]
    hs = [h0[None, :]]
    alphas = [segs[0][1][None, :]]
    diverged = False
    x, h = x0, h0
    for (_, a), lo, hi in zip(segs, bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        A, B = evaluate_combination(sys, a)
        sx, sh, done = rk4((np.ascontiguousarray(A), np.ascontiguousarray(B)), x, h, a, K, M,
                           float(config.gamma), float(config.dt), hi - lo, bool(config.clamp_simplex))
        xs.append(sx[1:done + 1])
        hs.append(sh[1:done + 1])
        alphas.append(np.tile(a, (done, 1)))
        if done < hi - lo:
            diverged = True
            break
        x, h = sx[-1], sh[-1]

    X = np.concatenate(xs)
    H = np.concatenate(hs)
    AL = np.concatenate(alphas)
    t = np.arange(X.shape[0]) * config.dt
    U = np.einsum("sj,jux,sx->su", H, K, X)
    q = np.einsum("si,kjil,sl->skj", X, M, X)
    G = -config.gamma * np.einsum("sk,skj->sj", H, q)
    Pal = np.einsum("si,iab->sab", AL, realization.Pcal)
    V = np.einsum("sa,sab,sb->s", X, Pal, X)
    if config.gamma > 0:
        V = V + ((H - AL) ** 2).sum(axis=1) / (2.0 * config.gamma)
    meta = {"config": config.to_dict(), "realization": realization.digest(),
            "kernel": getattr(rk4, "__module__", "") or kernels.IMPLEMENTATION,
            "steps": int(X.shape[0] - 1)}
    return SimulationTrace(t, X, H, U, V, G, AL, diverged, meta)
