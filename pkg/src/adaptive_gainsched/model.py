"""Polytopic uncertain linear systems and simplex-valued parameters."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SIMPLEX_TOL = 1e-12


def _readonly(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PolytopicSystem:
    """``dx/dt = A(alpha) x + B(alpha) u`` with ``[A B](alpha) = sum alpha_i [A_i B_i]``."""

    A: tuple
    B: tuple

    def __post_init__(self):
        A = tuple(_readonly(np.atleast_2d(a)) for a in self.A)
        B = tuple(_readonly(np.atleast_2d(b)) for b in self.B)
        if len(A) == 0 or len(A) != len(B):
            raise ValueError("need the same positive number of A and B vertices")
        nx = A[0].shape[0]
        nu = B[0].shape[1]
        for a, b in zip(A, B):
            if a.shape != (nx, nx):
                raise ValueError(f"A vertex of shape {a.shape}, expected {(nx, nx)}")
            if b.shape != (nx, nu):
                raise ValueError(f"B vertex of shape {b.shape}, expected {(nx, nu)}")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise ValueError("vertex matrices must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def r(self) -> int:
        return len(self.A)

    @property
    def n_x(self) -> int:
        return self.A[0].shape[0]

    @property
    def n_u(self) -> int:
        return self.B[0].shape[1]

    def to_dict(self) -> dict:
        return {
            "r": self.r, "n_x": self.n_x, "n_u": self.n_u,
            "A": [a.tolist() for a in self.A],
            "B": [b.tolist() for b in self.B],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolytopicSystem":
        sys = cls(tuple(data["A"]), tuple(data["B"]))
        for key in ("r", "n_x", "n_u"):
            if key in data and int(data[key]) != getattr(sys, key):
                raise ValueError(f"declared {key}={data[key]} disagrees with matrices")
        return sys

    @classmethod
    def load(cls, path) -> "PolytopicSystem":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def as_simplex_point(w, r=None, tol=SIMPLEX_TOL) -> np.ndarray:
    """Validate convex weights. Out-of-tolerance input is rejected, not renormalised."""
    w = np.asarray(w, dtype=float).ravel()
    if r is not None and w.size != r:
        raise ValueError(f"simplex point has length {w.size}, expected {r}")
    if not np.all(np.isfinite(w)):
        raise ValueError("simplex point must be finite")
    if abs(w.sum() - 1.0) > tol:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    if np.any(w < -tol):
        raise ValueError("weights must be nonnegative")
    return w


def as_delta_point(d, r=None, tol=SIMPLEX_TOL) -> np.ndarray:
    d = np.asarray(d, dtype=float).ravel()
    if r is not None and d.size != r:
        raise ValueError(f"mismatch vector has length {d.size}, expected {r}")
    if not np.all(np.isfinite(d)):
        raise ValueError("mismatch vector must be finite")
    if abs(d.sum()) > tol:
        raise ValueError(f"mismatch entries sum to {d.sum()!r}, not 0")
    if np.any(np.abs(d) > 1.0 + tol):
        raise ValueError("mismatch entries must lie in [-1, 1]")
    return d


def evaluate_combination(sys: PolytopicSystem, alpha):
    """Return ``(A(alpha), B(alpha))``."""
    alpha = as_simplex_point(alpha, sys.r)
    A = np.tensordot(alpha, np.stack(sys.A), axes=1)
    B = np.tensordot(alpha, np.stack(sys.B), axes=1)
    return A, B


def closed_loop_matrix(sys: PolytopicSystem, gains, alpha, alpha_hat) -> np.ndarray:
    """``sum_i sum_j alpha_i alpha_hat_j (A_i + B_i K_j)``."""
    alpha = as_simplex_point(alpha, sys.r)
    gains = [np.atleast_2d(np.asarray(K, dtype=float)) for K in gains]
    if len(gains) != sys.r:
        raise ValueError(f"expected {sys.r} gains, got {len(gains)}")
    alpha_hat = np.asarray(alpha_hat, dtype=float).ravel()
    if alpha_hat.size != sys.r:
        raise ValueError("alpha_hat has the wrong length")
    if abs(alpha_hat.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("alpha_hat must sum to 1")
    # sum_ij a_i h_j (A_i + B_i K_j) = A(a) + B(a) K(h) since sum h_j = 1
    A, B = evaluate_combination(sys, alpha)
    K = np.tensordot(alpha_hat, np.stack(gains), axes=1)
    return A + B @ K


def example_system(k: float) -> PolytopicSystem:
    """Four-vertex second-order benchmark family parameterised by ``k > 0``."""
    k = float(k)
    if not k > 0:
        raise ValueError("k must be positive")
    kp = k + 1.0
    A = (
        [[-8.1818, 0.0], [0.0909, 0.0]],
        [[-1.6364, 0.0], [0.0909, 0.0]],
        [[10.0 * (k - 1.0) / kp, 0.0], [k / kp, 0.0]],
        [[2.0 * (k - 1.0) / kp, 0.0], [k / kp, 0.0]],
    )
    B = (
        [[-18.1818], [0.0909]],
        [[-3.6364], [0.0909]],
        [[-20.0 / kp], [k / kp]],
        [[-4.0 / kp], [k / kp]],
    )
    return PolytopicSystem(A, B)


def random_simplex_point(r: int, seed=None) -> np.ndarray:
    if r < 1:
        raise ValueError("r must be at least 1")
    rng = np.random.default_rng(seed)
    if r == 1:
        return np.ones(1)
    w = rng.dirichlet(np.ones(r))
    w[-1] = 1.0 - w[:-1].sum()
    if w[-1] < 0:  # rounding only
        w[-1] = 0.0
        w /= w.sum()
    return w


def random_delta_point(r: int, seed=None, alpha=None) -> np.ndarray:
    """Draw a mismatch ``d`` with ``sum d = 0`` and ``alpha + d`` in the simplex.

    ``alpha`` defaults to a fresh random simplex point. Candidates are scaled
    Gaussian directions projected to sum zero; those leaving the simplex are
    rejected.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    if r == 1:
        return np.zeros(1)
    rng = np.random.default_rng(seed)
    if alpha is None:
        alpha = random_simplex_point(r, rng)
    alpha = as_simplex_point(alpha, r)
    while True:
        d = rng.standard_normal(r)
        d -= d.mean()
        d *= rng.uniform(0.0, 1.0) / max(np.abs(d).max(), 1e-300)
        hat = alpha + d
        if np.all(hat >= 0.0):
            d[-1] = -d[:-1].sum()
            if alpha[-1] + d[-1] >= 0.0 and abs(d[-1]) <= 1.0:
                return d
