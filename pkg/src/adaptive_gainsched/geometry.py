"""Extreme points of the estimate-mismatch polytope and structural annihilators.

The mismatch ``d = alpha_hat - alpha`` between two simplex points sums to
zero and has entries in ``[-1, 1]``. The extreme points of that box slice are
the balanced sign patterns: ``r/2`` entries ``+1`` and ``r/2`` entries ``-1``
for even ``r``; one zero and ``(r-1)/2`` of each sign for odd ``r``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from math import factorial

import numpy as np


def delta_vertex_count(r: int) -> int:
    """Number of extreme points of the mismatch polytope (a central binomial count)."""
    r = int(r)
    if r < 2:
        raise ValueError("the mismatch polytope is degenerate for r < 2")
    half = r // 2
    return factorial(r) // factorial(half) ** 2


@dataclass(frozen=True)
class DeltaVertexSet:
    r: int
    H: np.ndarray

    @property
    def dq(self) -> int:
        return self.H.shape[1]

    def column(self, ell: int) -> np.ndarray:
        return self.H[:, ell]

    def to_json(self) -> str:
        return json.dumps({"r": self.r, "dq": self.dq, "H": self.H.astype(int).tolist()})

    @classmethod
    def from_json(cls, text: str) -> "DeltaVertexSet":
        data = json.loads(text)
        H = np.array(data["H"], dtype=float).reshape(data["r"], data["dq"])
        H.setflags(write=False)
        return cls(int(data["r"]), H)


def enumerate_delta_vertices(r: int) -> DeltaVertexSet:
    """All balanced sign patterns of length ``r`` as columns, lexicographic order."""
    r = int(r)
    if r < 2:
        raise ValueError("the mismatch polytope is degenerate for r < 2")
    zeros = r % 2
    cols = [
        v for v in itertools.product((-1, 0, 1), repeat=r)
        if sum(v) == 0 and v.count(0) == zeros
    ]
    H = np.array(cols, dtype=float).T
    H.setflags(write=False)
    return DeltaVertexSet(r, H)


def pair_annihilator(theta, block: int) -> np.ndarray:
    """Matrix ``M`` with ``M (theta kron I_b) = 0``.

    One block row per pair ``i < j``: ``theta_j I_b`` in block column ``i``
    and ``-theta_i I_b`` in block column ``j``.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    r = theta.size
    b = int(block)
    if b < 1:
        raise ValueError("block size must be positive")
    pairs = [(i, j) for i in range(r) for j in range(i + 1, r)]
    scalar = np.zeros((len(pairs), r))
    for row, (i, j) in enumerate(pairs):
        scalar[row, i] = theta[j]
        scalar[row, j] = -theta[i]
    return np.kron(scalar, np.eye(b))


def sum_zero_block_row(r: int, block: int) -> np.ndarray:
    """``[I_b I_b ... I_b]``, annihilating ``d kron I_b`` whenever ``sum d = 0``."""
    if block < 1:
        raise ValueError("block size must be positive")
    return np.kron(np.ones((1, int(r))), np.eye(int(block)))


def mismatch_annihilator(delta, block: int) -> np.ndarray:
    """Pairwise annihilator of ``delta`` stacked on the sum-zero row."""
    delta = np.asarray(delta, dtype=float).ravel()
    return np.vstack([pair_annihilator(delta, block), sum_zero_block_row(delta.size, block)])


def _blkdiag(a, b):
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[:a.shape[0], :a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


def annihilator_rows(r: int, n_x: int) -> int:
    """Row count of the combined annihilator, ``2 n_x r (r-1) + 2 n_x``."""
    return 2 * n_x * r * (r - 1) + 2 * n_x


def combined_annihilator_at(alpha, delta, n_x: int) -> np.ndarray:
    """``diag(pair(alpha), [pair(delta); sum-zero])`` with block size ``2 n_x``."""
    b = 2 * int(n_x)
    return _blkdiag(pair_annihilator(alpha, b), mismatch_annihilator(delta, b))


def combined_annihilator(m: int, ell: int, r: int, n_x: int, vertices=None) -> np.ndarray:
    """Combined annihilator at simplex vertex ``m`` and mismatch vertex ``ell`` (0-based)."""
    if vertices is None:
        vertices = enumerate_delta_vertices(r)
    if not 0 <= m < r:
        raise IndexError(f"simplex vertex index {m} out of range for r={r}")
    if not 0 <= ell < vertices.dq:
        raise IndexError(f"mismatch vertex index {ell} out of range (dq={vertices.dq})")
    return combined_annihilator_at(np.eye(r)[m], vertices.column(ell), n_x)


def stacked_kronecker(alpha, delta, n_x: int) -> np.ndarray:
    """``[alpha kron I_{2n_x}; delta kron I_{2n_x}]``."""
    eye = np.eye(2 * int(n_x))
    a = np.asarray(alpha, dtype=float).reshape(-1, 1)
    d = np.asarray(delta, dtype=float).reshape(-1, 1)
    return np.vstack([np.kron(a, eye), np.kron(d, eye)])



def coupled_pairs(r: int, full: bool = False) -> list:
    """Index pairs ``(i, j)``, ``i < j``, over the stacked ``2r`` vector.

    By default ``i`` is restricted to the alpha half; ``full`` adds the
    mismatch-mismatch pairs.
    """
    top = 2 * r if full else r
    return [(i, j) for i in range(top) for j in range(i + 1, 2 * r)]


def coupled_annihilator_rows(r: int, n_x: int, full: bool = False) -> int:
    """Row count of the coupled annihilator."""
    return 2 * n_x * len(coupled_pairs(r, full))


def pairwise_annihilator_at(alpha, delta, n_x: int) -> np.ndarray:
    """Coupled annihilator over every pair of the stacked ``2r`` vector."""
    return coupled_annihilator_at(alpha, delta, n_x, full=True)


def coupled_annihilator_at(alpha, delta, n_x: int, full: bool = False) -> np.ndarray:
    """Annihilator of ``[alpha kron I; delta kron I]`` anchored on the alpha half.

    One block row per pair ``(i, j)`` from :func:`coupled_pairs`, holding
    ``theta_j I`` at block ``i`` and ``-theta_i I`` at block ``j`` with
    ``theta = [alpha; delta]``. Linear in ``theta``. Since ``alpha`` always has
    a positive entry on the simplex, the null space is exactly
    ``theta kron R^{2 n_x}`` at every point of the parameter box, not only at
    its vertices.
    """
    theta = np.concatenate([np.asarray(alpha, dtype=float).ravel(),
                            np.asarray(delta, dtype=float).ravel()])
    if theta.size % 2:
        raise ValueError("alpha and delta must have the same length")
    r = theta.size // 2
    pairs = coupled_pairs(r, full)
    small = np.zeros((len(pairs), 2 * r))
    for row, (i, j) in enumerate(pairs):
        small[row, i] = theta[j]
        small[row, j] = -theta[i]
    return np.kron(small, np.eye(2 * int(n_x)))


def coupled_annihilator(m: int, ell: int, r: int, n_x: int, vertices=None) -> np.ndarray:
    """Coupled annihilator at simplex vertex ``m`` and mismatch vertex ``ell`` (0-based)."""
    if vertices is None:
        vertices = enumerate_delta_vertices(r)
    if not 0 <= m < r:
        raise IndexError(f"simplex vertex index {m} out of range for r={r}")
    if not 0 <= ell < vertices.dq:
        raise IndexError(f"mismatch vertex index {ell} out of range (dq={vertices.dq})")
    return coupled_annihilator_at(np.eye(r)[m], vertices.column(ell), n_x)


def affine_annihilator_rows(r: int, n_x: int) -> int:
    """Row count of the affine annihilator, ``2 n_x (2r - 1)``."""
    return 2 * n_x * (2 * r - 1)


def affine_annihilator_at(alpha, delta, n_x: int) -> np.ndarray:
    """Affine annihilator of ``[alpha kron I; delta kron I]`` using ``sum(alpha) = 1``.

    Block row ``j`` is ``theta_j [I ... I | 0 ... 0] - I`` at block ``j``, for
    every stacked index except the last alpha index (whose row is implied by
    the others). Any ``w`` it annihilates equals ``theta kron s`` with ``s`` the
    sum of the alpha half of ``w``, so the null space is exact wherever
    ``alpha`` sums to one.
    """
    theta = np.concatenate([np.asarray(alpha, dtype=float).ravel(),
                            np.asarray(delta, dtype=float).ravel()])
    if theta.size % 2:
        raise ValueError("alpha and delta must have the same length")
    r = theta.size // 2
    keep = [j for j in range(2 * r) if j != r - 1]
    small = np.zeros((len(keep), 2 * r))
    small[:, :r] = theta[keep, None]
    small[np.arange(len(keep)), keep] -= 1.0
    return np.kron(small, np.eye(2 * int(n_x)))


def affine_annihilator(m: int, ell: int, r: int, n_x: int, vertices=None) -> np.ndarray:
    """Affine annihilator at simplex vertex ``m`` and mismatch vertex ``ell`` (0-based)."""
    if vertices is None:
        vertices = enumerate_delta_vertices(r)
    if not 0 <= m < r:
        raise IndexError(f"simplex vertex index {m} out of range for r={r}")
    if not 0 <= ell < vertices.dq:
        raise IndexError(f"mismatch vertex index {ell} out of range (dq={vertices.dq})")
    return affine_annihilator_at(np.eye(r)[m], vertices.column(ell), n_x)


MISMATCH_SETS = ("simplex", "box")


def parameter_vertices(r: int, mismatch: str = "simplex", vertices=None) -> list:
    """Vertex pairs ``(alpha, delta)`` covering the scheduling/mismatch parameter set.

    ``"box"`` pairs every simplex vertex with every column of ``H``.
    ``"simplex"`` uses the pairs actually reachable with both ``alpha`` and
    ``alpha + delta`` on the simplex: ``(e_m, e_p - e_m)``.
    Returns a list of ``(label, alpha, delta)``.
    """
    eye = np.eye(r)
    if mismatch == "box":
        if vertices is None:
            vertices = enumerate_delta_vertices(r)
        return [(f"m={m + 1},l={ell + 1}", eye[m], vertices.column(ell))
                for m in range(r) for ell in range(vertices.dq)]
    if mismatch == "simplex":
        return [(f"m={m + 1},p={p + 1}", eye[m], eye[p] - eye[m])
                for m in range(r) for p in range(r)]
    raise ValueError(f"unknown mismatch set {mismatch!r}; choose from {MISMATCH_SETS}")
