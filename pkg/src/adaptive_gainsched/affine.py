"""Affine matrix expressions over a flat vector of scalar decision variables.

An expression ``F`` of shape ``(p, q)`` is stored as a dense constant and a
sparse map from the decision vector to the row-major vectorisation::

    vec(F(x)) = vec(const) + coef @ x
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class AffineMatrixExpr:
    """Matrix-valued affine function of the decision vector."""

    __slots__ = ("const", "coef", "symmetric")
    # make ndarray @ expr dispatch to __rmatmul__
    __array_ufunc__ = None

    def __init__(self, const, coef, symmetric=False):
        const = np.asarray(const, dtype=float)
        if const.ndim != 2:
            raise ValueError("constant part must be two-dimensional")
        coef = sp.csr_matrix(coef)
        if coef.shape[0] != const.size:
            raise ValueError(
                f"coefficient rows {coef.shape[0]} do not match shape {const.shape}")
        self.const = const
        self.coef = coef
        self.symmetric = bool(symmetric)

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, nvar: int) -> "AffineMatrixExpr":
        value = np.atleast_2d(np.asarray(value, dtype=float))
        return cls(value, sp.csr_matrix((value.size, nvar)))

    @classmethod
    def zeros(cls, shape, nvar: int) -> "AffineMatrixExpr":
        return cls.constant(np.zeros(shape), nvar)

    @property
    def shape(self):
        return self.const.shape

    @property
    def nvar(self) -> int:
        return self.coef.shape[1]

    def __repr__(self):
        return f"AffineMatrixExpr(shape={self.shape}, nnz={self.coef.nnz})"

    # evaluation ---------------------------------------------------------
    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvar,):
            raise ValueError(f"decision vector must have length {self.nvar}")
        val = self.const + (self.coef @ x).reshape(self.shape)
        if self.symmetric:
            val = 0.5 * (val + val.T)
        return val

    # algebra ------------------------------------------------------------
    def _check(self, other):
        if other.shape != self.shape or other.nvar != self.nvar:
            raise ValueError(f"incompatible expressions {self.shape} and {other.shape}")

    def __add__(self, other):
        if isinstance(other, AffineMatrixExpr):
            self._check(other)
            return AffineMatrixExpr(self.const + other.const, self.coef + other.coef)
        return AffineMatrixExpr(self.const + np.asarray(other, dtype=float), self.coef)

    __radd__ = __add__

    def __neg__(self):
        return AffineMatrixExpr(-self.const, -self.coef, self.symmetric)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        scalar = float(scalar)
        return AffineMatrixExpr(scalar * self.const, scalar * self.coef, self.symmetric)

    __rmul__ = __mul__

    def __matmul__(self, mat):
        # vec_r(F D) = (I_p kron D^T) vec_r(F)
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        p, q = self.shape
        if mat.shape[0] != q:
            raise ValueError("inner dimensions do not agree")
        lift = sp.kron(sp.identity(p), sp.csr_matrix(mat.T), format="csr")
        return AffineMatrixExpr(self.const @ mat, lift @ self.coef)

    def __rmatmul__(self, mat):
        # vec_r(C F) = (C kron I_q) vec_r(F)
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        p, q = self.shape
        if mat.shape[1] != p:
            raise ValueError("inner dimensions do not agree")
        lift = sp.kron(sp.csr_matrix(mat), sp.identity(q), format="csr")
        return AffineMatrixExpr(mat @ self.const, lift @ self.coef)

    @property
    def T(self):
        p, q = self.shape
        perm = np.arange(p * q).reshape(p, q).T.ravel()
        return AffineMatrixExpr(self.const.T, self.coef[perm], self.symmetric)

    def he(self):
        """``F + F^T``."""
        out = self + self.T
        out.symmetric = True
        return out

    def sym(self):
        """Symmetric part ``(F + F^T) / 2``, tagged symmetric."""
        out = 0.5 * self.he()
        out.symmetric = True
        return out


def bmat(blocks, nvar: int) -> AffineMatrixExpr:
    """Assemble a block matrix; ``None`` entries are zero blocks.

    Every block row needs at least one concrete block to fix its height, and
    likewise every block column.
    """
    nrows = len(blocks)
    ncols = len(blocks[0])
    heights = [None] * nrows
    widths = [None] * ncols
    for i, row in enumerate(blocks):
        if len(row) != ncols:
            raise ValueError("ragged block structure")
        for j, blk in enumerate(row):
            if blk is None:
                continue
            h, w = blk.shape
            if heights[i] not in (None, h) or widths[j] not in (None, w):
                raise ValueError(f"block ({i}, {j}) has inconsistent shape {blk.shape}")
            heights[i], widths[j] = h, w
    if None in heights or None in widths:
        raise ValueError("cannot infer the size of an all-zero block row or column")

    roff = np.concatenate([[0], np.cumsum(heights)])
    coff = np.concatenate([[0], np.cumsum(widths)])
    P, Q = int(roff[-1]), int(coff[-1])
    const = np.zeros((P, Q))
    pieces_rows, pieces = [], []
    for i, row in enumerate(blocks):
        for j, blk in enumerate(row):
            if blk is None:
                continue
            h, w = blk.shape
            const[roff[i]:roff[i] + h, coff[j]:coff[j] + w] = blk.const
            if blk.coef.nnz == 0:
                continue
            rr, cc = np.divmod(np.arange(h * w), w)
            pieces_rows.append((rr + roff[i]) * Q + (cc + coff[j]))
            pieces.append(blk.coef)
    if pieces:
        stacked = sp.vstack(pieces, format="csr")
        target = np.concatenate(pieces_rows)
        scatter = sp.csr_matrix(
            (np.ones(target.size), (target, np.arange(target.size))),
            shape=(P * Q, target.size))
        coef = scatter @ stacked
    else:
        coef = sp.csr_matrix((P * Q, nvar))
    return AffineMatrixExpr(const, coef)


@dataclass(frozen=True)
class VariableSpec:
    name: str
    shape: tuple
    symmetric: bool
    offset: int

    @property
    def size(self) -> int:
        n, m = self.shape
        return n * (n + 1) // 2 if self.symmetric else n * m


@dataclass
class DecisionLayout:
    """Registry of named matrix variables packed into one flat vector.

    Symmetric variables contribute only their upper-triangle entries.
    """

    specs: dict = field(default_factory=dict)
    nvar: int = 0
    _frozen: bool = False

    def add(self, name: str, shape, symmetric: bool = False) -> VariableSpec:
        if self._frozen:
            raise RuntimeError("layout is frozen")
        if name in self.specs:
            raise ValueError(f"duplicate variable {name!r}")
        shape = tuple(int(s) for s in shape)
        if symmetric and shape[0] != shape[1]:
            raise ValueError("symmetric variables must be square")
        spec = VariableSpec(name, shape, symmetric, self.nvar)
        self.specs[name] = spec
        self.nvar += spec.size
        return spec

    def freeze(self) -> "DecisionLayout":
        self._frozen = True
        return self

    def __contains__(self, name):
        return name in self.specs

    def __getitem__(self, name) -> VariableSpec:
        return self.specs[name]

    def _index_matrix(self, spec: VariableSpec) -> np.ndarray:
        n, m = spec.shape
        if not spec.symmetric:
            return spec.offset + np.arange(n * m).reshape(n, m)
        idx = np.empty((n, n), dtype=int)
        iu = np.triu_indices(n)
        idx[iu] = spec.offset + np.arange(len(iu[0]))
        idx[(iu[1], iu[0])] = idx[iu]
        return idx

    def var(self, name: str) -> AffineMatrixExpr:
        """The expression selecting variable ``name`` from the flat vector."""
        spec = self.specs[name]
        idx = self._index_matrix(spec).ravel()
        coef = sp.csr_matrix(
            (np.ones(idx.size), (np.arange(idx.size), idx)), shape=(idx.size, self.nvar))
        return AffineMatrixExpr(np.zeros(spec.shape), coef, symmetric=spec.symmetric)

    def unpack(self, x) -> dict:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvar,):
            raise ValueError(f"decision vector must have length {self.nvar}")
        return {name: x[self._index_matrix(spec)] for name, spec in self.specs.items()}

    def pack(self, values: dict) -> np.ndarray:
        x = np.zeros(self.nvar)
        for name, spec in self.specs.items():
            if name not in values:
                continue
            val = np.asarray(values[name], dtype=float).reshape(spec.shape)
            if spec.symmetric:
                iu = np.triu_indices(spec.shape[0])
                x[spec.offset:spec.offset + spec.size] = 0.5 * (val + val.T)[iu]
            else:
                x[spec.offset:spec.offset + spec.size] = val.ravel()
        return x

    def table(self) -> list:
        return [
            {"name": s.name, "shape": list(s.shape), "symmetric": s.symmetric,
             "offset": s.offset, "size": s.size}
            for s in self.specs.values()
        ]
