"""Block-matrix algebra for pairs (M + corner block, shift vector).

The objects here are (n+1)x(n+1) matrices with an n x n symmetric block M,
a scalar corner beta and zero off-blocks, optionally paired with a shift
vector w in R^n.  They carry the exponent-weighted determinant and trace,
the Frobenius-type inner product, and the orthogonal projection onto the
weighted-trace-zero subspace used by the minimizers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonPositiveCorner, PointOutsideBall

SPD_EIG_REL_TOL = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BlockMat:
    """Symmetric n x n block `diag` plus scalar `corner`, zero off-blocks.

    The stored matrix is mirrored from the upper triangle of the input so
    symmetry is exact.
    """

    diag: np.ndarray
    corner: float

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DimensionMismatch(f"diag must be square, got shape {d.shape}")
        upper = np.triu(d)
        object.__setattr__(self, "diag", _freeze(upper + np.triu(d, 1).T))
        object.__setattr__(self, "corner", float(self.corner))

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    @staticmethod
    def zero(n: int) -> "BlockMat":
        return BlockMat(np.zeros((n, n)), 0.0)

    @staticmethod
    def identity(n: int, corner: float = 1.0) -> "BlockMat":
        return BlockMat(np.eye(n), corner)

    def __add__(self, other: "BlockMat") -> "BlockMat":
        return BlockMat(self.diag + other.diag, self.corner + other.corner)

    def __sub__(self, other: "BlockMat") -> "BlockMat":
        return BlockMat(self.diag - other.diag, self.corner - other.corner)

    def __mul__(self, t: float) -> "BlockMat":
        return BlockMat(self.diag * t, self.corner * t)

    __rmul__ = __mul__

    def __neg__(self) -> "BlockMat":
        return self * -1.0

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self.diag**2) + self.corner**2))


@dataclass(frozen=True)
class EPoint:
    """A pair (block matrix, shift vector in R^n)."""

    mat: BlockMat
    shift: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.zeros(self.mat.n) if self.shift is None else np.asarray(self.shift, dtype=float)
        if w.shape != (self.mat.n,):
            raise DimensionMismatch(f"shift must have length {self.mat.n}, got {w.shape}")
        object.__setattr__(self, "shift", _freeze(w))

    @property
    def n(self) -> int:
        return self.mat.n

    @staticmethod
    def zero(n: int) -> "EPoint":
        return EPoint(BlockMat.zero(n), np.zeros(n))

    def __add__(self, other: "EPoint") -> "EPoint":
        return EPoint(self.mat + other.mat, self.shift + other.shift)

    def __sub__(self, other: "EPoint") -> "EPoint":
        return EPoint(self.mat - other.mat, self.shift - other.shift)

    def __mul__(self, t: float) -> "EPoint":
        return EPoint(self.mat * t, self.shift * t)

    __rmul__ = __mul__

    def __neg__(self) -> "EPoint":
        return self * -1.0

    def norm(self) -> float:
        return float(np.sqrt(self.mat.frobenius_norm() ** 2 + np.dot(self.shift, self.shift)))


def s_det(b: BlockMat, s: float) -> float:
    """corner**s * det(diag).  Needs corner > 0 when s is not an integer."""
    if b.corner <= 0 and s != int(s):
        raise NonPositiveCorner(f"corner={b.corner} with non-integer s={s}")
    return float(b.corner**s * np.linalg.det(b.diag))


def s_trace(b: BlockMat, s: float) -> float:
    """s*corner + trace(diag); equals the inner product with identity+s-corner."""
    return float(s * b.corner + np.trace(b.diag))


def inner(p: EPoint, q: EPoint) -> float:
    """Frobenius product of the blocks plus the dot product of the shifts."""
    if p.n != q.n:
        raise DimensionMismatch(f"dimensions {p.n} and {q.n} differ")
    return float(
        np.sum(p.mat.diag * q.mat.diag)
        + p.mat.corner * q.mat.corner
        + np.dot(p.shift, q.shift)
    )


def identity_direction(n: int, s: float) -> EPoint:
    """The distinguished direction (identity block with corner s, zero shift)."""
    return EPoint(BlockMat.identity(n, s), np.zeros(n))


def project_trace0(p: EPoint, s: float) -> EPoint:
    """Orthogonal projection onto the weighted-trace-zero subspace.

    Subtracts the component along (Id + s-corner, 0); idempotent, and the
    image is exactly the kernel of s_trace.
    """
    n = p.n
    coeff = s_trace(p.mat, s) / (n + s * s)
    diag = p.mat.diag - coeff * np.eye(n)
    return EPoint(BlockMat(diag, p.mat.corner - coeff * s), p.shift)


def contact_tensor(u: np.ndarray, gamma: float) -> BlockMat:
    """Rank-one block u u^T with the given nonnegative corner."""
    u = np.asarray(u, dtype=float)
    if np.dot(u, u) > 1.0 + 1e-12:
        raise PointOutsideBall(f"|u|={np.linalg.norm(u):.6f} exceeds 1")
    return BlockMat(np.outer(u, u), gamma)


def expm_sym(S: np.ndarray) -> np.ndarray:
    """Matrix exponential of a symmetric matrix via eigendecomposition."""
    S = 0.5 * (S + S.T)
    lam, V = np.linalg.eigh(S)
    E = (V * np.exp(lam)) @ V.T
    return 0.5 * (E + E.T)


def sdet1_param(S: np.ndarray, s: float) -> tuple[np.ndarray, float]:
    """Map a symmetric matrix S to an SPD pair (A, alpha) with s_det(A, alpha) = 1.

    A = exp(S), alpha = exp(-trace(S)/s), so alpha**s * det(A) = 1 exactly.
    """
    A = expm_sym(np.asarray(S, dtype=float))
    alpha = float(np.exp(-np.trace(S) / s))
    return A, alpha


def is_spd(A: np.ndarray) -> bool:
    A = np.asarray(A, dtype=float)
    eigs = np.linalg.eigvalsh(0.5 * (A + A.T))
    scale = np.linalg.norm(A, ord="fro")
    return bool(eigs[0] > SPD_EIG_REL_TOL * scale)


def is_in_sE_plus(p: EPoint, s: float) -> bool:
    """Membership in the cone: SPD block, positive corner, s_det >= 1 (tolerant)."""
    if p.mat.corner <= 0:
        return False
    if not is_spd(p.mat.diag):
        return False
    return s_det(p.mat, s) >= 1.0 - 1e-12


def trace0_basis(n: int, s: float) -> list[EPoint]:
    """Deterministic orthonormal basis of the weighted-trace-zero subspace.

    Spans {(M, beta, w): M symmetric, s*beta + tr M = 0, w in R^n}; dimension
    n(n+1)/2 + n.  Built by Gram-Schmidt from the symmetric unit blocks after
    removing the identity_direction component.
    """
    cands: list[EPoint] = []
    zeros = np.zeros(n)
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            cands.append(EPoint(BlockMat(E, 0.0), zeros))
    cands.append(EPoint(BlockMat(np.zeros((n, n)), 1.0), zeros))
    for j in range(n):
        w = np.zeros(n)
        w[j] = 1.0
        cands.append(EPoint(BlockMat.zero(n), w))

    basis: list[EPoint] = []
    for c in cands:
        v = project_trace0(c, s)
        for b in basis:
            v = v - inner(v, b) * b
        nv = v.norm()
        if nv > 1e-12:
            basis.append(v * (1.0 / nv))
    assert len(basis) == n * (n + 1) // 2 + n
    return basis


def from_coords(coeffs: np.ndarray, basis: list[EPoint]) -> EPoint:
    p = EPoint.zero(basis[0].n)
    for c, b in zip(coeffs, basis):
        p = p + float(c) * b
    return p


def to_coords(p: EPoint, basis: list[EPoint]) -> np.ndarray:
    return np.array([inner(p, b) for b in basis])
