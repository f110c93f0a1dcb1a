"""Banded matrices in LAPACK diagonal storage, with LU factor and solve.

Storage follows the LAPACK ``gb`` convention: ``ab[ku + i - j, j] = A[i, j]``,
so each row of ``ab`` holds one diagonal contiguously.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas, lapack

from .errors import DomainError, SingularMatrixError


@dataclass
class BandedMatrix:
    n: int
    kl: int
    ku: int
    ab: np.ndarray

    def __post_init__(self):
        self.ab = np.asarray(self.ab, dtype=float)
        if self.ab.shape != (self.kl + self.ku + 1, self.n):
            raise DomainError(
                f"band storage shape {self.ab.shape} does not match n={self.n}, kl={self.kl}, ku={self.ku}"
            )

    @classmethod
    def zeros(cls, n, kl, ku):
        return cls(n, kl, ku, np.zeros((kl + ku + 1, n)))

    @classmethod
    def from_dense(cls, a, kl, ku):
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        out = cls.zeros(n, kl, ku)
        for d in range(-kl, ku + 1):
            out.set_diagonal(d, np.diagonal(a, d))
        return out

    def diagonal(self, d):
        """Entries ``A[i, i + d]``, length ``n - |d|``."""
        if d > self.ku or -d > self.kl:
            return np.zeros(self.n - abs(d))
        row = self.ab[self.ku - d]
        return row[d:] if d >= 0 else row[: self.n + d]

    def set_diagonal(self, d, values):
        row = self.ab[self.ku - d]
        if d >= 0:
            row[d:] = values
        else:
            row[: self.n + d] = values

    def to_dense(self):
        a = np.zeros((self.n, self.n))
        for d in range(-self.kl, self.ku + 1):
            idx = np.arange(max(0, -d), min(self.n, self.n - d))
            a[idx, idx + d] = self.diagonal(d)
        return a

    def copy(self):
        return BandedMatrix(self.n, self.kl, self.ku, self.ab.copy())


@dataclass
class BandedFactor:
    """Packed LU factors and row pivots as produced by ``dgbtrf``."""

    n: int
    kl: int
    ku: int
    lu: np.ndarray
    piv: np.ndarray


def band_from_stencil(coeffs, scale, h, shift=0.0):
    """Matrix with rows ``scale[i] * stencil / h^2 + shift * I`` and zero exterior."""
    if not h > 0:
        raise DomainError(f"grid spacing must be positive, got {h}")
    n = len(scale)
    r = coeffs.radius
    scale = np.asarray(scale, dtype=float)
    out = BandedMatrix.zeros(n, r, r)
    taps = {0: coeffs.a0, **{j: a for j, a in enumerate(coeffs.wings, start=1)}}
    for d in range(-r, r + 1):
        if abs(d) >= n:
            continue
        rows = scale[: n - d] if d >= 0 else scale[-d:]
        vals = rows * (taps[abs(d)] / h**2)
        if d == 0:
            vals = vals + shift
        out.set_diagonal(d, vals)
    return out


def band_mul(a, b):
    """Exact banded product; bandwidths add."""
    if a.n != b.n:
        raise DomainError("dimension mismatch in band_mul")
    n = a.n
    out = BandedMatrix.zeros(n, min(a.kl + b.kl, n - 1), min(a.ku + b.ku, n - 1))
    for da in range(-a.kl, a.ku + 1):
        if abs(da) >= n:
            continue
        va = a.diagonal(da)
        for db in range(-b.kl, b.ku + 1):
            d = da + db
            if abs(db) >= n or abs(d) >= n:
                continue
            vb = b.diagonal(db)
            # C[i, i+d] += A[i, i+da] * B[i+da, i+d], over i where all indices are valid
            lo = max(0, -da, -d)
            hi = min(n, n - da, n - d)
            if hi <= lo:
                continue
            i = np.arange(lo, hi)
            ia = i - max(0, -da)
            ib = i + da - max(0, -db)
            ic = i - max(0, -d)
            row = out.ab[out.ku - d]
            off = d if d >= 0 else 0
            row[ic + off] += va[ia] * vb[ib]
    return out


def band_axpy(alpha, a, b):
    """``alpha * a + b`` with the union of both bandwidths."""
    if a.n != b.n:
        raise DomainError("dimension mismatch in band_axpy")
    out = BandedMatrix.zeros(a.n, max(a.kl, b.kl), max(a.ku, b.ku))
    out.ab[out.ku - a.ku: out.ku + a.kl + 1] += alpha * a.ab
    out.ab[out.ku - b.ku: out.ku + b.kl + 1] += b.ab
    return out


def band_scale_columns(a, d):
    """``a @ diag(d)``."""
    return BandedMatrix(a.n, a.kl, a.ku, a.ab * np.asarray(d, dtype=float)[None, :])


def band_add_diagonal(a, d):
    """``a + diag(d)``; ``d`` may be a scalar."""
    out = a.copy()
    out.ab[out.ku] += d
    return out


def band_matvec(a, x):
    """``a @ x`` for a vector or an ``(n, r)`` block."""
    x = np.asarray(x, dtype=float)
    if a.n < a.kl + a.ku + 1:
        # the BLAS wrapper rejects matrices narrower than their band
        return a.to_dense() @ x
    if x.ndim == 1:
        return blas.dgbmv(a.n, a.n, a.kl, a.ku, 1.0, a.ab, x)
    return np.column_stack([blas.dgbmv(a.n, a.n, a.kl, a.ku, 1.0, a.ab, col) for col in x.T])


def lu_factor(a):
    """Partial-pivoting LU of a banded matrix.

    Raises ``SingularMatrixError`` naming the first exactly-zero pivot column.
    """
    work = np.zeros((2 * a.kl + a.ku + 1, a.n), order="F")
    work[a.kl:] = a.ab
    lu, piv, info = lapack.dgbtrf(work, a.kl, a.ku, overwrite_ab=1)
    if info > 0:
        raise SingularMatrixError(info - 1)
    if info < 0:
        raise DomainError(f"dgbtrf rejected argument {-info}")
    return BandedFactor(a.n, a.kl, a.ku, lu, piv)


def solve_many(factor, rhs):
    """Solve with one right-hand side ``(n,)`` or several ``(n, r)``."""
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != factor.n:
        raise DomainError(f"rhs has {b.shape[0]} rows, factor has {factor.n}")
    x, info = lapack.dgbtrs(factor.lu, factor.kl, factor.ku, b, factor.piv)
    if info != 0:
        raise DomainError(f"dgbtrs rejected argument {-info}")
    return x


def residual_norm(a, x, b):
    """Relative residual ``||a x - b|| / ||b||`` for diagnostics."""
    r = band_matvec(a, x) - np.asarray(b, dtype=float)
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))
