"""Dense complex linear algebra kernel.

Everything downstream (graded bundles, positivity certificates, module
Grams) reduces to Hermitian eigenproblems, PSD checks, null spaces and
subspace bookkeeping on small complex matrices.  All tolerances are
relative to a matrix norm, never absolute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NotSquareError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerance:
    """Relative tolerances: PSD margins, rank decisions, equality checks."""

    rel_psd: float = 1e-8
    rel_rank: float = 1e-9
    rel_eq: float = 1e-9

    def __post_init__(self):
        if min(self.rel_psd, self.rel_rank, self.rel_eq) <= 0:
            raise ValueError("tolerances must be strictly positive")


DEFAULT_TOL = Tolerance()


def as_cmatrix(m) -> np.ndarray:
    """Coerce to a complex128 2-d array and reject non-finite entries."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def frob(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def opnorm(m: np.ndarray) -> float:
    """Operator (spectral) norm; 0 for empty matrices."""
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def hermitian_defect(m: np.ndarray) -> float:
    """Relative deviation of m from its Hermitian part."""
    scale = max(frob(m), 1.0)
    return frob(m - dagger(m)) / scale


def hermitian_eigvals(m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, ascending.

    Raises NotSquareError / NotHermitianError if the input fails the
    preconditions (Hermitian within ``rel_eq`` relative to Frobenius norm).
    """
    a = as_cmatrix(m)
    if a.shape[0] != a.shape[1]:
        raise NotSquareError(f"matrix is {a.shape[0]}x{a.shape[1]}")
    if hermitian_defect(a) > tol.rel_eq:
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    if a.shape[0] == 0:
        return np.zeros(0)
    # Work with the exact Hermitian part so eigvalsh sees a symmetric input.
    return np.linalg.eigvalsh((a + dagger(a)) / 2)


@dataclass(frozen=True)
class PsdResult:
    ok: bool
    margin: float  # minimal eigenvalue, reported either way

    def __bool__(self):
        return self.ok


def psd_check(m, tol: Tolerance = DEFAULT_TOL) -> PsdResult:
    """Decide positive semidefiniteness of a Hermitian matrix.

    Passes iff the minimal eigenvalue is >= -rel_psd * max(1, ||m||).
    """
    a = as_cmatrix(m)
    if a.shape[0] == 0:
        return PsdResult(True, 0.0)
    ev = hermitian_eigvals(a, tol)
    margin = float(ev[0])
    return PsdResult(margin >= -tol.rel_psd * max(1.0, opnorm(a)), margin)


def null_space_basis(g, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of ker(g) for Hermitian PSD g, as columns.

    The numerical rank is decided at rel_rank relative to the largest
    eigenvalue.  Raises NotPSDError when g has a clearly negative eigenvalue.
    """
    a = as_cmatrix(g)
    if a.shape[0] != a.shape[1]:
        raise NotSquareError(f"matrix is {a.shape[0]}x{a.shape[1]}")
    if hermitian_defect(a) > tol.rel_eq:
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    if a.shape[0] == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    w, v = np.linalg.eigh((a + dagger(a)) / 2)
    scale = max(float(w[-1]), 0.0)
    if float(w[0]) < -tol.rel_psd * max(1.0, scale):
        raise NotPSDError(f"matrix has negative eigenvalue {w[0]:g}")
    keep = w <= tol.rel_rank * max(scale, 1.0)
    return v[:, keep]


def kron(a, b) -> np.ndarray:
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def orthonormal_basis(vectors, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormalize a family of vectors (rows), dropping dependencies.

    Returns rows spanning the same subspace, orthonormal in the standard
    Hermitian inner product.  Rank is decided by SVD at rel_rank relative
    to the largest singular value.
    """
    v = np.asarray(vectors, dtype=np.complex128)
    if v.ndim != 2:
        v = v.reshape(len(v), -1)
    if v.shape[0] == 0:
        return v
    u, s, vh = np.linalg.svd(v, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, v.shape[1]), dtype=np.complex128)
    rank = int(np.sum(s > tol.rel_rank * s[0]))
    rows = vh[:rank]
    # canonical phase: largest-magnitude entry real positive, so bases are
    # deterministic and sign/phase choices survive serialization round-trips
    for i in range(rank):
        j = int(np.argmax(np.abs(rows[i])))
        pivot = rows[i, j]
        if abs(pivot) > 0:
            rows[i] = rows[i] * (pivot.conjugate() / abs(pivot))
    return rows


def in_span(basis, v, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Membership of v in the row span of an orthonormal basis, decided by
    residual <= rel_rank * ||v||."""
    return span_residual(basis, v) <= tol.rel_rank


def span_residual(basis, v) -> float:
    """Relative distance of v from the row span of an orthonormal basis."""
    b = np.asarray(basis, dtype=np.complex128)
    w = np.asarray(v, dtype=np.complex128).ravel()
    nv = float(np.linalg.norm(w))
    if nv == 0.0:
        return 0.0
    if b.shape[0] == 0:
        return 1.0
    proj = b.conj() @ w
    res = w - b.T @ proj
    return float(np.linalg.norm(res)) / nv


def same_span(basis1, basis2, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Span equality for two families of vectors (rows)."""
    b1 = orthonormal_basis(basis1, tol)
    b2 = orthonormal_basis(basis2, tol)
    if b1.shape[0] != b2.shape[0]:
        return False
    return all(in_span(b2, row, tol) for row in b1)
