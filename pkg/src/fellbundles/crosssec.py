"""Convolution sections, the regular representation and block matrix algebras.

Sections are finitely supported graded functions on the group, stored as
coefficient vectors over the HS-orthonormal fiber bases.  The regular
representation acts on the direct sum of all fibers; since fiber bases are
HS-orthonormal this space carries the trace localization of the canonical
module inner product, so operator norms computed here are the exact
C*-norms (an injective *-homomorphism of finite-dimensional C*-algebras is
isometric).  For finite groups the full and reduced norms coincide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundles import FellBundle, FiberEscapeError
from .numerics import DEFAULT_TOL, PsdResult, Tolerance, dagger, hermitian_defect, opnorm, psd_check


class BundleMismatchError(ValueError):
    pass


class BlockEscapeError(ValueError):
    pass


@dataclass
class Section:
    """Element of the convolution *-algebra of a bundle (fiber coordinates)."""

    bundle: FellBundle
    coeffs: list[np.ndarray]

    def __post_init__(self):
        fixed = []
        for g in self.bundle.group.elements():
            c = np.asarray(self.coeffs[g], dtype=np.complex128)
            if c.shape != (self.bundle.dims[g],):
                raise ValueError(f"fiber {g}: expected {self.bundle.dims[g]} coefficients")
            fixed.append(c)
        self.coeffs = fixed

    @staticmethod
    def zero(bundle: FellBundle) -> "Section":
        return Section(bundle, [np.zeros(d, dtype=np.complex128) for d in bundle.dims])

    @staticmethod
    def delta(bundle: FellBundle, g: int, mat) -> "Section":
        """Section supported at g with the given ambient value."""
        c, res = bundle.coords(g, mat)
        if res > 1e-8:
            raise FiberEscapeError(f"value does not lie in the fiber over {g}")
        s = Section.zero(bundle)
        s.coeffs[g] = c
        return s

    @staticmethod
    def unit(bundle: FellBundle) -> "Section":
        if not bundle.unital:
            raise ValueError("bundle is not unital")
        s = Section.zero(bundle)
        s.coeffs[bundle.group.identity] = bundle.unit_coords.copy()
        return s

    @staticmethod
    def random(bundle: FellBundle, rng) -> "Section":
        return Section(bundle, [bundle.random_coords(g, rng) for g in bundle.group.elements()])

    def ambient(self, g: int) -> np.ndarray:
        return self.bundle.element(g, self.coeffs[g])

    def support(self) -> list[int]:
        return [g for g in self.bundle.group.elements() if np.any(self.coeffs[g])]

    def __add__(self, other: "Section") -> "Section":
        _same_bundle(self, other)
        return Section(self.bundle, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: "Section") -> "Section":
        _same_bundle(self, other)
        return Section(self.bundle, [a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __rmul__(self, scalar) -> "Section":
        return Section(self.bundle, [scalar * c for c in self.coeffs])

    def l2_norm(self) -> float:
        return float(np.sqrt(sum(float(np.vdot(c, c).real) for c in self.coeffs)))

    def allclose(self, other: "Section", atol=1e-10) -> bool:
        _same_bundle(self, other)
        return all(np.allclose(a, b, atol=atol) for a, b in zip(self.coeffs, other.coeffs))


def _same_bundle(f1: Section, f2: Section):
    if f1.bundle is not f2.bundle:
        raise BundleMismatchError("sections live over different bundles")


def _guard_grading(bundle: FellBundle):
    worst = float(bundle.grading_residual.max(initial=0.0))
    if worst > 1e-6:
        raise FiberEscapeError(
            f"bundle grading is violated (residual {worst:.2e}); convolution is ill-defined"
        )


def convolve(f1: Section, f2: Section) -> Section:
    """(f1 * f2)(h) = sum_g f1(g) f2(g^-1 h), through the product tensors."""
    _same_bundle(f1, f2)
    bundle = f1.bundle
    _guard_grading(bundle)
    grp = bundle.group
    out = Section.zero(bundle)
    for g in grp.elements():
        if not np.any(f1.coeffs[g]):
            continue
        for h in grp.elements():
            k = grp.mul(grp.inv(g), h)
            if not np.any(f2.coeffs[k]):
                continue
            out.coeffs[h] = out.coeffs[h] + bundle.product_coords(g, f1.coeffs[g], k, f2.coeffs[k])
    return out


def star(f: Section) -> Section:
    """f*(h) = f(h^-1)*."""
    bundle = f.bundle
    _guard_grading(bundle)
    grp = bundle.group
    out = Section.zero(bundle)
    for h in grp.elements():
        out.coeffs[h] = bundle.star_coords(grp.inv(h), f.coeffs[grp.inv(h)])
    return out


class RegRep:
    """Left convolution action on the direct sum of all fibers.

    The images of every graded basis element are cached at construction;
    afterwards the object is pure and shareable.
    """

    def __init__(self, bundle: FellBundle):
        self.bundle = bundle
        grp = bundle.group
        self.dim = bundle.total_dim
        self.offsets = np.concatenate([[0], np.cumsum(bundle.dims)]).astype(int)
        self.generators: dict[tuple[int, int], np.ndarray] = {}
        for g in grp.elements():
            for i in range(bundle.dims[g]):
                m = np.zeros((self.dim, self.dim), dtype=np.complex128)
                unit = np.eye(bundle.dims[g])[i]
                for h in grp.elements():
                    gh = grp.mul(g, h)
                    blk = bundle.left_mult_matrix(g, unit, h)
                    m[self.offsets[gh]:self.offsets[gh + 1],
                      self.offsets[h]:self.offsets[h + 1]] = blk
                self.generators[(g, i)] = m

    def of_element(self, g: int, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=np.complex128)
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for i in range(self.bundle.dims[g]):
            if c[i] != 0:
                out += c[i] * self.generators[(g, i)]
        return out


def regular_rep(bundle: FellBundle) -> RegRep:
    return RegRep(bundle)


def rep_matrix(rep: RegRep, f: Section) -> np.ndarray:
    if f.bundle is not rep.bundle:
        raise BundleMismatchError("section does not belong to this representation")
    out = np.zeros((rep.dim, rep.dim), dtype=np.complex128)
    for g in rep.bundle.group.elements():
        out += rep.of_element(g, f.coeffs[g])
    return out


def cstar_norm(rep: RegRep, f: Section) -> float:
    """C*-norm of a section: operator norm of its regular image."""
    return opnorm(rep_matrix(rep, f))


def rep_is_faithful(rep: RegRep, tol: Tolerance | None = None) -> bool:
    """Rank check: the linear map f -> lambda(f) has trivial kernel."""
    tol = tol or DEFAULT_TOL
    rows = [m.ravel() for m in rep.generators.values()]
    if not rows:
        return True
    sv = np.linalg.svd(np.array(rows), compute_uv=False)
    return len(sv) == rep.bundle.total_dim and sv[-1] > tol.rel_rank * sv[0]


class MatrixAlgOp:
    """An element R of the block matrix algebra over a tuple g, realized as
    the concrete operator L_R on the direct sum of the fibers A_{g_i^-1}."""

    def __init__(self, bundle: FellBundle, gtuple, blocks, tol: Tolerance | None = None):
        tol = tol or DEFAULT_TOL
        self.bundle = bundle
        self.gtuple = list(gtuple)
        grp = bundle.group
        n = len(self.gtuple)
        col_dims = [bundle.dims[grp.inv(g)] for g in self.gtuple]
        self.offsets = np.concatenate([[0], np.cumsum(col_dims)]).astype(int)
        dim = self.offsets[-1]
        self.matrix = np.zeros((dim, dim), dtype=np.complex128)
        self.block_coords = [[None] * n for _ in range(n)]
        arr = [[np.asarray(blocks[i][j], dtype=np.complex128) for j in range(n)]
               for i in range(n)]
        scale = max((float(np.linalg.norm(arr[i][j])) for i in range(n)
                     for j in range(n)), default=0.0)
        for i, gi in enumerate(self.gtuple):
            for j, gj in enumerate(self.gtuple):
                gij = grp.mul(grp.inv(gi), gj)
                c, res = bundle.coords(gij, arr[i][j])
                # residual from coords() is relative to the block itself;
                # judge escapes against the overall scale of the matrix
                if res * float(np.linalg.norm(arr[i][j])) > 1e-8 * max(scale, 1.0):
                    raise BlockEscapeError(
                        f"block ({i},{j}) does not lie in the fiber over {gij}"
                    )
                self.block_coords[i][j] = c
                blk = bundle.left_mult_matrix(gij, c, grp.inv(gj))
                self.matrix[self.offsets[i]:self.offsets[i + 1],
                            self.offsets[j]:self.offsets[j + 1]] = blk

    @property
    def norm(self) -> float:
        return opnorm(self.matrix)

    def is_hermitian(self, tol: Tolerance | None = None) -> bool:
        tol = tol or DEFAULT_TOL
        return hermitian_defect(self.matrix) <= 100 * tol.rel_eq

    def psd(self, tol: Tolerance | None = None) -> PsdResult:
        tol = tol or DEFAULT_TOL
        if not self.is_hermitian(tol):
            return PsdResult(False, float("-inf"))
        return psd_check((self.matrix + dagger(self.matrix)) / 2, tol)

    def vector_to_tuple(self, v: np.ndarray) -> list[np.ndarray]:
        """Split a vector on the localized module into fiber elements of
        A_{g_i^-1} (ambient matrices)."""
        grp = self.bundle.group
        out = []
        for i, gi in enumerate(self.gtuple):
            c = v[self.offsets[i]:self.offsets[i + 1]]
            out.append(self.bundle.element(grp.inv(gi), c))
        return out


def matrix_alg(bundle: FellBundle, gtuple, blocks, tol: Tolerance | None = None) -> MatrixAlgOp:
    """Assemble L_R for a block matrix R with R[i][j] in A_{g_i^-1 g_j}.

    blocks are ambient matrices; membership is validated (BlockEscapeError).
    """
    return MatrixAlgOp(bundle, gtuple, blocks, tol)
