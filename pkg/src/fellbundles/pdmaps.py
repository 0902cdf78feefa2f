"""Graded maps between bundles, positivity certificates, and the
reconstruction of an action from a positive definite map.

Positive definiteness quantifies over all finite tuples; at finite
dimension it collapses to one Hermitian certificate matrix over the full
fiber-basis enumeration.  The reduction: any tuple's Gram factors through
the basis Gram as X M X*, so M >= 0 is equivalent to the quantified
condition.  The sampled checker draws the quantified form directly as a
guard on that reduction.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .actions import Action
from .bundles import FellBundle
from .crosssec import RegRep, Section, matrix_alg
from .groups import GroupHom, identity_hom
from .hilbundles import HilbertBundle
from .numerics import DEFAULT_TOL, Tolerance, dagger, frob, hermitian_defect, opnorm
from .reports import Report


class NotUnitalError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


class BundleMapMismatchError(ValueError):
    pass


_rep_cache: "weakref.WeakKeyDictionary[FellBundle, RegRep]" = weakref.WeakKeyDictionary()


def cached_rep(bundle: FellBundle) -> RegRep:
    rep = _rep_cache.get(bundle)
    if rep is None:
        rep = RegRep(bundle)
        _rep_cache[bundle] = rep
    return rep


@dataclass
class BundleMap:
    """Family of fiberwise linear maps T_g: A_g -> B_{phi(g)}, stored as
    matrices in the HS-orthonormal fiber bases."""

    source: FellBundle
    target: FellBundle
    hom: GroupHom
    mats: list[np.ndarray]

    def __post_init__(self):
        if self.hom.source != self.source.group or self.hom.target != self.target.group:
            raise BundleMapMismatchError("homomorphism does not connect the bundles")
        fixed = []
        for g in self.source.group.elements():
            m = np.asarray(self.mats[g], dtype=np.complex128)
            want = (self.target.dims[self.hom(g)], self.source.dims[g])
            if m.shape != want:
                raise BundleMapMismatchError(f"T_{g} must have shape {want}")
            fixed.append(m)
        self.mats = fixed

    def apply(self, g: int, acoords) -> np.ndarray:
        return self.mats[g] @ np.asarray(acoords, dtype=np.complex128)

    def apply_ambient(self, g: int, mat) -> np.ndarray:
        c, _ = self.source.coords(g, mat)
        return self.target.element(self.hom(g), self.apply(g, c))

    def norm(self) -> float:
        """Largest fiberwise operator norm (HS coordinates); a scale, not a
        C*-norm."""
        return max((opnorm(m) for m in self.mats), default=0.0)


def identity_bundle_map(bundle: FellBundle) -> BundleMap:
    return BundleMap(bundle, bundle, identity_hom(bundle.group),
                     [np.eye(d) for d in bundle.dims])


def scalar_bundle_map(source: FellBundle, target: FellBundle, hom: GroupHom,
                      values) -> BundleMap:
    """For group bundles: T_g(u_g) = f(g) u_{phi(g)}.  The sqrt factors
    convert between the HS-normalized bases of the two bundles."""
    vals = np.asarray(values, dtype=np.complex128)
    scale = np.sqrt(target.group.order / source.group.order)
    mats = [vals[g] * scale * np.ones((1, 1)) for g in source.group.elements()]
    return BundleMap(source, target, hom, mats)


def conjugation_bundle_map(bundle: FellBundle, a_coords) -> BundleMap:
    """T_g(b) = a* b a for a fixed unit-fiber element a."""
    grp = bundle.group
    e = grp.identity
    a = bundle.element(e, a_coords)
    mats = []
    for g in grp.elements():
        cols = [bundle.coords(g, a.conj().T @ bundle.fibers[g][i] @ a)[0]
                for i in range(bundle.dims[g])]
        mats.append(np.stack(cols, axis=1) if cols else np.zeros((0, 0)))
    return BundleMap(bundle, bundle, identity_hom(grp), mats)


def perturb_bundle_map(t: BundleMap, scale: float, rng) -> BundleMap:
    mats = [
        m + scale * (rng.standard_normal(m.shape) + 1j * rng.standard_normal(m.shape))
        for m in t.mats
    ]
    return BundleMap(t.source, t.target, t.hom, mats)


def phi_t(t: BundleMap, f: Section) -> Section:
    """Graded push-forward of sections: sum_g T_g(f(g)) placed at phi(g)."""
    if f.bundle is not t.source:
        raise BundleMapMismatchError("section does not live over the source bundle")
    out = Section.zero(t.target)
    for g in t.source.group.elements():
        h = t.hom(g)
        out.coeffs[h] = out.coeffs[h] + t.apply(g, f.coeffs[g])
    return out


def _star_prod_tensor(bundle: FellBundle, g: int, g2: int) -> np.ndarray:
    """coords of a_i^{g*} a_j^{g2} in A_{g^-1 g2}, shape (d_g, d_g2, d)."""
    ginv = bundle.group.inv(g)
    return np.einsum("iw,wjk->ijk", bundle.star_tensor[g], bundle.prod[ginv][g2])


@dataclass
class PdCertificate:
    ok: bool
    margin: float
    gram: np.ndarray
    hermitian_defect: float
    witness: list | None = None  # tuples (g, a_matrix, b_matrix) violating Eq-positivity
    witness_sum: np.ndarray | None = None

    def __bool__(self):
        return self.ok


def _basis_pairs(bundle: FellBundle):
    return [(g, i) for g in bundle.group.elements() for i in range(bundle.dims[g])]


def _unit_norm_scales(bundle: FellBundle, pairs):
    """Rescale enumeration elements to unit ambient operator norm, so the
    certificate margin is normalization-independent (and agrees with the
    circulant oracle on group bundles)."""
    return np.array([1.0 / max(opnorm(bundle.fibers[g][i]), 1e-300)
                     for g, i in pairs])


def pd_check_exact(t: BundleMap, tol: Tolerance | None = None) -> PdCertificate:
    """Certify positive definiteness by one Hermitian matrix.

    The certificate has one block row/column per pair (g, basis element of
    A_g); block (p, q) is the regular image over the target of the section
    T(a_p* a_q) placed at phi(g_p)^-1 phi(g_q).  On failure, the most
    negative eigenvector of the module-localized form is folded back into
    an explicit violating tuple, rescaled so its defect is at least as
    negative as the reported margin.
    """
    tol = tol or DEFAULT_TOL
    src, tgt, hom = t.source, t.target, t.hom
    grp, tgrp = src.group, tgt.group
    rep = cached_rep(tgt)
    pairs = _basis_pairs(src)
    scales = _unit_norm_scales(src, pairs)
    n = len(pairs)
    db = rep.dim
    gram = np.zeros((n * db, n * db), dtype=np.complex128)
    tcoords = {}  # (p, q) -> target fiber coords of T(a_p* a_q)
    for p, (g, i) in enumerate(pairs):
        for q, (g2, j) in enumerate(pairs):
            k = grp.mul(grp.inv(g), g2)
            c = scales[p] * scales[q] * _star_prod_tensor(src, g, g2)[i, j]
            bc = t.apply(k, c)
            tcoords[(p, q)] = bc
            gram[p * db:(p + 1) * db, q * db:(q + 1) * db] = rep.of_element(hom(k), bc)
    defect = hermitian_defect(gram) if gram.size else 0.0
    herm = (gram + dagger(gram)) / 2
    margin = float(np.linalg.eigvalsh(herm)[0]) if gram.size else 0.0
    ok = defect <= 100 * tol.rel_eq and margin >= -tol.rel_psd * max(1.0, opnorm(herm))
    cert = PdCertificate(ok, margin, gram, defect)
    if ok or n == 0:
        return cert

    # witness: localized module form over the tuple (phi(g_p))_p
    htuple = [hom(g) for g, _ in pairs]
    blocks = [
        [tgt.element(tgrp.mul(tgrp.inv(htuple[p]), htuple[q]), tcoords[(p, q)])
         for q in range(n)]
        for p in range(n)
    ]
    op = matrix_alg(tgt, htuple, blocks, tol)
    lherm = (op.matrix + dagger(op.matrix)) / 2
    if lherm.size:
        w, v = np.linalg.eigh(lherm)
        vec = v[:, 0] * np.sqrt(tgt.ambient_dim)
        cs = op.vector_to_tuple(vec)
        witness = []
        for p, (g, i) in enumerate(pairs):
            witness.append((g, scales[p] * src.fibers[g][i], cs[p].conj().T))
        s = np.zeros((tgt.ambient_dim, tgt.ambient_dim), dtype=np.complex128)
        for p in range(n):
            for q in range(n):
                mid = tgt.element(
                    tgrp.mul(tgrp.inv(htuple[p]), htuple[q]), tcoords[(p, q)])
                s += witness[p][2] @ mid @ dagger(witness[q][2])
        cert.witness = witness
        cert.witness_sum = s
    return cert


@dataclass
class SampledCheck:
    ok: bool
    worst_margin: float
    witness: list | None = None
    witness_sum: np.ndarray | None = None

    def __bool__(self):
        return self.ok


def t_values_ambient(t: BundleMap):
    """tt[k][k2][i, j] = ambient value of T(a_i^{k*} a_j^{k2}), indexed by
    the source fibers; shared by the sampled checker and the reconstruction."""
    src, tgt = t.source, t.target
    grp = src.group
    tt = [[None] * grp.order for _ in grp.elements()]
    for k in grp.elements():
        for k2 in grp.elements():
            kk = grp.mul(grp.inv(k), k2)
            spt = _star_prod_tensor(src, k, k2)
            coords = np.einsum("ijk,lk->ijl", spt, t.mats[kk])
            tt[k][k2] = np.einsum("ijl,lab->ijab", coords, tgt.fibers[t.hom(kk)]) \
                if tgt.dims[t.hom(kk)] else np.zeros(
                    (src.dims[k], src.dims[k2], tgt.ambient_dim, tgt.ambient_dim),
                    dtype=np.complex128)
    return tt


def pd_check_sampled(t: BundleMap, samples: int = 200, seed: int = 0,
                     tol: Tolerance | None = None) -> SampledCheck:
    """Evaluate the quantified positivity condition on random tuples.

    Each sample draws a tuple (g_i, a_i in A_{g_i}, b_i in B_{phi(g_i)}) and
    tests the sum  S = sum_ij b_i T(a_i* a_j) b_j*  for positivity in the
    ambient algebra of the target.  Sampling can miss violations but uses a
    strictly looser threshold than the exact certificate, so it never
    contradicts an exact pass.
    """
    tol = tol or DEFAULT_TOL
    src, tgt, hom = t.source, t.target, t.hom
    grp = src.group
    rng = np.random.default_rng(seed)
    max_len = max(1, grp.order * max(src.dims, default=1))
    tt = t_values_ambient(t)
    worst = np.inf
    bad = None
    for _ in range(samples):
        size = int(rng.integers(1, max_len + 1))
        gs = [int(rng.integers(grp.order)) for _ in range(size)]
        if any(src.dims[g] == 0 or tgt.dims[hom(g)] == 0 for g in gs):
            continue
        a_coords = [src.random_coords(g, rng) for g in gs]
        bs = [tgt.element(hom(g), tgt.random_coords(hom(g), rng)) for g in gs]
        s = np.zeros((tgt.ambient_dim, tgt.ambient_dim), dtype=np.complex128)
        for i in range(size):
            for j in range(size):
                val = np.einsum("x,y,xyab->ab", a_coords[i].conj(), a_coords[j],
                                tt[gs[i]][gs[j]])
                s += bs[i] @ val @ dagger(bs[j])
        scale = max(1.0, opnorm(s))
        defect = hermitian_defect(s)
        ev_min = float(np.linalg.eigvalsh((s + dagger(s)) / 2)[0])
        margin = ev_min / scale
        if defect > 1e-7:
            margin = min(margin, -defect)
        if margin < worst:
            worst = margin
            if margin < -10 * tol.rel_psd:
                bad = ([(g, src.element(g, a), b)
                        for g, a, b in zip(gs, a_coords, bs)], s)
    ok = bad is None
    return SampledCheck(ok, float(worst) if np.isfinite(worst) else 0.0,
                        None if ok else bad[0], None if ok else bad[1])


def gelfand_raikov(t: BundleMap, tol: Tolerance | None = None):
    """Reconstruct (Hilbert bundle, action, cyclic vector) from a positive
    definite map between unital bundles, so that T_g(a) = <xi, rho(a) xi>.

    Construction: the fiber over r is the span of elementary tensors
    a (x) b with a in A_k and b in B_{phi(k)^-1 r}, carrying the semi-inner
    product  [a(x)b, a'(x)b'] = b* T_{k^-1 k'}(a* a') b'.  The form is
    localized at the ambient trace, separated by its Gram kernel (the trace
    is faithful, so the kernels agree), and the left tensor shift descends
    to the quotient as the action.  Completion is vacuous here.
    """
    tol = tol or DEFAULT_TOL
    src, tgt, hom = t.source, t.target, t.hom
    if not (src.unital and tgt.unital):
        raise NotUnitalError("both bundles must be unital")
    cert = pd_check_exact(t, tol)
    if not cert.ok:
        raise NotPositiveDefiniteError(
            f"map is not positive definite (margin {cert.margin:.3e})")
    grp, tgrp = src.group, tgt.group

    # slot (k, i, j) = a_i^{(k)} (x) b_j^{(phi(k)^-1 r)}, ordered by k, i, j
    def bleg(r, k):
        return tgrp.mul(tgrp.inv(hom(k)), r)

    slots = []
    offsets = []
    for r in tgrp.elements():
        slot_r = []
        off_r = {}
        for k in grp.elements():
            off_r[k] = len(slot_r)
            f = bleg(r, k)
            slot_r.extend((k, i, j) for i in range(src.dims[k])
                          for j in range(tgt.dims[f]))
        slots.append(slot_r)
        offsets.append(off_r)
    dims0 = [len(s) for s in slots]

    # ambient values of T(a_i^{k*} a_j^{k'}) for every (k, k')
    tt = t_values_ambient(t)

    def raw_inner(r, s):
        """(D_r, D_s, d_{B_{r^-1 s}}) tensor of the semi-inner product."""
        rs = tgrp.mul(tgrp.inv(r), s)
        out = np.zeros((dims0[r], dims0[s], tgt.dims[rs]), dtype=np.complex128)
        brs = tgt.fibers[rs].conj()
        for k in grp.elements():
            f1 = bleg(r, k)
            if src.dims[k] == 0 or tgt.dims[f1] == 0:
                continue
            for k2 in grp.elements():
                f2 = bleg(s, k2)
                if src.dims[k2] == 0 or tgt.dims[f2] == 0:
                    continue
                # b_j* M_(i,i2) b_j2, then coordinates in B_{r^-1 s}
                vals = np.einsum("jba,xybc,Jcd->xjyJad",
                                 tgt.fibers[f1].conj(), tt[k][k2], tgt.fibers[f2])
                coords = np.einsum("kad,xjyJad->xjyJk", brs, vals)
                blk = coords.reshape(src.dims[k] * tgt.dims[f1],
                                     src.dims[k2] * tgt.dims[f2], tgt.dims[rs])
                o1, o2 = offsets[r][k], offsets[s][k2]
                out[o1:o1 + blk.shape[0], o2:o2 + blk.shape[1], :] = blk
        return out

    ip0 = [[raw_inner(r, s) for s in tgrp.elements()] for r in tgrp.elements()]

    e_t = tgrp.identity
    traces = np.array([np.trace(b) for b in tgt.fibers[e_t]])
    keep = []
    for r in tgrp.elements():
        g_r = np.einsum("pqk,k->pq", ip0[r][r], traces)
        if g_r.shape[0] == 0:
            keep.append(np.zeros((0, 0), dtype=np.complex128))
            continue
        w, v = np.linalg.eigh((g_r + dagger(g_r)) / 2)
        scale = max(float(w[-1]), 0.0)
        if float(w[0]) < -tol.rel_psd * max(1.0, scale) * 100:
            raise NotPositiveDefiniteError("localized Gram is not PSD")
        keep.append(v[:, w > tol.rel_rank * max(scale, 1.0)])
    dims = [k.shape[1] for k in keep]

    inner = [[np.einsum("pw,pqk,qz->wzk", keep[r].conj(), ip0[r][s], keep[s])
              for s in tgrp.elements()] for r in tgrp.elements()]

    # right action: (xi . b)(k) = xi(k) . b on the second tensor leg
    act = [[None] * tgrp.order for _ in tgrp.elements()]
    for r in tgrp.elements():
        for h in tgrp.elements():
            rh = tgrp.mul(r, h)
            mats = np.zeros((tgt.dims[h], dims0[rh], dims0[r]), dtype=np.complex128)
            for k in grp.elements():
                f1 = bleg(r, k)
                f2 = bleg(rh, k)
                da, d1, d2 = src.dims[k], tgt.dims[f1], tgt.dims[f2]
                if da == 0 or d1 == 0:
                    continue
                tens = tgt.prod[f1][h]  # (d1, d_h, d2)
                o_in, o_out = offsets[r][k], offsets[rh][k]
                for i in range(da):
                    mats[:, o_out + i * d2:o_out + (i + 1) * d2,
                         o_in + i * d1:o_in + (i + 1) * d1] = tens.transpose(1, 2, 0)
            act[r][h] = np.einsum("uw,iuv,vz->iwz", keep[rh].conj(), mats, keep[r])

    hbundle = HilbertBundle(tgt, dims, act, inner)

    # left action: (rho(a) xi)(k) = a . xi(g^-1 k) on the first tensor leg
    ops = [[None] * tgrp.order for _ in grp.elements()]
    for g in grp.elements():
        hg = hom(g)
        for r in tgrp.elements():
            out_r = tgrp.mul(hg, r)
            mats = np.zeros((src.dims[g], dims0[out_r], dims0[r]), dtype=np.complex128)
            for k in grp.elements():
                gk = grp.mul(g, k)
                f = bleg(r, k)  # equals bleg(out_r, gk)
                da_in, da_out, db = src.dims[k], src.dims[gk], tgt.dims[f]
                if da_in == 0 or db == 0:
                    continue
                tens = src.prod[g][k]  # (d_g, da_in, da_out)
                o_in, o_out = offsets[r][k], offsets[out_r][gk]
                for u in range(src.dims[g]):
                    for i in range(da_in):
                        for i2 in range(da_out):
                            mats[u, o_out + i2 * db:o_out + (i2 + 1) * db,
                                 o_in + i * db:o_in + (i + 1) * db] = \
                                tens[u, i, i2] * np.eye(db)
            ops[g][r] = np.einsum("uw,iuv,vz->iwz", keep[out_r].conj(), mats, keep[r])

    rho = Action(src, hom, hbundle, ops)

    v0 = np.zeros(dims0[e_t], dtype=np.complex128)
    e_s = grp.identity
    db_e = tgt.dims[e_t]
    o = offsets[e_t][e_s]
    outer = np.outer(src.unit_coords, tgt.unit_coords).ravel()
    v0[o:o + src.dims[e_s] * db_e] = outer
    xi = keep[e_t].conj().T @ v0
    return hbundle, rho, xi


def roundtrip_residual(t: BundleMap, hbundle: HilbertBundle, rho: Action, xi) -> float:
    """max over (g, basis a) of || T_g(a) - <xi, rho(a) xi> || (ambient)."""
    from .actions import coefficient_map

    back = coefficient_map(rho, xi)
    worst = 0.0
    for g in t.source.group.elements():
        worst = max(worst, frob(back.mats[g] - t.mats[g]))
    return worst


def pd_report(t: BundleMap, tol: Tolerance | None = None, samples: int = 200,
              seed: int = 0) -> Report:
    tol = tol or DEFAULT_TOL
    rep = Report("positive definiteness")
    cert = pd_check_exact(t, tol)
    rep.add("exact certificate PSD", cert.ok, max(-cert.margin, 0.0),
            f"margin={cert.margin:.6e}")
    sampled = pd_check_sampled(t, samples=samples, seed=seed, tol=tol)
    rep.add("sampled tuples PSD", sampled.ok, max(-sampled.worst_margin, 0.0),
            f"worst sampled margin={sampled.worst_margin:.6e}")
    if cert.ok and not sampled.ok:
        rep.add("exact/sampled consistency", False, 1.0,
                "sampled check contradicts exact certificate")
    return rep
