"""Sections, convolution, and exact C*-norms through the regular image.

Finitely supported graded functions on the group form a *-algebra under
convolution.  Representing them on the direct sum of the fibers gives the
exact C*-norm: for cyclic groups this reproduces the largest modulus of
the discrete Fourier transform.
"""

import numpy as np

from fellbundles.bundles import group_bundle, regular_unitary
from fellbundles.crosssec import Section, convolve, cstar_norm, regular_rep, rep_matrix, star
from fellbundles.groups import make_cyclic

n = 6
grp = make_cyclic(n)
b = group_bundle(grp)
rep = regular_rep(b)

rng = np.random.default_rng(1)
vals = rng.standard_normal(n)
f = Section(b, [vals[g] * np.array([np.sqrt(n)]) for g in grp.elements()])
print("section with values", np.round(vals, 3), "on Z/6")
print("C*-norm:", cstar_norm(rep, f))
print("max |DFT|:", np.abs(np.fft.fft(vals)).max())
print()

# the C*-identity ||f* f|| = ||f||^2 holds on the nose
lhs = cstar_norm(rep, convolve(star(f), f))
print("||f* f|| =", lhs, " ||f||^2 =", cstar_norm(rep, f) ** 2)
print()

# convolution in coordinates matches the ambient matrix arithmetic
g = Section.delta(b, 1, regular_unitary(grp, 1))
prod = convolve(g, g)
print("delta_1 * delta_1 is supported at", prod.support(),
      "with ambient value\n", np.round(prod.ambient(2).real, 6))
print()
print("lambda(unit) is the identity:",
      np.allclose(rep_matrix(rep, Section.unit(b)), np.eye(rep.dim)))
