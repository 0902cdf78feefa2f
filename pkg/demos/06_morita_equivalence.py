"""Verify imprimitivity bimodules.

Equivalence data carries inner products on both sides; the verifier checks
both module structures, the compatibility identity [x,y]z = x<y,z>,
fullness on both sides, and that the two induced norms on the section
space agree.  The classical example: the column module makes the 2x2
matrices equivalent to the scalars.
"""

import numpy as np

from fellbundles.bundles import FellBundle, group_bundle
from fellbundles.correspondences import (
    EquivalenceBundle,
    trivial_self_equivalence,
    verify_imprimitivity,
)
from fellbundles.groups import make_cyclic
from fellbundles.hilbundles import HilbertBundle

M2_BASIS = np.array(
    [[[1, 0], [0, 0]], [[0, 1], [0, 0]], [[0, 0], [1, 0]], [[0, 0], [0, 1]]],
    dtype=complex,
)

triv = make_cyclic(1)
matrices = FellBundle(triv, 2, [M2_BASIS])
scalars = FellBundle(triv, 1, [np.array([[[1.0]]])])

columns = HilbertBundle(scalars, [2], [[np.eye(2)[None]]],
                        [[np.eye(2)[:, :, None].astype(complex)]])
left_inner = [[np.zeros((2, 2, 4), dtype=complex)]]
for u in range(2):
    for v in range(2):
        e_uv = np.zeros((2, 2), dtype=complex)
        e_uv[u, v] = 1.0
        left_inner[0][0][u, v] = matrices.coords(0, e_uv)[0]

equivalence = EquivalenceBundle(matrices, columns, [[np.stack(list(M2_BASIS))]],
                                left_inner)
print("M2 ~ C through the column module:")
print(verify_imprimitivity(equivalence))
print()

# every unital bundle is equivalent to itself
gb = group_bundle(make_cyclic(3))
print("self-equivalence of the Z/3 group bundle:")
print(verify_imprimitivity(trivial_self_equivalence(gb)))
