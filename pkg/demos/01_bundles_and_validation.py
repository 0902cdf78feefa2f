"""Build graded matrix bundles and run the axiom battery.

A bundle here is a family of subspaces of one matrix algebra, indexed by a
finite group, with products and adjoints landing in the right fibers.  The
validator reports each axiom with its worst residual, and keeps reporting
(rather than raising) when fed deliberately broken data.
"""

import numpy as np

from fellbundles.bundles import (
    FellBundle,
    check_saturated,
    dynamical_bundle,
    group_bundle,
    validate_bundle,
)
from fellbundles.groups import make_cyclic, symmetric_group

# The group bundle: one-dimensional fibers spanned by permutation matrices.
s3 = symmetric_group(3)
gb = group_bundle(s3)
print("group bundle over S3: fiber dimensions", gb.dims)
print(validate_bundle(gb))
print("saturated:", check_saturated(gb))
print()

# A crossed product: Z/2 acting on the 2x2 matrices by conjugation with
# diag(1, -1).  The fibers all have the dimension of the coefficient algebra.
m2 = np.array(
    [[[1, 0], [0, 0]], [[0, 1], [0, 0]], [[0, 0], [1, 0]], [[0, 0], [0, 1]]],
    dtype=complex,
)
ad = np.diag([1.0, -1.0, -1.0, 1.0])
crossed = dynamical_bundle(m2, make_cyclic(2), [np.eye(4), ad])
print("crossed product of M2 by Z/2: ambient", crossed.ambient_dim,
      "fibers", crossed.dims, "unital:", crossed.unital)
print(validate_bundle(crossed))
print()

# Breaking the grading is detected, with the failing axiom named.
rng = np.random.default_rng(0)
bad_fiber = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
broken = FellBundle(make_cyclic(2), 2, [np.eye(2)[None], bad_fiber[None]])
print("perturbed bundle:")
print(validate_bundle(broken))
