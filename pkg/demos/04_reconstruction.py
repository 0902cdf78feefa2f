"""Recover an action from a positive definite map.

Every positive definite map between unital bundles is the diagonal matrix
coefficient of an action on some Hilbert bundle at a canonical cyclic
vector.  The construction builds elementary tensors, separates by the
Gram kernel, and returns (bundle, action, vector); the round-trip
T_g(a) = <xi, rho(a) xi> then holds to machine precision.
"""

import numpy as np

from fellbundles.actions import coefficient_map, l2_action, validate_action
from fellbundles.bundles import dynamical_bundle, group_bundle
from fellbundles.correspondences import attach_left_action, build_module, check_cyclic
from fellbundles.groups import make_cyclic
from fellbundles.hilbundles import validate_hilbert_bundle
from fellbundles.pdmaps import gelfand_raikov, identity_bundle_map, roundtrip_residual

m2 = np.array(
    [[[1, 0], [0, 0]], [[0, 1], [0, 0]], [[0, 0], [1, 0]], [[0, 0], [0, 1]]],
    dtype=complex,
)
ad = np.diag([1.0, -1.0, -1.0, 1.0])
bundle = dynamical_bundle(m2, make_cyclic(2), [np.eye(4), ad])

# a positive definite map, manufactured as a matrix coefficient
rng = np.random.default_rng(3)
rho0 = l2_action(bundle)
x0 = rho0.target.random_vector(bundle.group.identity, rng)
t = coefficient_map(rho0, x0)

hb, rho, xi = gelfand_raikov(t)
print("reconstructed fiber dimensions:", hb.dims)
print("round-trip residual:", roundtrip_residual(t, hb, rho, xi))
print("bundle axioms pass:", validate_hilbert_bundle(hb).ok)
print("action axioms pass:", validate_action(rho).ok)

y = attach_left_action(build_module(hb), rho)
print("the canonical vector is cyclic:", check_cyclic(y, xi))
print()

# the identity map reconstructs a line per group element
gb = group_bundle(make_cyclic(3))
hb2, rho2, xi2 = gelfand_raikov(identity_bundle_map(gb))
print("identity map on the Z/3 group bundle gives dimensions", hb2.dims,
      "with residual", roundtrip_residual(identity_bundle_map(gb), hb2, rho2, xi2))
