import numpy as np
import pytest

from fellbundles.bundles import dynamical_bundle, group_bundle
from fellbundles.groups import make_cyclic, symmetric_group


@pytest.fixture(scope="session")
def corpus_bundles():
    """The shared test corpus: small group bundles plus the Ad(diag(1,-1))
    crossed product of the 2x2 matrices by the two-element group."""
    m2 = np.array(
        [[[1, 0], [0, 0]], [[0, 1], [0, 0]], [[0, 0], [1, 0]], [[0, 0], [0, 1]]],
        dtype=complex,
    )
    ad = np.diag([1.0, -1.0, -1.0, 1.0])
    return {
        "z2": group_bundle(make_cyclic(2)),
        "z3": group_bundle(make_cyclic(3)),
        "s3": group_bundle(symmetric_group(3)),
        "m2_ad": dynamical_bundle(m2, make_cyclic(2), [np.eye(4), ad]),
    }
