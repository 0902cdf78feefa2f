"""Drive the command-line front end.

Everything the library does is reachable as a batch job on JSON files:
build named objects, validate them, certify positivity, run the
reconstruction pipeline, and check equivalences.  Exit code 0 means all
checks passed, 1 means a mathematical check failed, 2 means the input was
malformed.  Reports are deterministic for a fixed seed.
"""

import json
import tempfile
from pathlib import Path

from fellbundles.cli import main

work = Path(tempfile.mkdtemp(prefix="fellbundles-demo-"))
print("working in", work)


def run(*argv):
    print("\n$ fellbundles", " ".join(argv))
    code = main(list(argv))
    print(f"[exit {code}]")
    return code


# build a group bundle over Z/4
spec = work / "spec.json"
spec.write_text(json.dumps({
    "kind": "group_bundle",
    "group": {"type": "group", "order": 4,
              "table": [[(i + j) % 4 for j in range(4)] for i in range(4)]},
}))
bundle_path = work / "bundle.json"
run("build", str(spec), "-o", str(bundle_path))
run("validate", str(bundle_path))

# a scalar map with values (1, .4, .1, .4) is positive definite
gb = json.loads(bundle_path.read_text())
map_spec = work / "map_spec.json"
map_spec.write_text(json.dumps({
    "kind": "scalar_bundle_map", "source": gb, "target": gb,
    "phi": [0, 1, 2, 3],
    "values": [[1.0, 0.0], [0.4, 0.0], [0.1, 0.0], [0.4, 0.0]],
}))
map_path = work / "map.json"
run("build", str(map_spec), "-o", str(map_path))
run("pd-check", str(map_path))

# reconstruction pipeline: writes bundle/action/vector files and round-trips
run("gns", str(map_path), "-o", str(work / "gns"))

# crossed-product module of the regular action, with a cyclicity check
action_spec = work / "action_spec.json"
action_spec.write_text(json.dumps({"kind": "regular_action", "bundle": gb}))
action_path = work / "action.json"
run("build", str(action_spec), "-o", str(action_path))
run("correspond", str(action_path))

# self-equivalence of the bundle
equiv_spec = work / "equiv_spec.json"
equiv_spec.write_text(json.dumps({"kind": "self_equivalence", "bundle": gb}))
equiv_path = work / "equiv.json"
run("build", str(equiv_spec), "-o", str(equiv_path))
run("morita", str(equiv_path))
