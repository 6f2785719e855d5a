"""Smoke test for the cfa_py extension.

Build it first with ``python/build.sh`` (or ``maturin develop`` from
``crates/py``); the script looks for ``cfa_py`` on the import path and
falls back to the copy next to this file.
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import cfa_py  # noqa: E402

SMALL = "T = 12\nH = 4\niterations = 3\nbatch_size = 2\nn_eval_paths = 4\n"


def main() -> None:
    assert "master_seed" in cfa_py.default_config()

    path = cfa_py.sample_path(20.0, 7, SMALL)
    assert len(path["E"]) == 13
    for t, row in enumerate(path["F_E"]):
        assert row[0] == path["E"][t]

    ident = cfa_py.identity("lookup", SMALL)
    assert ident == [1.0] * 4
    bench = cfa_py.simulate("benchmark", [], 20.0, 7, SMALL)
    look = cfa_py.simulate("lookup", ident, 20.0, 7, SMALL)
    assert bench["reward"] == look["reward"]
    assert len(bench["storage"]) == 14

    reward, grad = cfa_py.gradient("exponential", [0.8, -0.1], 20.0, 7, SMALL)
    assert math.isclose(reward, cfa_py.simulate("exponential", [0.8, -0.1], 20.0, 7, SMALL)["reward"])
    assert len(grad) == 2

    ev = cfa_py.evaluate("benchmark", [], 20.0, 4, SMALL)
    assert ev["delta"] == 0.0

    theta = cfa_py.tune("constant", 20.0, 3, 2, SMALL)
    assert len(theta) == 1 and 0.0 <= theta[0] <= 2.0

    try:
        cfa_py.tune("benchmark", 20.0, 3, 2, SMALL)
    except ValueError as e:
        assert "Benchmark has no parameters" in str(e)
    else:
        raise AssertionError("benchmark tuning should fail")

    try:
        cfa_py.sample_path(20.0, 1, "bogus = 1\n")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown config key should fail")

    print("cfa_py smoke test passed")


if __name__ == "__main__":
    main()
