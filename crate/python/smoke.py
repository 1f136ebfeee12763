"""Smoke test for the fex extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import json

import fex


def tuple_json(*scalars):
    return json.dumps({"g": len(scalars), "n": 1, "matrices": [[s] for s in scalars]})


def main():
    v = json.loads(fex.membership(fex.interval(), tuple_json(0.0)))
    assert v["inside"], v

    v = json.loads(fex.membership(fex.disc_drop(), tuple_json(1.1)))
    assert not v["inside"], v

    v = json.loads(fex.membership(fex.notadrop(4), tuple_json(0.92, 0.0)))
    assert v["certainty"] == "Undecided", v

    cert = fex.decompose(fex.interval(), tuple_json(0.0), seed=1)
    parsed = json.loads(cert)
    values = sorted(c["tuple"]["matrices"][0][0] for c in parsed["components"])
    assert abs(values[0] + 1) < 1e-9 and abs(values[1] - 1) < 1e-9, values
    assert json.loads(fex.verify(cert))["passed"]

    x = json.dumps({"g": 2, "n": 2, "matrices": [[0.3, 0.1, 0.1, -0.2], [0.0, 0.4, 0.4, 0.1]]})
    cert = json.loads(fex.decompose(fex.cube(2), x, seed=3))
    assert cert["total_size"] <= 6
    assert json.loads(fex.verify(json.dumps(cert)))["passed"]

    try:
        fex.decompose(fex.cube(2), tuple_json(2.0, 0.0))
    except ValueError as e:
        assert "not a member" in str(e)
    else:
        raise AssertionError("non-member accepted")

    print("smoke ok")


if __name__ == "__main__":
    main()
