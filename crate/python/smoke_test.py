"""Smoke test for the pyecomsim extension.

Build and install first:
    pip install maturin
    maturin develop -m crates/py/Cargo.toml --release
"""

import math

import pyecomsim


def main():
    s1 = pyecomsim.Scenario.preset("S1", 10.0)
    assert s1.name == "S1" and s1.classes == ["rare", "ordinary", "frequent"]
    assert abs(sum(s1.pmf) - 1.0) < 1e-12

    oracle = s1.oracle()
    assert abs(oracle["pm3"] + oracle["pm5"] + oracle["pm7"] - 1.0) < 1e-9
    demand = s1.service_demand()
    assert demand["bottleneck"] == "WS"
    assert math.isclose(demand["lambda_sat"], 1.0 / demand["bottleneck_demand"])

    summary = s1.run(lam=5.0, seed=3, window=600.0)
    assert summary["consistency"] == []
    assert summary["sessions_completed"] > 0
    again = s1.run(lam=5.0, seed=3, window=600.0)
    assert summary == again, "runs are not reproducible"

    zero = s1.run(lam=0.0, window=600.0)
    assert zero["degenerate"] and zero["sessions_started"] == 0

    out = s1.sweep(lambda_from=1.0, lambda_to=3.0, step=1.0, replications=2, window=300.0)
    assert [p["lambda"] for p in out["curve"]["points"]] == [1.0, 2.0, 3.0]
    assert out["critical"]["status"] == "not_crossed"

    assert pyecomsim.critical_lambda([(14.5, 3.9), (15.0, 4.3)]) == 14.625
    assert pyecomsim.critical_lambda([(1.0, 1.0)]) is None
    assert [r["scenario"] for r in pyecomsim.reference()] == ["S1", "S2", "S3"]

    assert pyecomsim.validate("") == []
    problems = pyecomsim.validate('[routes]\nBrowse = ["WS", "Cache"]\n')
    assert any("Cache" in p for p in problems), problems
    try:
        pyecomsim.Scenario.from_toml("[run]\nwindow = -1.0\n")
    except ValueError:
        pass
    else:
        raise AssertionError("negative window accepted")

    print("pyecomsim smoke test passed")


if __name__ == "__main__":
    main()
