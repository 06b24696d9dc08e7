"""Smoke test for the Python bindings: build with
`pip install --no-build-isolation ./crates/python`, then run this file."""

import csv
import io
import math

import underlay_relay as ur


def main():
    params = ur.SystemParams()
    assert math.isclose(params.lambda_primary, 2 ** 1.6 - 1)

    topo = ur.Topology(relay=(0.5, 0.91))
    point = ur.OperatingPoint(params, topo, alpha_draws=20_000)
    assert point.secondary_active
    assert 150 < point.secondary_power < 220, point.secondary_power

    bounds = point.bounds()
    assert math.isclose(sum(bounds["p_decision"]), 1.0, abs_tol=1e-9)

    rows = point.estimate(trials=50_000, seed=7)
    by_policy = {r["policy"]: r for r in rows}
    assert set(by_policy) == set(ur.POLICIES)
    assert by_policy["adaptive2"]["secondary"] <= by_policy["direct"]["secondary"]
    assert point.estimate(["adaptive1"], trials=20_000, seed=3, workers=1) == point.estimate(
        ["adaptive1"], trials=20_000, seed=3, workers=2
    )

    # closed form against a quick simulation
    exact = ur.relayed_outage_exact(5.0, 1.0, 3.0, 1.5)
    assert 0.0 < exact < 1.0
    assert math.isclose(ur.exp_integral(-1.0), -ur.e1(1.0), rel_tol=1e-14)
    assert math.isclose(ur.exp_integral(-1.0), -0.21938393439552029, rel_tol=1e-12)

    text = ur.run_sweep("sweep-snr", ["snr_sweep_db=8:12:4", "trials=2000", "positions=2"])
    table = list(csv.DictReader(io.StringIO(text)))
    assert {r["gamma_p_db"] for r in table} == {"8", "12"}
    assert all(r["outage_sec_mc"] == "1" for r in table if r["gamma_p_db"] == "8")

    try:
        ur.Topology(relay=(1.0, 0.0))
    except ValueError as e:
        assert "coincident" in str(e)
    else:
        raise AssertionError("relay on SD accepted")

    print("python smoke test passed:", params, topo, f"gamma_s={point.secondary_power:.2f}")


if __name__ == "__main__":
    main()
