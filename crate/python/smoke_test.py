"""Smoke test for the irs_py extension. Build it first: `cd crates/py && maturin develop`."""

import cmath
import csv
import io
import math

import irs_py


def main():
    cfg = irs_py.SystemConfig(m=8, gamma_db=5.0)
    assert cfg.m == 8 and abs(cfg.gamma - 10 ** 0.5) < 1e-12
    print(cfg)

    # lossless element reflects everything
    theta = irs_py.reflection_coefficient(1.5e-12, 2.345e9, r=0.0)
    assert abs(abs(theta) - 1.0) < 1e-9
    print("phase at 1.5 pF, 2.345 GHz:", math.degrees(cmath.phase(theta)))

    bands = irs_py.partition(cfg)
    assert len(bands) == 3
    assert all(lo < hi for _, lo, hi in bands)

    p = irs_py.power_min(cfg, trial=0)
    assert p["total_power"] > 0 and len(p["selection"]) == cfg.m
    print("power-min total:", p["total_power"], "W")

    r = irs_py.sum_rate(cfg, trial=0)
    assert all(b >= a - 1e-9 for a, b in zip(r["trace"], r["trace"][1:]))
    print("sum rate:", r["sum_rate"], "bit/s/Hz")

    text = irs_py.run_experiment(cfg, "power-vs-gamma", trials=1)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 3 * 4 and rows[0]["unit"] == "W"
    assert text == irs_py.run_experiment(cfg, "power-vs-gamma", trials=1)

    failed = [name for name, ok, _ in irs_py.validate(cfg) if not ok]
    assert not failed, failed

    try:
        irs_py.SystemConfig(m=0)
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("m=0 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
