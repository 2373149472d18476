"""Smoke test for the qtda extension module.

Build and run:

    cargo build --release -p qtda-py --features extension-module
    cp target/release/libqtda.so python/qtda.so     # qtda.pyd / libqtda.dylib elsewhere
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import qtda  # noqa: E402


def main() -> None:
    cloud, mu_i, mu_j = qtda.PointCloud.fixture("apex")
    cx_i = cloud.complex_at(mu_i, k_max=2)
    cx_j = cloud.complex_at(mu_j, k_max=2)
    assert cx_i.count(1) == 4 and cx_i.betti(1) == 1

    exact = qtda.persistent_betti(cx_i, cx_j, 1)
    assert exact == {"rank_formula": 1, "laplacian": 1}, exact

    report = qtda.estimate_persistent_betti(cx_i, cx_j, 1, delta=0.4, seed=7)
    assert abs(report["beta_estimate"] - 1.0) < 0.4, report["beta_estimate"]
    assert report["beta_rounded"] == 1

    gaps = qtda.gap_report(cx_i, cx_j, 1)
    assert 0.0 < gaps["lambda_pipi"] < 1.0

    square = qtda.PointCloud([[0, 0], [2, 0], [2, -2], [0, -2]], labels=list("ABCD"))
    assert square.n == 4 and math.isclose(square.distance(0, 2), 2 * math.sqrt(2))
    harmonic = square.complex_at(2.0).harmonic_representatives(1)
    assert len(harmonic) == 1 and math.isclose(sum(v * v for v in harmonic[0]), 1.0)

    p = qtda.ThresholdPolynomial(0.5, 0.1, 1e-6, "high")
    assert p.degree % 2 == 0 and p.band_error() <= 1e-6
    assert abs(p(0.0)) <= 1e-6 and abs(p(1.0) - 1.0) <= 1e-6

    direct = qtda.total_runtime(255, 4)
    compact = qtda.total_runtime(255, 4, mapping="compact")
    assert (direct["qubits"], compact["qubits"]) == (255, 40)

    row = qtda.compare(64, 3, "self")
    assert row["ratio"] == 1.0

    zeno = qtda.zeno()
    hi, lo = zeno["overlap_pair"]
    assert abs(hi - 0.945) < 1e-3 and abs(lo - 0.055) < 1e-3

    try:
        qtda.PointCloud.fixture("missing")
    except qtda.QtdaCoreError:
        pass
    else:
        raise AssertionError("unknown fixture accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
