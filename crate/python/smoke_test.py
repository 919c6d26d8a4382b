#!/usr/bin/env python3
"""Smoke test for the `sheforge` extension module.

Usage:
    cargo build -p sheforge-py --release   # or debug
    python3 python/smoke_test.py

The script locates the built cdylib under target/, exposes it as an
importable `sheforge` module in a temp directory, and exercises the solver,
the harmonic analysis, the simulators and the network bindings.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_cdylib() -> Path:
    candidates = [
        REPO / "target" / "release" / "libsheforge.so",
        REPO / "target" / "debug" / "libsheforge.so",
        REPO / "target" / "release" / "libsheforge.dylib",
        REPO / "target" / "debug" / "libsheforge.dylib",
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("build the extension first: cargo build -p sheforge-py --release")
    # prefer the newest build
    return max(built, key=lambda p: p.stat().st_mtime)


def main() -> None:
    lib = locate_cdylib()
    tmp = Path(tempfile.mkdtemp(prefix="sheforge_py_"))
    shutil.copy2(lib, tmp / "sheforge.so")
    sys.path.insert(0, str(tmp))
    import sheforge

    # solver
    sol = sheforge.solve(0.8)
    assert sol["converged"], sol
    assert sol["residual_norm"] < 1e-10
    angles = sol["angles_rad"]
    assert all(b > a for a, b in zip(angles, angles[1:]))
    assert sol["eliminated_orders"] == [5, 7, 11]
    print(f"solve(0.8): angles_deg = {[round(a, 3) for a in sol['angles_deg']]}")

    # infeasible m raises
    try:
        sheforge.solve(1.5)
    except ValueError as e:
        assert "infeasible" in str(e)
    else:
        sys.exit("solve(1.5) should raise")

    # closed-form vs sampled spectrum
    thd_analytic = sheforge.analytic_thd(angles, 49)
    assert thd_analytic < 0.12
    _, samples = sheforge.synthesize_staircase(angles, 10.0, 50.0, 200_000.0, 10)
    thd_numeric = sheforge.spectrum_thd(samples, 200_000.0, 50.0, 49)
    assert abs(thd_numeric - thd_analytic) < 0.002, (thd_numeric, thd_analytic)
    print(f"THD49: analytic {thd_analytic:.5f}, sampled {thd_numeric:.5f}")

    h5 = sheforge.harmonic_amplitude(angles, 10.0, 5)
    assert abs(h5) < 1e-9, h5
    assert sheforge.harmonic_amplitude(angles, 10.0, 2) == 0.0
    h1 = sheforge.harmonic_amplitude(angles, 10.0, 1)
    m_back = sheforge.modulation_index_from_fundamental(h1, 10.0, 4)
    assert abs(m_back - 0.8) < 1e-9, m_back

    # sweep across the known infeasible window flags instead of fabricating
    rows = sheforge.sweep(0.70, 0.73, 0.01)
    assert len(rows) == 4
    assert rows[0]["flags"] == [] and rows[3]["flags"] == []
    assert rows[1]["flags"] == ["not_converged"]
    print("sweep(0.70..0.73): gap rows flagged not_converged")

    # SPWM fundamental tracks m * s * vdc
    trace = sheforge.simulate_spwm(0.8, cycles=4)
    mags = sheforge.spectrum_magnitudes(trace["voltage"], trace["sample_rate"], 50.0, 5)
    assert abs(mags[0] - 32.0) / 32.0 < 0.02, mags[0]
    assert max(abs(v) for v in trace["voltage"]) <= 40.0
    print(f"simulate_spwm(0.8): fundamental {mags[0]:.3f} V")

    # SHE trace reproduces the staircase
    tr = sheforge.simulate_she(angles, cycles=2)
    assert len(set(round(v, 6) for v in tr["voltage"])) == 9

    # PI loop settles near the reference
    pi = sheforge.simulate_pi(25.0, cycles=30)
    n_cyc = int(pi["sample_rate"] / 50.0)
    tail = pi["voltage"][-n_cyc:]
    rms = math.sqrt(sum(v * v for v in tail) / len(tail))
    assert abs(rms - 25.0) < 0.5, rms
    print(f"simulate_pi(25 V): settled RMS {rms:.3f} V, final m {pi['m'][-1]:.4f}")

    # network: train on a small sweep window, predict in-range, clamp outside
    data = [(r["m"], [math.radians(d) for d in r["angles_deg"]])
            for r in sheforge.sweep(0.76, 0.84, 0.005)]
    net = sheforge.Mlp([1, 16, 4], seed=42)
    trained, history = net.train(data, 5000, 1.0)
    assert history[-1] < history[0]
    assert trained.train_range == (0.76, 0.84)
    pred = trained.predict(0.8)
    exact = sheforge.solve(0.8)["angles_rad"]
    worst = max(abs(math.degrees(p - e)) for p, e in zip(pred, exact))
    assert worst < 1.0, worst
    grad = trained.gradient_check(0.8, exact, 1e-5)
    assert grad < 1e-4, grad
    _, clamped = trained.predict_clamped(0.95)
    assert clamped
    try:
        trained.predict(0.95)
    except ValueError as e:
        assert "extrapolation" in str(e)
    else:
        sys.exit("predict(0.95) should raise")
    print(f"Mlp: held-in prediction error {worst:.3f} deg, gradient check {grad:.2e}")

    print("smoke test OK")


if __name__ == "__main__":
    main()
