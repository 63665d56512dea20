"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
prints one PASS/FAIL line per criterion.
"""

import json
import math
from pathlib import Path
import time

import numpy as np
import pytest
import yaml

from fluxonsim import stats
from fluxonsim.cli import main
from fluxonsim.experiments import (
    default_region,
    run_locality_probe,
    run_scalar_ab,
    run_single_fluxon,
    run_three_fluxon,
    run_two_fluxon_loop,
    run_two_fluxon_open,
    star_loop,
)
from fluxonsim.geometry import TWO_PI, oracle_total_angle, polyline_total_angle, wrap_positive
from fluxonsim.model import CircleOrbit, Polyline

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
XI = 0.37
WINDINGS = (-2, -1, 0, 1, 2, 3)
TOL = 1e-9


@pytest.fixture
def crit(record_property):
    def note(num, detail=None):
        record_property("criterion", num)
        if detail is not None:
            record_property("detail", detail)

    return note


def _ensemble(tmp, n, parallelism):
    cfg = yaml.safe_load((CONFIGS / "two_fluxon_loop.yaml").read_text())
    cfg["world"]["windings"] = n
    path = tmp / f"n{n}.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = tmp / f"n{n}_p{parallelism}"
    code = main(
        ["ensemble", "--config", str(path), "--count", "100", "--parallelism", str(parallelism), "--out", str(out)]
    )
    return code, out


@pytest.fixture(scope="module")
def loop_ensembles(tmp_path_factory):
    """Criterion 2's runs: 100 seeds for every winding, sequential."""
    tmp = tmp_path_factory.mktemp("ensembles")
    t0 = time.perf_counter()
    outs = {n: _ensemble(tmp, n, 1) for n in WINDINGS}
    return tmp, outs, time.perf_counter() - t0


def test_criterion_01_single_fluxon(crit):
    crit(1)
    t0 = time.perf_counter()
    res = run_single_fluxon(XI)
    dt = time.perf_counter() - t0
    err = abs(res.delta_phi - TWO_PI * XI)
    crit(1, f"single-fluxon law: |dphi - 2pi xi| = {err:.2e} (< 1e-9), {dt:.3f} s (< 1 s)")
    assert err < TOL
    assert dt < 1.0


def test_criterion_02_two_fluxon_identity(crit, loop_ensembles):
    crit(2)
    _, outs, elapsed = loop_ensembles
    worst, spread = 0.0, 0.0
    for n, (code, out) in outs.items():
        summary = json.loads((out / "summary.json").read_text())
        assert code == 0, f"n={n}: ensemble exit code {code}"
        assert summary["completed"] == 100
        r = summary["closure_residual"]
        worst = max(worst, r["max_abs"])
        spread = max(spread, r["spread"])
        members = json.loads((out / "report.json").read_text())["members"]
        assert all(m["results"]["n"] == n for m in members)
    crit(2, f"two-fluxon identity: max |residual| {worst:.2e} (< 1e-9), max spread {spread:.2e} (< 2e-9), {elapsed:.1f} s (< 120 s)")
    assert worst < TOL
    assert spread < 2e-9
    assert elapsed < 120


def test_criterion_03_bath_integrality(crit, loop_ensembles):
    crit(3)
    _, outs, _ = loop_ensembles
    worst, distinct = 0.0, []
    for n, (_, out) in outs.items():
        members = json.loads((out / "report.json").read_text())["members"]
        offsets = [c["value"] for m in members for c in m["checks"] if c["name"] == "bath_integrality"]
        assert len(offsets) == 100
        worst = max(worst, max(offsets))
        distinct.append(len({m["results"]["N"] for m in members}))
    crit(3, f"bath integrality: max offset from 2pi N {worst:.2e} (< 1e-9), distinct N per winding {distinct} (>= 2)")
    assert worst < TOL
    assert min(distinct) >= 2


def test_criterion_04_topology_independence(crit):
    crit(4)
    residuals = []
    for k in range(20):
        res = run_two_fluxon_loop(XI, bath=200, seed=123, loop=star_loop(1000 + k), keep_trace=False)
        assert res.n == 1
        residuals.append(res.closure_residual)
    spread = max(residuals) - min(residuals)
    worst = max(map(abs, residuals))
    crit(4, f"topology independence: 20 star loops, residual spread {spread:.2e}, max |residual| {worst:.2e} (< 1e-9)")
    assert spread < TOL
    assert worst < TOL


def test_criterion_05_open_paths_moving_source(crit):
    crit(5)
    p1 = CircleOrbit((0, 0), 1.0, -math.pi / 2, 0.0)
    p2 = CircleOrbit((0, 0), 1.0, 3 * math.pi / 2, 0.0)
    src = Polyline((0, 0.5, 1, 1.5, 2), ((0, 0), (0, 0), (0, 3), (0, 0), (0, 0)))
    t = np.linspace(0, 2, 20001)
    rel = lambda p: np.array([np.subtract(p.position(s), src.position(s)) for s in t])  # noqa: E731
    composite = np.vstack([rel(p2), rel(p1)[::-1][1:]])
    n_oracle = round(oracle_total_angle(composite, (0, 0), 1) / TWO_PI)
    res = run_two_fluxon_open(0.25, p1, p2, 2.0, source_path=src, bath=200, seed=17)
    crit(5, f"open-path meeting: oracle n={n_oracle}, simulated n={res.n}, |residual| {abs(res.closure_residual):.2e} (< 1e-9)")
    assert n_oracle == res.n == 2
    assert abs(res.closure_residual) < TOL


def test_criterion_06_three_fluxon(crit):
    crit(6)
    worst, min_var = 0.0, 1.0
    for windings in ((1, 0, 0), (1, 1, 1)):
        for xi in (XI, 1 / 3):
            runs = [run_three_fluxon(xi, windings, bath=200, seed=s, keep_trace=False) for s in range(200)]
            assert all(r.windings == windings for r in runs)
            worst = max(worst, max(abs(r.closure_residual) for r in runs))
            for k in range(3):
                min_var = min(min_var, stats.circular_variance(wrap_positive([r.delta_phi[k] for r in runs])))
    crit(6, f"three-fluxon identity: max |triple-sum residual| {worst:.2e} (< 1e-9), min per-fluxon circular variance {min_var:.3f} (> 0.1)")
    assert worst < TOL
    assert min_var > 0.1


def test_criterion_07_scalar_analog(crit):
    crit(7)
    res = run_scalar_ab(default_region(1.5), bath=200, seed=8)
    dev = abs(res.residual)
    crit(7, f"scalar analog: (dgamma mod 2pi) - 3.0 = {dev:.2e} (< 5e-3)")
    assert res.target == 3.0
    assert dev < 5e-3


def test_criterion_08_randomization(crit):
    crit(8)
    mids = [run_two_fluxon_loop(XI, 1, 200, seed, keep_trace=False).gamma_mid for seed in range(1000)]
    ray = stats.rayleigh_test(wrap_positive(mids), level=0.01)
    crit(8, f"randomization: Rayleigh n={ray.n} R={ray.R:.4f} z={ray.z:.3f} p={ray.p_value:.3f} (> 0.01)")
    assert ray.uniform


def test_criterion_09_non_locality(crit):
    crit(9)
    t0 = time.perf_counter()
    res = run_locality_probe((0.0, XI), 0.5, 2000, bath=500, seed=5)
    elapsed = time.perf_counter() - t0
    tv = res.pairwise_tv[(0.0, XI)]
    crit(
        9,
        f"non-locality: TV {tv:.4f} vs null {res.null_threshold:.4f}, closed-loop separation error "
        f"{res.separation_error:.2e}, {elapsed:.0f} s (< 600 s)",
    )
    assert tv < res.null_threshold
    assert res.separation_error < TOL
    assert res.predicted_separation[(0.0, XI)] == pytest.approx(TWO_PI * XI, abs=1e-15)
    assert elapsed < 600


def test_criterion_10_oracle_equivalence(crit):
    crit(10)
    rng = np.random.default_rng(2024)
    worst, worst_turn = 0.0, 0.0
    for _ in range(1000):
        m = int(rng.integers(2, 30))
        path = rng.uniform(-5, 5, size=(m, 2))
        center = rng.uniform(-5, 5, size=(m, 2))
        worst = max(worst, abs(polyline_total_angle(path, center) - oracle_total_angle(path, center, 1)))
        closed = np.vstack([path, path[:1]])
        fixed = rng.uniform(-2, 2, size=2)
        turns = polyline_total_angle(closed, fixed) / TWO_PI
        worst_turn = max(worst_turn, abs(turns - round(turns)))
    crit(10, f"oracle equivalence: max |geometry - oracle| {worst:.1e} (<= 1e-12), closed-polygon offset from integer {worst_turn:.1e} turns (< 1e-9)")
    assert worst <= 1e-12
    assert worst_turn < 1e-9


def test_criterion_11_order_independence(crit, loop_ensembles):
    crit(11)
    tmp, outs, _ = loop_ensembles
    same = []
    for n in WINDINGS:
        code, out8 = _ensemble(tmp, n, 8)
        assert code == 0
        same.append((outs[n][1] / "summary.json").read_bytes() == (out8 / "summary.json").read_bytes())
    crit(11, f"determinism: summary.json byte-identical at parallelism 1 vs 8 for {sum(same)}/{len(same)} windings")
    assert all(same)
