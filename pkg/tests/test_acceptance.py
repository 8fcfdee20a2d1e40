"""End-to-end acceptance gate; each test prints one PASS/FAIL line."""

import json
import math

import numpy as np
import pytest
from bottleneck_tables import BOTTLENECK, WIDTHS

from samplex.cli import main
from samplex.distributions import DiagGaussian, UniformBox
from samplex.error_model import ErrorModelConfig
from samplex.estimator import (
    EstimatorSpec,
    closed_form_error_1d_uniform,
    estimate_curve,
    estimate_error,
    saturated_fraction,
)
from samplex.geometry import NnIndex, PointSet, brute_force_nearest
from samplex.pipeline import AccuracyTable, fit_delta, predict_curve, select_effective_dim
from samplex.simulator import SimulationSpec, run_simulation

DOUBLING_GRID = [2**k for k in range(3, 14)]  # 8 .. 8192
ROUND_TRIP_GRID = [2**k for k in range(3, 17)]


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {detail}")
    return emit


def standard_normal(d):
    return DiagGaussian([0.0] * d, [1.0] * d)


def gaussian_sim_spec(d):
    g = standard_normal(d)
    return SimulationSpec(g, g, DOUBLING_GRID, m_test=1000, n_seeds=20, model=ErrorModelConfig(1.0, d))


def gaussian_theory(d):
    g = standard_normal(d)
    return estimate_curve(EstimatorSpec(g, g, ErrorModelConfig(1.0, d)), DOUBLING_GRID)


def test_criterion_1_simulator_matches_estimator(report):
    lines, ok = [], True
    for d in (1, 2, 4):
        emp = run_simulation(gaussian_sim_spec(d))
        theory = gaussian_theory(d)
        inside = np.abs(theory.error - emp.error) <= 2 * emp.spread
        frac = inside.mean()
        ok &= frac >= 0.9
        lines.append(f"d={d}: {inside.sum()}/{len(inside)} within 2 std")
    report(1, ok, "; ".join(lines) + " (need >= 90% each)")
    assert ok


def test_criterion_2_uniform_closed_form(report):
    box = UniformBox([0.0], [1.0])
    spec = EstimatorSpec(box, box, ErrorModelConfig(1.0, 1))
    ok, lines = True, []
    for n in (10, 10**2, 10**3, 10**4):
        err, se = estimate_error(spec, n)
        exact = closed_form_error_1d_uniform(1.0, n, box)
        ok &= abs(err - 1 / (2 * n)) <= 3 * se and exact == 1 / (2 * n)
        lines.append(f"N={n}: {err:.6g} vs {1 / (2 * n):.6g}")
    report(2, ok, "; ".join(lines))
    assert ok


def test_criterion_3_power_law_slope(report):
    grid = [2**k for k in range(10, 25)]
    ok, lines = True, []
    for d in (1, 2, 3, 4):
        g = standard_normal(d)
        spec = EstimatorSpec(g, g, ErrorModelConfig(1.0, d))
        unsat = [n for n in grid if saturated_fraction(spec, n) <= 1e-3]
        curve = estimate_curve(spec, unsat)
        slope = np.polyfit(np.log(curve.n), np.log(curve.error), 1)[0]
        ok &= len(unsat) >= 3 and abs(slope + 1 / d) <= 0.1
        lines.append(f"d={d}: slope {slope:.4f} (target {-1 / d:.4f}, {len(unsat)} pts)")
    report(3, ok, "; ".join(lines))
    assert ok


def test_criterion_4_quarter_length(report):
    length = 2.5
    x = np.random.default_rng(2024).random(1_000_000) * length
    mean = float(np.minimum(x, length - x).mean())
    rel = abs(mean - length / 4) / (length / 4)
    ok = rel <= 0.01
    report(4, ok, f"mean {mean:.6f} vs L/4 {length / 4:.6f} (rel {rel:.2e})")
    assert ok


def round_trip(delta_star):
    g = standard_normal(2)
    fit_spec = EstimatorSpec(g, g, ErrorModelConfig(1.0, 2), seed=0)
    gen_spec = EstimatorSpec(g, g, ErrorModelConfig(delta_star, 2), seed=1)
    generated = estimate_curve(gen_spec, ROUND_TRIP_GRID)
    fit = fit_delta(generated, fit_spec, small_data_fraction=0.5)
    far = 4 * max(n for n, _ in fit.fit_points)
    pred = predict_curve(fit, fit_spec, [far])
    truth = estimate_curve(gen_spec, [far])
    gap = abs(pred.error[0] - truth.error[0])
    tol = 2 * math.hypot(pred.spread[0], truth.spread[0])
    return fit, far, gap, tol


def test_criterion_5_delta_round_trip(report):
    ok, lines = True, []
    for delta_star in (0.05, 0.5, 5.0):
        fit, far, gap, tol = round_trip(delta_star)
        rel = abs(fit.delta - delta_star) / delta_star
        ok &= rel <= 0.05 and gap <= tol
        lines.append(f"delta*={delta_star}: fit {fit.delta:.5g} ({rel:.2%}), N={far} gap {gap:.2e} <= {tol:.2e}")
    report(5, ok, "; ".join(lines))
    assert ok


def test_criterion_6_effective_dimension(report):
    picks = {}
    for name in ("mnist_lenet", "cifar10_resnet18", "cifar10_vgg16"):
        baseline, accs = BOTTLENECK[name]
        picks[name] = select_effective_dim(AccuracyTable(WIDTHS, accs, baseline), epsilon=0.02).dim
    ok = all(v == 2 for v in picks.values())
    report(6, ok, ", ".join(f"{k} -> {v}" for k, v in picks.items()))
    assert ok


def random_point_set(rng, i):
    n = int(rng.integers(1, 2001))
    d = int(rng.integers(1, 5))
    if i % 4 == 0:
        # coarse lattice: many exact ties
        train = rng.integers(0, 5, size=(n, d)).astype(float)
        queries = rng.integers(0, 9, size=(200, d)) / 2.0
    elif i % 4 == 1:
        train = rng.standard_normal((n, d))
        train = np.vstack([train, train[: n // 3]])  # duplicated points
        queries = np.vstack([rng.standard_normal((150, d)), train[:50]])
    else:
        scale = 10.0 ** rng.integers(-6, 7)
        train = rng.random((n, d)) * scale
        queries = rng.random((200, d)) * scale
    return train, queries


def test_criterion_7_exact_nearest_neighbour(report):
    rng = np.random.default_rng(7)
    mismatches = 0
    for i in range(200):
        train, queries = random_point_set(rng, i)
        d_idx, i_idx = NnIndex(PointSet(train)).query(queries)
        d_bf, i_bf = brute_force_nearest(train, queries)
        if not (np.array_equal(d_idx, d_bf) and np.array_equal(i_idx, i_bf)):
            mismatches += 1
    ok = mismatches == 0
    report(7, ok, f"{200 - mismatches}/200 point sets identical to brute force")
    assert ok


def test_criterion_8_determinism(report, tmp_path):
    checks = {}
    for d in (1, 2, 4):
        a = run_simulation(gaussian_sim_spec(d), threads=1).to_csv()
        b = run_simulation(gaussian_sim_spec(d), threads=4).to_csv()
        checks[f"simulate d={d}"] = a == b
        checks[f"estimate d={d}"] = gaussian_theory(d).to_csv() == gaussian_theory(d).to_csv()
    fit_a = round_trip(0.5)[0]
    fit_b = round_trip(0.5)[0]
    checks["fit_delta"] = json.dumps(fit_a.to_dict()) == json.dumps(fit_b.to_dict())

    rng = np.random.default_rng(8)
    train, queries = rng.standard_normal((2000, 3)), rng.standard_normal((500, 3))
    r1, r4 = NnIndex(PointSet(train), workers=1).query(queries), NnIndex(PointSet(train), workers=4).query(queries)
    checks["nn index workers"] = np.array_equal(r1[0], r4[0]) and np.array_equal(r1[1], r4[1])

    cfg = tmp_path / "gaussian.json"
    cfg.write_text(json.dumps(gaussian_sim_spec(2).to_dict()))
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}.csv"
        code = main(["simulate", str(cfg), "--out", str(out), "--threads", threads])
        outputs.append(out.read_bytes() if code == 0 else None)
    checks["cli simulate --threads"] = outputs[0] is not None and outputs[0] == outputs[1]

    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(8, ok, f"{sum(checks.values())}/{len(checks)} byte-identical" + (f"; differing: {failed}" if failed else ""))
    assert ok
