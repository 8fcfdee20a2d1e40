import math

import numpy as np
import pytest

from samplex.distributions import DiagGaussian, UniformBox
from samplex.error_model import ErrorModelConfig
from samplex.errors import DimensionMismatchError, InputError
from samplex.estimator import EstimatorSpec, estimate_curve
from samplex.geometry import PointSet, cube_constant
from samplex.simulator import LearningCurve, SimulationSpec, run_simulation, simulate_error_rate

G1 = DiagGaussian([0.0], [1.0])
G2 = DiagGaussian([0.0, 0.0], [1.0, 1.0])


def spec(**kw):
    base = dict(
        train_dist=G1, test_dist=G1, n_grid=[8, 64, 512], m_test=500, n_seeds=5,
        model=ErrorModelConfig(1.0, 1), base_seed=3,
    )
    base.update(kw)
    return SimulationSpec(**base)


def test_zero_distance_never_fails():
    rate = simulate_error_rate(PointSet([[0.0]]), PointSet([[0.0]]), ErrorModelConfig(0.01, 1), seed=0)
    assert rate == 0.0


def test_saturated_always_fails():
    rate = simulate_error_rate(PointSet([[0.0]]), PointSet([[10.0]]), ErrorModelConfig(1.0, 1), seed=0)
    assert rate == 1.0


def test_bernoulli_half():
    test = PointSet(np.full((100_000, 1), 0.5))
    rate = simulate_error_rate(PointSet([[0.0]]), test, ErrorModelConfig(1.0, 1), seed=4)
    assert abs(rate - 0.5) < 0.01


def test_error_rate_errors():
    with pytest.raises(DimensionMismatchError):
        simulate_error_rate(PointSet([[0.0]]), PointSet([[0.0, 1.0]]), ErrorModelConfig(1.0, 1), 0)
    with pytest.raises(InputError):
        simulate_error_rate(PointSet(np.empty((0, 1))), PointSet([[0.0]]), ErrorModelConfig(1.0, 1), 0)


def test_degenerate_grid_single_point():
    curve = run_simulation(spec(n_grid=[10], m_test=1, n_seeds=1))
    assert curve.n.tolist() == [10]
    assert curve.error[0] in (0.0, 1.0)
    assert curve.spread[0] == 0.0


def test_rerun_bit_identical():
    a = run_simulation(spec(), threads=1)
    b = run_simulation(spec(), threads=1)
    assert a.to_csv() == b.to_csv()


def test_thread_count_does_not_matter():
    a = run_simulation(spec(), threads=1)
    b = run_simulation(spec(), threads=4)
    assert a.to_csv() == b.to_csv()


def test_adding_grid_points_keeps_existing_rows():
    small = run_simulation(spec(n_grid=[8, 512]))
    large = run_simulation(spec(n_grid=[8, 64, 512, 1024]))
    rows = {n: (e, s) for n, e, s in large.points()}
    for n, e, s in small.points():
        assert rows[n] == (e, s)


def test_base_seed_changes_results():
    assert run_simulation(spec(base_seed=1)).to_csv() != run_simulation(spec(base_seed=2)).to_csv()


def test_huge_delta_gives_zero_error():
    curve = run_simulation(spec(model=ErrorModelConfig(1e9, 1)))
    assert np.all(curve.error == 0.0)


def test_tiny_delta_gives_certain_failure():
    curve = run_simulation(spec(model=ErrorModelConfig(1e-300, 1)))
    assert np.all(curve.error == 1.0)


def test_train_equals_test_gives_zero():
    pts = G2.sample(2000, seed=1)
    assert simulate_error_rate(pts, pts, ErrorModelConfig(1e-3, 2), seed=2) == 0.0


def test_spread_scales_with_test_size():
    # large fixed N, uniform density: train-set variation is negligible next to
    # the binomial noise of M test points (error rate is about 0.3)
    box = UniformBox([0.0], [1.0])
    common = dict(train_dist=box, test_dist=box, n_grid=[100_000], n_seeds=60,
                  model=ErrorModelConfig(1.5e-5, 1), base_seed=8)
    small = run_simulation(SimulationSpec(m_test=100, **common)).spread[0]
    large = run_simulation(SimulationSpec(m_test=1600, **common)).spread[0]
    assert 2.5 < small / large < 6.5  # 1/sqrt(M) predicts 4


def test_curve_decreases_in_n():
    curve = run_simulation(spec(n_grid=[8, 64, 512, 4096], m_test=1000, n_seeds=10))
    assert np.all(np.diff(curve.error) < 0)


def test_spec_validation():
    with pytest.raises(InputError, match="n_grid"):
        spec(n_grid=[])
    with pytest.raises(InputError):
        spec(n_grid=[10, 5])
    with pytest.raises(InputError):
        spec(m_test=0)
    with pytest.raises(DimensionMismatchError):
        spec(test_dist=G2)


def test_spec_from_dict_names_missing_field():
    doc = spec().to_dict()
    doc.pop("m_test")
    with pytest.raises(InputError, match="m_test"):
        SimulationSpec.from_dict(doc)
    doc = spec().to_dict()
    doc["n_grid"] = []
    with pytest.raises(InputError, match="n_grid"):
        SimulationSpec.from_dict(doc)


def test_spec_dict_round_trip():
    s = spec(train_dist=G2, test_dist=G2, model=ErrorModelConfig(0.5, 2))
    assert SimulationSpec.from_dict(s.to_dict()).to_dict() == s.to_dict()


def test_curve_csv_round_trip():
    curve = LearningCurve([8, 16], [0.25, 0.125], [0.01, 0.0])
    text = curve.to_csv()
    assert text.splitlines()[0] == "n,error,spread"
    back = LearningCurve.from_csv(text)
    assert back.to_csv() == text


def test_curve_csv_without_spread():
    back = LearningCurve.from_csv("n,error\n10,0.5\n20,0.25\n")
    assert back.spread.tolist() == [0.0, 0.0]


def test_curve_invariants():
    with pytest.raises(InputError):
        LearningCurve([10, 10], [0.1, 0.1], [0, 0])
    with pytest.raises(InputError):
        LearningCurve([10], [1.5], [0])
    with pytest.raises(InputError):
        LearningCurve([10], [0.5], [-1])


def poisson_correction(d):
    # scale that turns the cube-vertex distance into the mean NN distance of a Poisson process
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return 2 * math.gamma(1 + 1 / d) * ball ** (-1 / d) / cube_constant(d)


def test_default_constant_underestimates_nn_distance_in_2d():
    g = G2
    grid = [2**k for k in range(3, 14)]
    emp = run_simulation(SimulationSpec(g, g, grid, 1000, 20, ErrorModelConfig(1.0, 2)))
    default = estimate_curve(EstimatorSpec(g, g, ErrorModelConfig(1.0, 2)), grid)
    poisson = estimate_curve(EstimatorSpec(g, g, ErrorModelConfig(1.0, 2, correction=poisson_correction(2))), grid)
    # the default model sits below the simulation; the Poisson constant removes the gap
    assert np.mean(default.error < emp.error) > 0.9
    assert np.all(np.abs(poisson.error - emp.error) <= 2 * emp.spread)
