import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixpose.errors import NoOverlapError, OptimizerError
from mixpose.estimator import (
    AnnealSchedule,
    OptimizerOptions,
    anneal_problem,
    calibrate,
    estimate_pose,
    nelder_mead,
)
from mixpose.geometry import ParallelCamera, Pose2P, Pose6D
from mixpose.objective import objective
from mixpose.simharness import (
    SCENARIOS,
    RunSeeds,
    calibration_case,
    make_system,
    run_calibration,
    sample_true_pose,
    study_samples,
    synthesize,
)

# -- options ---------------------------------------------------------------

def test_options_validate():
    with pytest.raises(ValueError):
        OptimizerOptions(max_iters=0)
    with pytest.raises(ValueError):
        OptimizerOptions(xtol=0.0)
    with pytest.raises(ValueError):
        OptimizerOptions(ftol=-1.0)


def test_anneal_schedule_must_strictly_decrease():
    assert AnnealSchedule((20, 10, 5)).sigma_eps_levels == (20.0, 10.0, 5.0)
    for bad in [(), (5, 10), (10, 10), (10, -1)]:
        with pytest.raises(ValueError):
            AnnealSchedule(bad)


# -- Nelder-Mead -----------------------------------------------------------

def test_nm_one_dimensional_quadratic():
    res = nelder_mead(lambda x: -(x[0] - 3.0) ** 2, [0.0])
    assert res.converged
    assert abs(res.x[0] - 3.0) < 1e-4


def test_nm_anisotropic_quadratic():
    res = nelder_mead(lambda x: -(x[0] - 1) ** 2 - 10 * (x[1] + 2) ** 2, [0.0, 0.0])
    np.testing.assert_allclose(res.x, [1.0, -2.0], atol=1e-4)
    assert res.fun == pytest.approx(0.0, abs=1e-8)


def test_nm_is_deterministic():
    f = lambda x: -(x[0] - 1) ** 2 - 10 * (x[1] + 2) ** 2 + 0.3 * x[0] * x[1]
    a = nelder_mead(f, [0.0, 0.0], keep_trace=True)
    b = nelder_mead(f, [0.0, 0.0], keep_trace=True)
    assert a.iterations == b.iterations and a.evaluations == b.evaluations
    assert all(np.array_equal(p[0], q[0]) and p[1] == q[1] for p, q in zip(a.trace, b.trace))


@given(st.integers(0, 2**32 - 1))
def test_nm_finds_maximizer_of_random_concave_quadratic(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    a = rng.normal(size=(n, n))
    h = a @ a.T + 0.5 * np.eye(n)
    cond = np.linalg.cond(h)
    c = rng.uniform(-2, 2, n)
    res = nelder_mead(lambda x: -(x - c) @ h @ (x - c), np.zeros(n),
                      OptimizerOptions(xtol=1e-7, ftol=1e-12, max_iters=20000))
    assert res.converged
    assert np.max(np.abs(res.x - c)) < 1e-5 * max(1.0, math.sqrt(cond))


def test_nm_rejects_non_finite_start():
    with pytest.raises(OptimizerError):
        nelder_mead(lambda x: float("nan"), [0.0])
    with pytest.raises(OptimizerError):
        nelder_mead(lambda x: float("inf") if x[0] > 0 else 0.0, [0.0])


def test_nm_stops_at_iteration_cap():
    res = nelder_mead(lambda x: -(x[0] - 1000.0) ** 2, [0.0], OptimizerOptions(max_iters=3))
    assert not res.converged
    assert res.iterations == 3


# -- pose estimation -------------------------------------------------------

S1 = make_system(1)
S2 = make_system(2)


def test_estimate_from_truth_stays_at_truth():
    truth = sample_true_pose(4)
    problem = synthesize(S1, SCENARIOS["I"], truth, 0)
    res = estimate_pose(problem, truth)
    err = res.pose.to_vector() - truth.to_vector()
    assert np.all(np.abs(err[:3]) < 1e-3)
    assert np.all(np.abs(err[3:]) < 0.1)
    assert res.objective_value == pytest.approx(objective(problem, res.pose), rel=1e-14)


def test_delta_bias_from_truth_shrinks_with_grid_spacing():
    # Bilinear interpolation of sampled densities peaks at nodes, so delta
    # objects are pulled by up to a fraction of a cell.
    truth = sample_true_pose(4)
    errs = []
    for spacing in (1.0, 0.5, 0.25):
        problem = synthesize(S1, SCENARIOS["I"], truth, 0, spacing)
        err = estimate_pose(problem, truth).pose.to_vector() - truth.to_vector()
        errs.append(np.abs(err[3:]).max())
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 0.5 * errs[0]


def test_estimate_rejects_wrong_pose_kind():
    problem = synthesize(S1, SCENARIOS["I"], sample_true_pose(0), 0)
    with pytest.raises(ValueError):
        estimate_pose(problem, Pose2P(0.0, 0.0))


def test_estimate_without_overlap_raises():
    problem = synthesize(S1, SCENARIOS["I"], sample_true_pose(0), 0)
    with pytest.raises(NoOverlapError, match="schedule"):
        estimate_pose(problem, Pose6D((0, 0, 0), (5000, 5000, 5000)))


def test_estimate_is_deterministic():
    truth = sample_true_pose(2)
    problem = synthesize(S2, SCENARIOS["I"], truth, 0)
    start = truth + Pose6D((0.02, -0.02, 0.01), (3, -2, 4))
    runs = [estimate_pose(problem, start, study_samples(problem, 200, 5)) for _ in range(2)]
    assert runs[0].pose == runs[1].pose
    assert runs[0].iterations == runs[1].iterations


def test_anneal_requires_final_physical_level():
    problem = synthesize(S1, SCENARIOS["I"], sample_true_pose(0), 0)
    with pytest.raises(ValueError, match="physical"):
        estimate_pose(problem, sample_true_pose(0), schedule=AnnealSchedule((20, 10)))


def test_anneal_problem_widens_densities():
    problem = synthesize(S1, SCENARIOS["I"], sample_true_pose(0), 0)
    wide = anneal_problem(problem, 20.0)
    for a, b in zip(problem.observations, wide.observations):
        assert b.sigma_eps == 20.0
        assert b.density.values.max() < a.density.values.max()
        assert b.density.mass == pytest.approx(1.0, abs=1e-9)
    assert anneal_problem(problem, 5.0).observations[0] is problem.observations[0]
    with pytest.raises(ValueError):
        anneal_problem(problem, 2.0)


def test_anneal_never_worse_than_its_warm_start():
    truth = sample_true_pose(6)
    problem = synthesize(S2, SCENARIOS["I"], truth, 0)
    samples = study_samples(problem, 300, 1)
    start = truth + Pose6D((0.03, -0.03, 0.03), (5, -5, 5))
    coarse = estimate_pose(anneal_problem(problem, 20.0), start, samples)
    fine = estimate_pose(problem, start, samples, schedule=AnnealSchedule((20, 5)))
    assert fine.objective_value >= objective(problem, coarse.pose, samples)


def _edge_offset(seed):
    signs = np.random.default_rng(seed).choice([-1.0, 1.0], 6)
    return Pose6D(signs[:3] * math.pi / 72, signs[3:] * 5.0)


def test_annealing_succeeds_from_edge_of_start_interval():
    schedule = AnnealSchedule((20, 10, 5))
    ok = 0
    for k in range(100):
        seeds = RunSeeds.derive(99, k)
        truth = sample_true_pose(seeds.pose)
        problem = synthesize(S2, SCENARIOS["I"], truth, seeds.noise)
        res = estimate_pose(problem, truth + _edge_offset(seeds.start),
                            study_samples(problem, 1000, seeds.samples), schedule=schedule)
        err = np.abs(res.pose.to_vector() - truth.to_vector())
        ok += bool(np.all(err[:3] < 0.01) and np.all(err[3:] < 1.0))
    assert ok >= 95


# -- calibration -----------------------------------------------------------

def test_calibrate_needs_a_free_parameter():
    case = calibration_case(1, 0)
    with pytest.raises(ValueError):
        calibrate(case.problems[0], case.poses[0], case.initial, [[False], [False]])


def test_calibrate_mask_shape_checked():
    case = calibration_case(1, 0)
    with pytest.raises(ValueError):
        calibrate(case.problems[0], case.poses[0], case.initial, [[False], [True, True]])
    with pytest.raises(ValueError):
        calibrate(case.problems[0], case.poses[0], case.initial[:1], [[True]])


def test_calibrate_keeps_fixed_parameters():
    case = calibration_case(2, 0)
    est = run_calibration(case).estimate
    assert est[0] == ParallelCamera(0.0)


@pytest.mark.parametrize("system", [1, 2])
def test_camera_calibration_round_trip(system):
    res = run_calibration(calibration_case(system, 0))
    assert res.estimate[1].gamma == pytest.approx(math.pi / 2 + 0.05, abs=0.01)


def test_lateration_gauge_round_trip():
    res = run_calibration(calibration_case(3, 0))
    assert res.errors.max() < 1.0
    for t, e in zip(res.case.truth, res.estimate):
        # Gauge-fixed coordinates are untouched.
        assert e.gamma[2] == t.gamma[2]
    assert res.estimate[0] == res.case.truth[0]


@pytest.mark.parametrize("system", [1, 2, 3])
def test_noiseless_calibration_within_ten_xtol(system):
    tol = 10 * OptimizerOptions().xtol
    errors = [run_calibration(calibration_case(system, seed)).errors.max() for seed in range(5)]
    assert max(errors) <= tol, f"calibration errors {errors} exceed {tol}"
