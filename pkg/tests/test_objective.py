import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import decoy_problem, gaussian_density, lateration_probe, quadrature_objective, single_view_problem
from mixpose.density import (
    GridSpec,
    MeasurementDensity,
    ObjectModel,
    interp,
    normalize,
    sample_components,
)
from mixpose.errors import InvalidModelError
from mixpose.geometry import ParallelCamera, Pose2P, Pose6D, camera_project
from mixpose.objective import (
    ObjectiveMap,
    Observation,
    Problem,
    local_maxima,
    objective,
    objective_delta,
    objective_map,
    objective_mc,
    objective_naive,
)
from mixpose.simharness import MAP_TRUE_POSE, SCENARIOS, make_system, map_system, sample_true_pose, synthesize

poses = st.builds(
    lambda a, b: Pose6D(a, b),
    st.tuples(*[st.floats(-0.2, 0.2)] * 2, st.floats(-1.3, -0.8)),
    st.tuples(*[st.floats(30, 50)] * 3),
)

S1_PROBLEM = synthesize(make_system(1), SCENARIOS["I"], sample_true_pose(0), 0)
S2_TRUTH = sample_true_pose(0)
S2_PROBLEM = synthesize(make_system(2), SCENARIOS["I"], S2_TRUTH, 0)


def scaled(problem, factors):
    obs = []
    for o, c in zip(problem.observations, factors):
        d = o.density
        obs.append(o.with_density(MeasurementDensity(d.grid, d.values * c), o.sigma_eps))
    return problem.replace_observations(obs)


# -- types -----------------------------------------------------------------

def test_observation_dimension_must_match():
    g = GridSpec((0.0,), (1.0,), (5,))
    with pytest.raises(ValueError):
        Observation(MeasurementDensity(g, np.ones(5)), ParallelCamera(0.0))


def test_problem_needs_observations():
    with pytest.raises(ValueError):
        Problem(ObjectModel.from_points([[0, 0, 0]]), ())


# -- delta closed form -----------------------------------------------------

def test_delta_equals_mean_of_per_view_products_at_truth():
    truth = sample_true_pose(0)
    rot, w = truth.affine()
    u = (S1_PROBLEM.object.centers + w) @ rot.T
    expected = np.mean([
        np.prod([interp(o.density, o.projector.project(ui)) for o in S1_PROBLEM.observations]) for ui in u
    ])
    assert objective_delta(S1_PROBLEM, truth) == pytest.approx(expected, rel=1e-12)


def test_delta_true_pose_beats_large_offset():
    problem = synthesize(map_system(1), SCENARIOS["I"], MAP_TRUE_POSE, 0)
    at_truth = objective_delta(problem, MAP_TRUE_POSE)
    for dphi in (-0.2, 0.2):
        for dw in (-20, 20):
            assert at_truth > objective_delta(problem, Pose2P(MAP_TRUE_POSE.phi + dphi, MAP_TRUE_POSE.w + dw))


def test_delta_far_pose_is_zero():
    assert objective_delta(S1_PROBLEM, Pose6D((0, 0, 0), (1e5, 1e5, 1e5))) == 0.0


def test_delta_single_feature_single_view_is_interp_value():
    dens = gaussian_density((3.0, 4.0), 6.0)
    problem = Problem(ObjectModel.from_points([[1.0, 2.0, 3.0]]), (Observation(dens, ParallelCamera(0.3)),))
    pose = Pose6D((0.1, -0.2, 0.3), (1, 2, 3))
    u = (np.array([1.0, 2.0, 3.0]) + pose.w) @ pose.affine()[0].T
    assert objective_delta(problem, pose) == pytest.approx(interp(dens, camera_project(u, 0.3)), rel=1e-14)


def test_delta_rejects_gaussian_features():
    with pytest.raises(InvalidModelError):
        objective_delta(S2_PROBLEM, S2_TRUTH)


@given(poses, st.integers(1, 50), st.integers(0, 2**31))
def test_mc_equals_delta_for_delta_objects(pose, R, seed):
    samples = sample_components(S1_PROBLEM.object, R, seed)
    # Same terms, different summation order: equal to a few ulps.
    assert objective_mc(S1_PROBLEM, pose, samples) == pytest.approx(objective_delta(S1_PROBLEM, pose),
                                                                    rel=1e-14, abs=1e-300)


# -- Monte-Carlo -----------------------------------------------------------

def test_mc_matches_quadrature_single_view():
    problem = single_view_problem()
    samples = sample_components(problem.object, 10_000, 5)
    rng = np.random.default_rng(0)
    for _ in range(3):
        pose = Pose6D(rng.uniform(-0.3, 0.3, 3), rng.uniform(-10, 10, 3))
        q = quadrature_objective(problem, pose)
        assert objective_mc(problem, pose, samples) == pytest.approx(q, rel=0.02)


def test_objective_dispatch():
    samples = sample_components(S2_PROBLEM.object, 20, 1)
    assert objective(S2_PROBLEM, S2_TRUTH, samples) == objective_mc(S2_PROBLEM, S2_TRUTH, samples)
    assert objective(S1_PROBLEM, S2_TRUTH) == objective_delta(S1_PROBLEM, S2_TRUTH)


@given(poses, st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_scaling_densities_scales_objective(pose, c1, c2):
    samples = sample_components(S2_PROBLEM.object, 30, 2)
    base = objective_mc(S2_PROBLEM, pose, samples)
    assert objective_mc(scaled(S2_PROBLEM, (c1, c2)), pose, samples) == pytest.approx(base * c1 * c2, rel=1e-12)


MAP_PROBLEM = synthesize(map_system(2), SCENARIOS["I"], MAP_TRUE_POSE, 0)
MAP_SAMPLES = sample_components(MAP_PROBLEM.object, 40, 3)
MAP_REF = objective_map(MAP_PROBLEM, MAP_SAMPLES, (0.8, 1.3), (30, 50), 11)


@given(st.floats(0.01, 100.0), st.floats(0.01, 100.0))
def test_argmax_invariant_under_density_scaling(c1, c2):
    b = objective_map(scaled(MAP_PROBLEM, (c1, c2)), MAP_SAMPLES, (0.8, 1.3), (30, 50), 11)
    assert MAP_REF.argmax == b.argmax


@given(poses, st.integers(0, 1000))
def test_objective_nonnegative_and_finite(pose, seed):
    v = objective_mc(S2_PROBLEM, pose, sample_components(S2_PROBLEM.object, 20, seed))
    assert v >= 0 and math.isfinite(v)


@pytest.mark.parametrize("n_seeds", [20, 200])
def test_mc_variance_shrinks_as_samples_double(n_seeds):
    problem, pose = lateration_probe(), Pose6D((0, 0, 0), (0, 0, 0))
    var = []
    for R in (125, 250, 500, 1000):
        vals = [objective_mc(problem, pose, sample_components(problem.object, R, s)) for s in range(n_seeds)]
        var.append(np.var(vals))
    for prev, cur in zip(var, var[1:]):
        assert cur <= 0.6 * prev


def test_fixed_samples_give_identical_values():
    a = objective_mc(S2_PROBLEM, S2_TRUTH, sample_components(S2_PROBLEM.object, 100, 9))
    b = objective_mc(S2_PROBLEM, S2_TRUTH, sample_components(S2_PROBLEM.object, 100, 9))
    assert a == b


# -- naive baseline --------------------------------------------------------

def test_naive_equals_mc_for_one_view():
    problem = single_view_problem()
    samples = sample_components(problem.object, 200, 4)
    pose = Pose6D((0.1, 0, 0), (1, 2, 3))
    assert objective_naive(problem, pose, samples) == pytest.approx(objective_mc(problem, pose, samples), rel=1e-14)


DECOY = Pose6D((0, 0, 0), (0, 0, 0))


def test_naive_product_overrates_decoy_pose():
    problem = decoy_problem()
    samples = sample_components(problem.object, 1000, 0)
    mc, naive = objective_mc(problem, DECOY, samples), objective_naive(problem, DECOY, samples)
    assert naive > 1e-6
    assert mc < 1e-12
    assert naive > 10 * mc


def test_naive_differs_from_mc_on_study_setup():
    samples = sample_components(S2_PROBLEM.object, 1000, 0)
    mc, naive = objective_mc(S2_PROBLEM, S2_TRUTH, samples), objective_naive(S2_PROBLEM, S2_TRUTH, samples)
    assert abs(naive - mc) / mc > 1e-3


# -- maps ------------------------------------------------------------------

def test_map_of_constant_densities_is_constant():
    g = GridSpec((-600.0, -600.0), (10.0, 10.0), (121, 121))
    const = normalize(MeasurementDensity(g, np.ones(g.counts)))
    obs = (Observation(const, ParallelCamera(0.0)), Observation(const, ParallelCamera(math.pi / 2)))
    problem = Problem(ObjectModel.from_points([[0, 0, 0], [10, 20, 30]]), obs, Pose2P)
    m = objective_map(problem, None, (0.0, 1.0), (-10, 10), 7)
    np.testing.assert_allclose(m.values, m.values[0, 0], rtol=1e-12)


def test_map_validates_inputs():
    with pytest.raises(ValueError):
        objective_map(S1_PROBLEM, None, (0, 1), (0, 1), 5)
    problem = synthesize(map_system(1), SCENARIOS["I"], MAP_TRUE_POSE, 0)
    with pytest.raises(ValueError):
        objective_map(problem, None, (1, 1), (0, 1), 5)
    with pytest.raises(ValueError):
        objective_map(problem, None, (0, 1), (2, 1), 5)
    with pytest.raises(ValueError):
        objective_map(problem, None, (0, 1), (0, 1), 1)
    with pytest.raises(InvalidModelError):
        objective_map(MAP_PROBLEM, None, (0, 1), (0, 1), 3)


def test_map_argmax_and_cell():
    phis, ws = np.linspace(0, 1, 5), np.linspace(10, 20, 3)
    v = np.zeros((5, 3))
    v[3, 1] = 2.0
    m = ObjectiveMap(phis, ws, v)
    assert m.argmax == (3, 1)
    assert m.argmax_pose == Pose2P(0.75, 15.0)
    assert m.cell == (0.25, 5.0)


def test_local_maxima_merges_plateaus_and_thresholds():
    v = np.zeros((7, 7))
    v[1, 1] = v[1, 2] = 1.0      # plateau counts once
    v[5, 5] = 0.85
    v[5, 1] = 0.5                 # below 0.8 of the max
    assert local_maxima(v, 0.8) == [(1, 1), (5, 5)]
    assert len(local_maxima(v, 0.4)) == 3
    assert local_maxima(np.zeros((3, 3))) == []
