"""Reproduction harness: the three observation systems, scenarios I-IV,
reduced-pose objective maps and the randomized 6D accuracy study.
"""

from __future__ import annotations

import enum
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .density import (
    GridSpec,
    ObjectModel,
    SampleSet,
    SensingKernel,
    add_noise,
    convolve_gaussian,
    sample_components,
    splat_points,
)
from .errors import MixposeError
from .estimator import AnnealSchedule, OptimizerOptions, calibrate, estimate_pose
from .geometry import (
    Lateration,
    ParallelCamera,
    Pose2P,
    Pose6D,
    Projector,
    deform,
    euler_angles,
    lateration_gauge,
)
from .objective import ObjectiveMap, Observation, Problem, objective_map

log = logging.getLogger(__name__)

BODY_POINTS = np.array([
    [0.0, -25.00, -43.30],
    [100.00, -25.00, -43.30],
    [0.0, 61.60, -93.30],
    [100.00, 111.60, -6.70],
    [100.00, 25.00, 43.30],
    [0.0, 111.60, -6.70],
])

STUDY_OBJECT_SIGMA = 5.0
MAP_OBJECT_SIGMA = 10.0
MAP_TRUE_POSE = Pose2P(math.pi / 3, 40.0)
MAP_SAMPLES = {2: 240, 3: 120}

TRUE_PHI12 = (-math.pi / 36, math.pi / 36)
TRUE_PHI3 = (-math.pi / 3 - math.pi / 36, -math.pi / 3 + math.pi / 36)
TRUE_W = (35.0, 45.0)
START_DPHI = (-math.pi / 72, math.pi / 72)
START_DW = (-5.0, 5.0)

CAMERA_MARGIN = 6.0  # in units of sigma_eps
GRID_SPACING = 1.0


class SystemId(enum.IntEnum):
    S1_CAMERA_DELTA = 1
    S2_CAMERA_GAUSSIAN = 2
    S3_LATERATION = 3


@dataclass(frozen=True, eq=False)
class SystemSpec:
    id: SystemId
    projectors: tuple[Projector, ...]
    object_sigma: float
    features: np.ndarray = field(default_factory=lambda: BODY_POINTS.copy())

    @property
    def L(self) -> int:
        return len(self.projectors)


def make_system(number: int, object_sigma: float | None = None, features=None,
                projectors: tuple[Projector, ...] | None = None) -> SystemSpec:
    """System 1/2: orthogonal camera pair; system 3: three lateration sources.

    ``object_sigma`` defaults to the 6D-study value (0 for system 1, 5 otherwise).
    ``features`` and ``projectors`` replace the default body and devices.
    """
    sid = SystemId(int(number))
    override = projectors
    if sid is SystemId.S3_LATERATION:
        projectors = (Lateration((0.0, -1000.0, 0.0)), Lateration((1000.0, 0.0, 0.0)),
                      Lateration((0.0, 0.0, 1000.0)))
    else:
        projectors = (ParallelCamera(0.0), ParallelCamera(math.pi / 2))
    if sid is SystemId.S1_CAMERA_DELTA:
        sigma = 0.0
    else:
        sigma = STUDY_OBJECT_SIGMA if object_sigma is None else float(object_sigma)
    if override is not None:
        projectors = tuple(override)
    pts = BODY_POINTS.copy() if features is None else np.atleast_2d(np.asarray(features, dtype=float))
    return SystemSpec(sid, projectors, sigma, pts)


@dataclass(frozen=True)
class ScenarioConfig:
    id: str
    sigma_eps: float = 5.0
    deform_scales: tuple[float, float, float] = (1.0, 1.0, 1.0)
    snr: float | None = None
    object_sigma_override: float | None = None

    @property
    def deformed(self) -> bool:
        return any(s != 1.0 for s in self.deform_scales)


SCENARIOS = {
    "I": ScenarioConfig("I", 5.0),
    "II": ScenarioConfig("II", 20.0),
    "III": ScenarioConfig("III", 5.0, (0.8, 1.0, 1.2)),
    "IV": ScenarioConfig("IV", 5.0, snr=0.5),
}


def make_scenario(name: str, **overrides) -> ScenarioConfig:
    try:
        base = SCENARIOS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}") from None
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(base, **overrides)


def default_object(sigma: float = 0.0, features=None) -> ObjectModel:
    """The six-point asymmetric test body; delta features unless ``sigma > 0``."""
    return ObjectModel.from_points(BODY_POINTS if features is None else features, sigma)


def _grid_for(projector: Projector, y: np.ndarray, sigma_eps: float, spacing: float) -> GridSpec:
    if isinstance(projector, ParallelCamera):
        return GridSpec.fit(y, CAMERA_MARGIN * sigma_eps, spacing)
    top = math.ceil(2.0 * float(np.max(y)) / spacing) * spacing
    return GridSpec((0.0,), (spacing,), (int(round(top / spacing)) + 1,))


def synthesize(system: SystemSpec, scenario: ScenarioConfig, true_pose: Pose6D | Pose2P,
               seed: int = 0, spacing: float = GRID_SPACING) -> Problem:
    """Simulate the measured densities of every device for ``true_pose``.

    The deformation of scenario III acts on the measured body only; the
    returned object model keeps the undeformed feature centers.
    """
    pts = deform(system.features, scenario.deform_scales) if scenario.deformed else system.features
    rot, shift = true_pose.affine()
    u = (pts + shift) @ rot.T
    kernel = SensingKernel(scenario.sigma_eps)
    noise_seeds = np.random.SeedSequence(seed).generate_state(system.L)
    observations = []
    for l, projector in enumerate(system.projectors):
        y = projector.project(u)
        grid = _grid_for(projector, y, scenario.sigma_eps, spacing)
        g = convolve_gaussian(splat_points(y, grid), kernel)
        if scenario.snr is not None:
            g = add_noise(g, scenario.snr, int(noise_seeds[l]))
        observations.append(Observation(g, projector, scenario.sigma_eps))
    sigma = system.object_sigma if scenario.object_sigma_override is None \
        else scenario.object_sigma_override
    if system.id is SystemId.S1_CAMERA_DELTA:
        sigma = 0.0
    return Problem(default_object(sigma, system.features), tuple(observations), type(true_pose))


def _uniform(rng, bounds):
    return rng.uniform(bounds[0], bounds[1])


def sample_true_pose(seed: int) -> Pose6D:
    rng = np.random.default_rng(seed)
    phi = (_uniform(rng, TRUE_PHI12), _uniform(rng, TRUE_PHI12), _uniform(rng, TRUE_PHI3))
    w = tuple(_uniform(rng, TRUE_W) for _ in range(3))
    return Pose6D(phi, w)


def sample_start_offset(seed: int) -> Pose6D:
    rng = np.random.default_rng(seed)
    dphi = tuple(_uniform(rng, START_DPHI) for _ in range(3))
    dw = tuple(_uniform(rng, START_DW) for _ in range(3))
    return Pose6D(dphi, dw)


def study_samples(problem: Problem, R: int, seed: int) -> SampleSet | None:
    """Monte-Carlo sample set for a run, or ``None`` for all-delta objects."""
    if problem.object.all_delta:
        return None
    return sample_components(problem.object, R, seed)


@dataclass(frozen=True)
class RunSeeds:
    run: int
    run_seed: int
    pose: int
    noise: int
    start: int
    samples: int

    @classmethod
    def derive(cls, master_seed: int, run: int) -> "RunSeeds":
        # Counter-based: run k's stream depends only on (master_seed, k).
        run_seed = int(np.random.SeedSequence([int(master_seed), int(run)]).generate_state(1)[0])
        sub = np.random.SeedSequence(run_seed).generate_state(4)
        return cls(run, run_seed, *(int(s) for s in sub))


@dataclass
class RunRecord:
    run: int
    seed: int
    true_pose: Pose6D
    start_pose: Pose6D
    estimate: Pose6D
    objective_value: float
    iterations: int
    converged: bool
    error: str | None = None

    @property
    def residual(self) -> np.ndarray:
        return self.estimate.to_vector() - self.true_pose.to_vector()


@dataclass
class StudyResult:
    system: int
    scenario: str
    M: int
    R: int
    master_seed: int
    records: list[RunRecord]
    rms: np.ndarray = field(init=False)

    def __post_init__(self):
        res = np.array([r.residual for r in self.records])
        self.rms = np.sqrt(np.mean(res ** 2, axis=0))

    @property
    def failures(self) -> int:
        return sum(r.error is not None for r in self.records)

    @property
    def nonconverged(self) -> int:
        return sum(not r.converged for r in self.records)


def run_one(system: SystemSpec, scenario: ScenarioConfig, R: int, seeds: RunSeeds,
            opts: OptimizerOptions = OptimizerOptions(),
            schedule: AnnealSchedule | None = None, spacing: float = GRID_SPACING) -> RunRecord:
    truth = sample_true_pose(seeds.pose)
    start = truth + sample_start_offset(seeds.start)
    try:
        problem = synthesize(system, scenario, truth, seeds.noise, spacing)
        samples = study_samples(problem, R, seeds.samples)
        res = estimate_pose(problem, start, samples, opts, schedule)
    except MixposeError as exc:
        log.warning("run %d failed: %s", seeds.run, exc)
        return RunRecord(seeds.run, seeds.run_seed, truth, start, start, 0.0, 0, False,
                         f"{type(exc).__name__}: {exc}")
    return RunRecord(seeds.run, seeds.run_seed, truth, start, res.pose, res.objective_value,
                     res.iterations, res.converged)


def _run_task(args):
    try:
        return run_one(*args)
    except Exception:  # pragma: no cover - surfaced in the parent
        raise RuntimeError(traceback.format_exc())


def run_study(system: SystemSpec, scenario: ScenarioConfig, M: int, R: int = 1000,
              master_seed: int = 0, jobs: int = 1, opts: OptimizerOptions = OptimizerOptions(),
              schedule: AnnealSchedule | None = None, spacing: float = GRID_SPACING) -> StudyResult:
    """``M`` independent randomized 6D estimations; records come back in run order."""
    if M < 1:
        raise ValueError("M must be at least 1")
    tasks = [(system, scenario, R, RunSeeds.derive(master_seed, k), opts, schedule, spacing)
             for k in range(M)]
    if jobs <= 1:
        records = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, M // (4 * jobs))))
    return StudyResult(int(system.id), scenario.id, M, R, master_seed, records)


@dataclass(frozen=True)
class MapSettings:
    phi_range: tuple[float, float] = (math.pi / 3 - math.pi / 6, math.pi / 3 + math.pi / 6)
    w_range: tuple[float, float] = (20.0, 60.0)
    resolution: int = 201


def map_system(system_number: int, object_sigma: float | None = None, **kw) -> SystemSpec:
    """System as configured for the reduced-pose maps (object sigma 10 by default)."""
    sigma = MAP_OBJECT_SIGMA if object_sigma is None else object_sigma
    return make_system(system_number, sigma, **kw)


def run_map(system: SystemSpec | int, scenario: ScenarioConfig, seed: int = 0,
            R: int | None = None, settings: MapSettings = MapSettings(),
            spacing: float = GRID_SPACING) -> ObjectiveMap:
    """Reduced-pose objective map around the true value ``(pi/3, 40)``.

    ``R`` defaults to 240 samples per feature for system 2 and 120 for system 3.
    """
    if not isinstance(system, SystemSpec):
        system = map_system(system)
    problem = synthesize(system, scenario, MAP_TRUE_POSE, seed, spacing)
    if problem.object.all_delta:
        samples = None
    else:
        R = MAP_SAMPLES.get(int(system.id), 240) if R is None else R
        samples = sample_components(problem.object, R, int(np.random.SeedSequence([seed, 1]).generate_state(1)[0]))
    return objective_map(problem, samples, settings.phi_range, settings.w_range, settings.resolution)


CAMERA_MISALIGNMENT = 0.05
LATERATION_PERTURBATION = 3.0
# Known poses for lateration calibration: rotations spread widely and
# translations across a +-500 box, so every source sees the body from
# several directions.
LATERATION_CAL_POSES = 12
LATERATION_CAL_SPREAD = 500.0


@dataclass
class CalibrationCase:
    """Synthetic calibration problem with known truth and a perturbed start.

    ``problems``, ``poses`` and ``samples`` are parallel lists, one entry per
    known pose of the calibration body.
    """

    problems: list[Problem]
    poses: list[Pose6D]
    truth: tuple[Projector, ...]
    initial: tuple[Projector, ...]
    free_mask: tuple[tuple[bool, ...], ...]
    samples: list[SampleSet | None]


@dataclass
class CalibrationResult:
    case: CalibrationCase
    estimate: list[Projector]

    @property
    def errors(self) -> np.ndarray:
        """Absolute errors of the free parameters, in device order."""
        out = []
        for t, e, m in zip(self.case.truth, self.estimate, self.case.free_mask):
            out.extend(np.abs(e.params - t.params)[np.asarray(m)])
        return np.array(out)


def gauge_pose(pose: Pose6D, q: np.ndarray, a: np.ndarray) -> Pose6D:
    """Express ``pose`` in the frame ``x -> q @ (x - a)``."""
    rot, w = pose.affine()
    return Pose6D(euler_angles(q @ rot), w - rot.T @ a)


def calibration_poses(seed: int, n: int, spread: float) -> list[Pose6D]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        phi = rng.uniform(-math.pi, math.pi, 3) * np.array([1.0, 0.4, 1.0])
        w = rng.uniform(-spread, spread, 3) + np.mean(TRUE_W)
        out.append(Pose6D(phi, w))
    return out


def calibration_case(system_number: int, seed: int = 0, perturbation: float | None = None,
                     scenario: ScenarioConfig = SCENARIOS["I"], R: int = 1000,
                     object_sigma: float | None = None, spacing: float = GRID_SPACING) -> CalibrationCase:
    """Noiseless round-trip setup for device calibration at known poses.

    Cameras: one study pose; the first camera is pinned at 0 and the second,
    truly at ``pi/2 + perturbation``, starts from its nominal ``pi/2``.
    Lateration: the three sources are moved into gauge form (first at the
    origin, second on the first axis, third in the first plane) and the body
    is shown in several widely spread poses; the three free coordinates
    start off by up to ``perturbation`` each. The lateration body defaults to
    exact markers (``object_sigma=0``).
    """
    seeds = RunSeeds.derive(seed, 0)
    if int(system_number) == SystemId.S3_LATERATION and object_sigma is None:
        object_sigma = 0.0
    base = make_system(system_number, object_sigma)
    if base.id is SystemId.S3_LATERATION:
        delta = LATERATION_PERTURBATION if perturbation is None else perturbation
        q, a, gauged = lateration_gauge([p.gamma for p in base.projectors])
        poses = [gauge_pose(p, q, a)
                 for p in calibration_poses(seeds.pose, LATERATION_CAL_POSES, LATERATION_CAL_SPREAD)]
        truth = tuple(Lateration(g) for g in gauged)
        mask = ((False, False, False), (True, False, False), (True, True, False))
        rng = np.random.default_rng(seeds.start)
        initial = tuple(
            Lateration(np.where(m, g + rng.uniform(-delta, delta, 3), g))
            for g, m in zip(gauged, np.array(mask))
        )
    else:
        delta = CAMERA_MISALIGNMENT if perturbation is None else perturbation
        poses = [sample_true_pose(seeds.pose)]
        truth = (ParallelCamera(0.0), ParallelCamera(math.pi / 2 + delta))
        initial = (ParallelCamera(0.0), ParallelCamera(math.pi / 2))
        mask = ((False,), (True,))
    system = make_system(system_number, object_sigma, projectors=truth)
    noise = np.random.SeedSequence(seeds.noise).generate_state(len(poses))
    sample_seeds = np.random.SeedSequence(seeds.samples).generate_state(len(poses))
    problems, samples = [], []
    for pose, ns, ss in zip(poses, noise, sample_seeds):
        prob = synthesize(system, replace(scenario, snr=None), pose, int(ns), spacing)
        problems.append(prob)
        samples.append(study_samples(prob, R, int(ss)))
    return CalibrationCase(problems, poses, truth, initial, mask, samples)


def run_calibration(case: CalibrationCase, opts: OptimizerOptions = OptimizerOptions()) -> CalibrationResult:
    samples = None if all(s is None for s in case.samples) else case.samples
    est = calibrate(case.problems, case.poses, case.initial, case.free_mask, samples, opts)
    return CalibrationResult(case, est)
