"""Derivative-free maximization of the matching objective.

The simplex search is a plain Nelder-Mead (reflection 1, expansion 2,
contraction 0.5, shrink 0.5) run on ``-f``. Pose estimation optionally walks a
coarse-to-fine schedule of sensing-kernel widths, warm-starting each level
from the previous optimum. Calibration reuses the same machinery over the
device parameters with the pose held fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .density import SampleSet, blur, normalize
from .errors import NoOverlapError, OptimizerError
from .geometry import ParallelCamera, Pose2P, Pose6D, Projector
from .objective import Problem, objective

log = logging.getLogger(__name__)

ANGLE_STEP = 0.02
LENGTH_STEP = 2.0


@dataclass(frozen=True)
class OptimizerOptions:
    max_iters: int = 5000
    xtol: float = 1e-5
    # Relative to the magnitude of the values seen; objective values are tiny densities.
    ftol: float = 1e-8
    initial_simplex_scale: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.xtol > 0 and self.ftol > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class AnnealSchedule:
    sigma_eps_levels: tuple[float, ...]

    def __post_init__(self):
        levels = tuple(float(s) for s in self.sigma_eps_levels)
        if not levels or any(s <= 0 for s in levels):
            raise ValueError("anneal levels must be positive")
        if any(b >= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"anneal levels must strictly decrease, got {levels}")
        object.__setattr__(self, "sigma_eps_levels", levels)


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    evaluations: int
    trace: list[tuple[np.ndarray, float]] = field(default_factory=list)


def nelder_mead(f: Callable[[np.ndarray], float], x0, opts: OptimizerOptions = OptimizerOptions(),
                keep_trace: bool = False) -> NelderMeadResult:
    """Maximize ``f`` starting from ``x0``.

    Stops once the simplex fits inside an ``xtol`` box around its best vertex
    and the value spread is below ``ftol * max(|best|, |f(x0)|)``, or after
    ``max_iters`` iterations. Ties in vertex ordering keep their previous order.
    """
    x0 = np.asarray(x0, dtype=float).copy()
    n = x0.size
    scale = np.full(n, 0.05) if opts.initial_simplex_scale is None else \
        np.broadcast_to(np.asarray(opts.initial_simplex_scale, dtype=float), (n,))
    nevals = 0

    def neg(x):
        nonlocal nevals
        nevals += 1
        return -float(f(x))

    f0 = neg(x0)
    if not math.isfinite(f0):
        raise OptimizerError(f"objective is not finite at the start point {x0}")
    verts = np.empty((n + 1, n))
    fv = np.empty(n + 1)
    verts[0], fv[0] = x0, f0
    for k in range(n):
        v = x0.copy()
        v[k] += scale[k]
        verts[k + 1], fv[k + 1] = v, neg(v)
    if not np.all(np.isfinite(fv)):
        raise OptimizerError("objective is not finite on the initial simplex")

    trace = []
    converged = False
    it = 0
    while True:
        order = np.argsort(fv, kind="stable")
        verts, fv = verts[order], fv[order]
        if keep_trace:
            trace.append((verts[0].copy(), -fv[0]))
        spread = float(np.max(np.abs(fv[1:] - fv[0])))
        size = float(np.max(np.abs(verts[1:] - verts[0])))
        if size <= opts.xtol and spread <= opts.ftol * max(abs(fv[0]), abs(f0)):
            converged = True
            break
        if it >= opts.max_iters:
            break
        it += 1

        centroid = verts[:-1].mean(axis=0)
        worst = verts[-1]
        xr = centroid + (centroid - worst)
        fr = neg(xr)
        if fr < fv[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = neg(xe)
            if fe < fr:
                verts[-1], fv[-1] = xe, fe
            else:
                verts[-1], fv[-1] = xr, fr
            continue
        if fr < fv[-2]:
            verts[-1], fv[-1] = xr, fr
            continue
        if fr < fv[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = neg(xc)
            if fc <= fr:
                verts[-1], fv[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = neg(xc)
            if fc < fv[-1]:
                verts[-1], fv[-1] = xc, fc
                continue
        for k in range(1, n + 1):
            verts[k] = verts[0] + 0.5 * (verts[k] - verts[0])
            fv[k] = neg(verts[k])

    return NelderMeadResult(verts[0].copy(), -float(fv[0]), it, converged, nevals, trace)


@dataclass
class EstimationResult:
    pose: Pose6D | Pose2P
    objective_value: float
    iterations: int
    converged: bool
    trace: list | None = None


def default_pose_scale(kind: type) -> np.ndarray:
    if kind is Pose2P:
        return np.array([ANGLE_STEP, LENGTH_STEP])
    return np.array([ANGLE_STEP] * 3 + [LENGTH_STEP] * 3)


def _with_scale(opts: OptimizerOptions, scale) -> OptimizerOptions:
    if opts.initial_simplex_scale is not None:
        return opts
    return OptimizerOptions(opts.max_iters, opts.xtol, opts.ftol, tuple(float(s) for s in scale))


def anneal_problem(problem: Problem, sigma_eps: float) -> Problem:
    """Observations re-blurred to an effective sensing width of ``sigma_eps``.

    Gaussian widths add in quadrature, so a density measured at ``s0`` is
    blurred by ``sqrt(sigma_eps**2 - s0**2)``. Requesting the physical width
    returns the problem unchanged.
    """
    obs = []
    for o in problem.observations:
        if o.sigma_eps is None:
            raise ValueError("annealing needs observations that record their sensing width")
        if sigma_eps < o.sigma_eps - 1e-12:
            raise ValueError(f"cannot sharpen a density from {o.sigma_eps} to {sigma_eps}")
        extra = math.sqrt(max(sigma_eps ** 2 - o.sigma_eps ** 2, 0.0))
        if extra < 1e-9:
            obs.append(o)
        else:
            obs.append(o.with_density(normalize(blur(o.density, extra)), sigma_eps))
    return problem.replace_observations(obs)


def _pose_kind(problem: Problem, pose0) -> type:
    kind = problem.pose_kind
    if not isinstance(pose0, kind):
        raise ValueError(f"start pose {type(pose0).__name__} does not match problem pose kind {kind.__name__}")
    return kind


def _check_overlap(f, x0, scale):
    probes = [x0] + [x0 + np.eye(len(x0))[k] * scale[k] for k in range(len(x0))]
    if all(f(x) == 0.0 for x in probes):
        raise NoOverlapError(
            "objective is zero over the whole starting simplex; try a broader anneal "
            "schedule or a start pose closer to the object"
        )


def estimate_pose(problem: Problem, pose0, samples: SampleSet | None = None,
                  opts: OptimizerOptions = OptimizerOptions(),
                  schedule: AnnealSchedule | None = None,
                  keep_trace: bool = False) -> EstimationResult:
    """Locally maximize the objective over the pose, starting at ``pose0``.

    ``samples=None`` selects the closed form for all-delta objects. With a
    schedule, each level is optimized on the measured densities widened to
    that level, warm-started from the previous optimum; the last level must
    be the physical width.
    """
    kind = _pose_kind(problem, pose0)
    if schedule is not None:
        physical = {o.sigma_eps for o in problem.observations}
        if len(physical) != 1 or None in physical or \
                abs(schedule.sigma_eps_levels[-1] - physical.pop()) > 1e-9:
            raise ValueError("the last anneal level must equal the physical sensing width")
    opts = _with_scale(opts, default_pose_scale(kind))
    scale = np.asarray(opts.initial_simplex_scale)
    levels = schedule.sigma_eps_levels if schedule is not None else (None,)

    x = pose0.to_vector()
    total_iters = 0
    trace = [] if keep_trace else None
    res = None
    for level in levels:
        prob = problem if level is None else anneal_problem(problem, level)

        def f(v, prob=prob):
            return objective(prob, kind.from_vector(v), samples)

        _check_overlap(f, x, scale)
        res = nelder_mead(f, x, opts, keep_trace=keep_trace)
        log.debug("level %s: value %.6g after %d iterations", level, res.fun, res.iterations)
        x = res.x
        total_iters += res.iterations
        if keep_trace:
            trace.extend(res.trace)
    return EstimationResult(kind.from_vector(res.x), res.fun, total_iters, res.converged, trace)


def _device_scale(projector: Projector) -> np.ndarray:
    if isinstance(projector, ParallelCamera):
        return np.array([ANGLE_STEP])
    return np.full(3, LENGTH_STEP)


def calibrate(problem: Problem | Sequence[Problem], beta_fixed, gamma_init: Sequence[Projector],
              free_mask: Sequence[Sequence[bool]], samples: SampleSet | None = None,
              opts: OptimizerOptions = OptimizerOptions()) -> list[Projector]:
    """Maximize the objective over the free device parameters at a known pose.

    ``free_mask[l][k]`` marks parameter ``k`` of device ``l`` as free; fixed
    parameters stay at their ``gamma_init`` values, which is how the gauge is
    pinned (e.g. first camera angle, or first lateration source and some
    coordinates of the others).

    ``problem``, ``beta_fixed`` and ``samples`` may also be equal-length
    sequences: the same devices observing the object in several known poses.
    The objectives of the individual poses are summed.
    """
    if isinstance(problem, Problem):
        problems, poses, sample_sets = [problem], [beta_fixed], [samples]
    else:
        problems, poses = list(problem), list(beta_fixed)
        sample_sets = [None] * len(problems) if samples is None else list(samples)
        if not problems or not (len(problems) == len(poses) == len(sample_sets)):
            raise ValueError("need one pose and one sample set per calibration problem")
    L = problems[0].L
    if any(p.L != L for p in problems) or len(gamma_init) != L or len(free_mask) != L:
        raise ValueError("need one initial geometry and one mask per observation")
    params = [np.array(p.params, dtype=float) for p in gamma_init]
    masks = [np.asarray(m, dtype=bool) for m in free_mask]
    for p, m in zip(params, masks):
        if p.shape != m.shape:
            raise ValueError(f"mask of shape {m.shape} does not match parameters {p.shape}")
    if not any(m.any() for m in masks):
        raise ValueError("calibration needs at least one free parameter")

    x0 = np.concatenate([p[m] for p, m in zip(params, masks)])
    scale = np.concatenate([_device_scale(g)[m] for g, m in zip(gamma_init, masks)])
    opts = _with_scale(opts, scale)

    def devices(x) -> list[Projector]:
        out, k = [], 0
        for g, p, m in zip(gamma_init, params, masks):
            q = p.copy()
            q[m] = x[k:k + m.sum()]
            k += m.sum()
            out.append(g.with_params(q))
        return out

    def f(x):
        d = devices(x)
        total = 0.0
        for prob, pose, smp in zip(problems, poses, sample_sets):
            obs = [o.with_projector(g) for o, g in zip(prob.observations, d)]
            total += objective(prob.replace_observations(obs), pose, smp)
        return total

    _check_overlap(f, x0, np.asarray(opts.initial_simplex_scale))
    res = nelder_mead(f, x0, opts)
    return devices(res.x)


__all__ = [
    "AnnealSchedule",
    "EstimationResult",
    "NelderMeadResult",
    "OptimizerOptions",
    "anneal_problem",
    "calibrate",
    "estimate_pose",
    "nelder_mead",
]
