"""Matching objectives between an object mixture model and measured densities.

For a pose, every object sample is pushed through each device's observation
function and the measured densities are read at the predicted positions.
The per-sample product over devices is averaged over all samples; the product
sits inside the average because all devices see the same object sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from . import kernels
from .density import MeasurementDensity, ObjectModel, SampleSet
from .errors import InvalidModelError
from .geometry import Lateration, ParallelCamera, Pose2P, Pose6D, Projector


@dataclass(frozen=True)
class Observation:
    density: MeasurementDensity
    projector: Projector
    # Physical sensing-kernel width the density was built with, if known.
    sigma_eps: float | None = None
    _source: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.density.grid.dim != self.projector.m:
            raise ValueError(
                f"density is {self.density.grid.dim}D but projector outputs {self.projector.m}D"
            )
        if isinstance(self.projector, Lateration):
            object.__setattr__(self, "_source", np.array(self.projector.gamma))

    def accumulate(self, u: np.ndarray, acc: np.ndarray) -> None:
        """Multiply ``acc`` in place by this view's density at the projections of ``u``."""
        g, v = self.density.grid, self.density.values
        if isinstance(self.projector, ParallelCamera):
            kernels.camera_accumulate(u, self.projector.gamma, v, g.origin[0], g.origin[1],
                                      g.spacing[0], g.spacing[1], acc)
        else:
            kernels.lateration_accumulate(u, self._source, v, g.origin[0], g.spacing[0], acc)

    def with_density(self, density: MeasurementDensity, sigma_eps: float | None = None) -> "Observation":
        return Observation(density, self.projector, sigma_eps)

    def with_projector(self, projector: Projector) -> "Observation":
        return Observation(self.density, projector, self.sigma_eps)


@dataclass(frozen=True)
class Problem:
    object: ObjectModel
    observations: tuple[Observation, ...]
    pose_kind: type = Pose6D

    def __post_init__(self):
        obs = tuple(self.observations)
        if not obs:
            raise ValueError("a problem needs at least one observation")
        if self.pose_kind not in (Pose6D, Pose2P):
            raise ValueError(f"unknown pose kind {self.pose_kind!r}")
        object.__setattr__(self, "observations", obs)

    @property
    def L(self) -> int:
        return len(self.observations)

    def replace_observations(self, observations: Sequence[Observation]) -> "Problem":
        return Problem(self.object, tuple(observations), self.pose_kind)


def _points(pose, z: np.ndarray) -> np.ndarray:
    rot, shift = pose.affine()
    return kernels.transform(z, rot, shift)


def sample_products(problem: Problem, pose, z: np.ndarray) -> np.ndarray:
    """Per-sample product over views of the interpolated densities."""
    u = _points(pose, z)
    acc = np.ones(u.shape[0])
    for obs in problem.observations:
        obs.accumulate(u, acc)
    return acc


def objective_mc(problem: Problem, pose, samples: SampleSet) -> float:
    z = samples.flat
    return float(sample_products(problem, pose, z).sum()) / z.shape[0]


def objective_delta(problem: Problem, pose) -> float:
    """Closed form for exactly known features: mean over features of the product over views."""
    if not problem.object.all_delta:
        raise InvalidModelError("objective_delta requires every feature to be a delta component")
    z = np.ascontiguousarray(problem.object.centers)
    return float(sample_products(problem, pose, z).sum()) / z.shape[0]


def objective_naive(problem: Problem, pose, samples: SampleSet) -> float:
    """Product over views of independent per-view averages.

    Ignores that every view observes the same object sample. Kept only as
    a baseline to compare against :func:`objective_mc`.
    """
    z = samples.flat
    u = _points(pose, z)
    total = 1.0
    for obs in problem.observations:
        acc = np.ones(u.shape[0])
        obs.accumulate(u, acc)
        total *= float(acc.sum()) / z.shape[0]
    return total


def objective(problem: Problem, pose, samples: SampleSet | None = None) -> float:
    """Closed form for all-delta objects, Monte-Carlo otherwise."""
    if samples is None:
        return objective_delta(problem, pose)
    return objective_mc(problem, pose, samples)


@dataclass(frozen=True)
class ObjectiveMap:
    phis: np.ndarray
    ws: np.ndarray
    values: np.ndarray  # shape (len(phis), len(ws))

    @property
    def argmax(self) -> tuple[int, int]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(i), int(j)

    @property
    def argmax_pose(self) -> Pose2P:
        i, j = self.argmax
        return Pose2P(self.phis[i], self.ws[j])

    @property
    def cell(self) -> tuple[float, float]:
        return float(self.phis[1] - self.phis[0]), float(self.ws[1] - self.ws[0])

    def local_maxima(self, rel: float = 0.8) -> list[tuple[int, int]]:
        return local_maxima(self.values, rel)


def objective_map(problem: Problem, samples: SampleSet | None, phi_range, w_range,
                  resolution=201) -> ObjectiveMap:
    """Evaluate the objective on a ``(phi, w)`` lattice of reduced poses.

    ``resolution`` is one int for both axes or a ``(n_phi, n_w)`` pair. With
    ``samples=None`` the delta closed form is used.
    """
    if problem.pose_kind is not Pose2P:
        raise ValueError("objective maps need a problem with reduced (phi, w) poses")
    n_phi, n_w = (resolution, resolution) if np.ndim(resolution) == 0 else resolution
    (p0, p1), (w0, w1) = phi_range, w_range
    if not (p1 > p0 and w1 > w0 and n_phi >= 2 and n_w >= 2):
        raise ValueError(f"empty map range phi={phi_range} w={w_range} res={resolution}")
    phis = np.linspace(p0, p1, n_phi)
    ws = np.linspace(w0, w1, n_w)
    if samples is None:
        if not problem.object.all_delta:
            raise InvalidModelError("a sample set is required for non-delta objects")
        z = np.ascontiguousarray(problem.object.centers)
    else:
        z = samples.flat
    values = np.empty((n_phi, n_w))
    for i, phi in enumerate(phis):
        for j, w in enumerate(ws):
            values[i, j] = float(sample_products(problem, Pose2P(phi, w), z).sum()) / z.shape[0]
    return ObjectiveMap(phis, ws, values)


def local_maxima(values: np.ndarray, rel: float = 0.8) -> list[tuple[int, int]]:
    """Plateau-merged 8-neighbour local maxima above ``rel * max``.

    Each connected plateau counts once and is reported by its first cell.
    """
    top = float(values.max())
    if not top > 0:
        return []
    peak = (values == ndimage.maximum_filter(values, size=3, mode="nearest")) & (values >= rel * top)
    labels, n = ndimage.label(peak, structure=np.ones((3, 3)))
    out = []
    for k in range(1, n + 1):
        cells = np.argwhere(labels == k)
        out.append((int(cells[0, 0]), int(cells[0, 1])))
    return out
