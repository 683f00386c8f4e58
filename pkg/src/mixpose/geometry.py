"""Poses, rigid transforms and the two device projections (parallel camera, lateration)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Pose6D:
    """Three rotation angles (rad) and a translation applied before rotating."""

    phi: tuple[float, float, float]
    w: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "w", tuple(float(v) for v in self.w))
        if len(self.phi) != 3 or len(self.w) != 3:
            raise ValueError("Pose6D needs three angles and three translations")

    size = 6

    def to_vector(self) -> np.ndarray:
        return np.array(self.phi + self.w)

    @classmethod
    def from_vector(cls, x) -> "Pose6D":
        x = [float(v) for v in x]
        return cls(tuple(x[:3]), tuple(x[3:6]))

    def affine(self) -> tuple[np.ndarray, np.ndarray]:
        return rotation_matrix(self.phi), np.array(self.w)

    def __add__(self, other: "Pose6D") -> "Pose6D":
        return Pose6D.from_vector(self.to_vector() + other.to_vector())


@dataclass(frozen=True)
class Pose2P:
    """Reduced pose: one in-plane angle and one translation shared by all axes."""

    phi: float
    w: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "w", float(self.w))

    size = 2

    def to_vector(self) -> np.ndarray:
        return np.array([self.phi, self.w])

    @classmethod
    def from_vector(cls, x) -> "Pose2P":
        return cls(float(x[0]), float(x[1]))

    def affine(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.phi), math.sin(self.phi)
        rot = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
        return rot, np.full(3, self.w)


def _elementary(axis: int, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    m = np.eye(3)
    j, k = [(1, 2), (2, 0), (0, 1)][axis]
    m[j, j] = c
    m[j, k] = -s
    m[k, j] = s
    m[k, k] = c
    return m


def rotation_matrix(phi) -> np.ndarray:
    """``R3(phi3) @ R2(phi2) @ R1(phi1)``, each a counter-clockwise rotation about one axis."""
    phi = [float(v) for v in phi]
    return _elementary(2, phi[2]) @ _elementary(1, phi[1]) @ _elementary(0, phi[0])


def euler_angles(rot) -> tuple[float, float, float]:
    """Inverse of :func:`rotation_matrix` for ``|phi2| < pi/2``."""
    rot = np.asarray(rot, dtype=float)
    phi2 = math.asin(max(-1.0, min(1.0, -rot[2, 0])))
    return math.atan2(rot[2, 1], rot[2, 2]), phi2, math.atan2(rot[1, 0], rot[0, 0])


def rigid_transform(z, pose: Pose6D) -> np.ndarray:
    """``R(phi) @ (z + w)``; accepts a single point or rows of points."""
    rot, w = pose.affine()
    return (np.asarray(z, dtype=float) + w) @ rot.T


def rigid_transform_2p(z, pose: Pose2P) -> np.ndarray:
    rot, w = pose.affine()
    return (np.asarray(z, dtype=float) + w) @ rot.T


@dataclass(frozen=True)
class ParallelCamera:
    """Parallel-beam camera rotated by ``gamma`` about the third axis."""

    gamma: float
    m = 2

    def __post_init__(self):
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def params(self) -> np.ndarray:
        return np.array([self.gamma])

    def with_params(self, p) -> "ParallelCamera":
        return ParallelCamera(float(p[0]))

    def project(self, u) -> np.ndarray:
        return camera_project(u, self.gamma)


@dataclass(frozen=True)
class Lateration:
    """Range sensor at ``gamma`` reporting Euclidean distances."""

    gamma: tuple[float, float, float]
    m = 1

    def __post_init__(self):
        g = tuple(float(v) for v in self.gamma)
        if len(g) != 3:
            raise ValueError("lateration source needs three coordinates")
        object.__setattr__(self, "gamma", g)

    @property
    def params(self) -> np.ndarray:
        return np.array(self.gamma)

    def with_params(self, p) -> "Lateration":
        return Lateration(tuple(p))

    def project(self, u) -> np.ndarray:
        return laterate(u, self.gamma)


Projector = ParallelCamera | Lateration


def camera_project(u, gamma: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    c, s = math.cos(gamma), math.sin(gamma)
    return np.stack([c * u[..., 0] + s * u[..., 1], u[..., 2]], axis=-1)


def laterate(u, gamma) -> np.ndarray | float:
    d = np.linalg.norm(np.asarray(u, dtype=float) - np.asarray(gamma, dtype=float), axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def deform(points, scales) -> np.ndarray:
    """Scale each coordinate about the centroid of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("deform needs at least one point")
    c = pts.mean(axis=0)
    scales = np.asarray(scales, dtype=float)
    # Unit-scale axes are passed through so the identity is exact.
    return np.where(scales == 1.0, pts, c + scales * (pts - c))


def lateration_gauge(sources) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rigid frame pinning three lateration sources to gauge form.

    Returns ``(Q, a, gauged)`` with ``gauged[k] = Q @ (sources[k] - a)``, so
    that source 1 sits at the origin, source 2 on the first axis and source 3
    in the first coordinate plane.
    """
    s = np.asarray(sources, dtype=float)
    if s.shape != (3, 3):
        raise ValueError("gauge fixing needs exactly three sources")
    a = s[0]
    e1 = s[1] - a
    e1 /= np.linalg.norm(e1)
    t = s[2] - a
    e2 = t - (t @ e1) * e1
    n2 = np.linalg.norm(e2)
    if n2 < 1e-12:
        raise ValueError("gauge fixing needs non-collinear sources")
    e2 /= n2
    q = np.stack([e1, e2, np.cross(e1, e2)])
    return q, a, (s - a) @ q.T
