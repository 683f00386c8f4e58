"""Object-space mixture models and gridded measurement-space densities.

An object is a uniform mixture of per-feature densities (exact points or
axis-aligned Gaussians). A measurement is a nonnegative field on a regular
1D or 2D grid, normalized to unit integral and read back by (bi)linear
interpolation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d
from scipy.special import ndtri

from . import kernels
from .errors import DegenerateKernelError, InvalidModelError, OutOfGridError

# Kernel support in units of sigma.
TRUNCATE = 4.0
_BELOW_ONE = np.nextafter(1.0, 0.0)


class FeatureKind(enum.Enum):
    DELTA = "delta"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class FeatureComponent:
    kind: FeatureKind
    center: np.ndarray
    sigmas: np.ndarray | None = None

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).copy()
        if not np.all(np.isfinite(center)):
            raise InvalidModelError(f"non-finite feature center {center}")
        center.flags.writeable = False
        object.__setattr__(self, "center", center)
        if self.kind is FeatureKind.GAUSSIAN:
            sigmas = np.broadcast_to(np.asarray(self.sigmas, dtype=float), center.shape).copy()
            if not np.all(sigmas > 0):
                raise InvalidModelError(f"Gaussian feature needs positive sigmas, got {sigmas}")
            sigmas.flags.writeable = False
            object.__setattr__(self, "sigmas", sigmas)
        else:
            object.__setattr__(self, "sigmas", None)

    @classmethod
    def delta(cls, center) -> "FeatureComponent":
        return cls(FeatureKind.DELTA, center)

    @classmethod
    def gaussian(cls, center, sigmas) -> "FeatureComponent":
        return cls(FeatureKind.GAUSSIAN, center, sigmas)

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class ObjectModel:
    """Uniform-weight mixture of feature densities."""

    components: tuple[FeatureComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidModelError("object model needs at least one feature")
        if len({c.dim for c in comps}) != 1:
            raise InvalidModelError("all features must share one dimension")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_points(cls, points, sigma: float = 0.0) -> "ObjectModel":
        """Delta features when ``sigma == 0``, isotropic Gaussians otherwise."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if sigma > 0:
            return cls(tuple(FeatureComponent.gaussian(p, sigma) for p in pts))
        return cls(tuple(FeatureComponent.delta(p) for p in pts))

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def n_features(self) -> int:
        return len(self.components)

    @property
    def centers(self) -> np.ndarray:
        return np.array([c.center for c in self.components])

    @property
    def all_delta(self) -> bool:
        return all(c.kind is FeatureKind.DELTA for c in self.components)


@dataclass(frozen=True)
class GridSpec:
    """Regular grid; node ``j`` on axis ``a`` sits at ``origin[a] + j * spacing[a]``."""

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        origin = tuple(float(v) for v in np.atleast_1d(self.origin))
        spacing = tuple(float(v) for v in np.atleast_1d(self.spacing))
        counts = tuple(int(v) for v in np.atleast_1d(self.counts))
        if not (len(origin) == len(spacing) == len(counts)) or len(origin) not in (1, 2):
            raise ValueError("grid must be 1D or 2D with matching origin/spacing/counts")
        if any(s <= 0 for s in spacing):
            raise ValueError(f"grid spacing must be positive, got {spacing}")
        if any(c < 2 for c in counts):
            raise ValueError(f"grid needs at least 2 nodes per axis, got {counts}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "counts", counts)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + (n - 1) * s for o, s, n in zip(self.origin, self.spacing, self.counts))

    def axis(self, a: int) -> np.ndarray:
        return self.origin[a] + self.spacing[a] * np.arange(self.counts[a])

    def contains(self, y) -> bool:
        y = np.atleast_1d(y)
        return all(lo <= v <= hi for v, lo, hi in zip(y, self.origin, self.upper))

    @classmethod
    def fit(cls, points, margin: float, spacing: float = 1.0) -> "GridSpec":
        """Smallest integer-aligned grid holding ``points`` with ``margin`` on every side."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        lo = np.floor((pts.min(axis=0) - margin) / spacing) * spacing
        hi = np.ceil((pts.max(axis=0) + margin) / spacing) * spacing
        counts = np.round((hi - lo) / spacing).astype(int) + 1
        return cls(tuple(lo), (spacing,) * pts.shape[1], tuple(np.maximum(counts, 2)))


@dataclass(frozen=True)
class MeasurementDensity:
    grid: GridSpec
    values: np.ndarray
    normalization: float = 1.0

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != self.grid.counts:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.counts}")
        if np.any(values < 0):
            raise ValueError("density values must be nonnegative")
        if values.flags.writeable:
            values = values.copy()
            values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def mass(self) -> float:
        return float(self.values.sum()) * self.grid.cell_volume


@dataclass(frozen=True)
class SensingKernel:
    sigma_eps: float

    def __post_init__(self):
        if not self.sigma_eps > 0:
            raise DegenerateKernelError(f"sigma_eps must be positive, got {self.sigma_eps}")


@dataclass(frozen=True)
class SampleSet:
    """``samples[i, r]`` is draw ``r`` of feature ``i``."""

    samples: np.ndarray
    seed: int
    R: int
    flat: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64)
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        flat = np.ascontiguousarray(s.reshape(-1, s.shape[-1]))
        flat.flags.writeable = False
        object.__setattr__(self, "flat", flat)


def normalize(d: MeasurementDensity) -> MeasurementDensity:
    mass = d.mass
    if not mass > 0:
        raise ValueError("cannot normalize a density with zero mass")
    return MeasurementDensity(d.grid, d.values / mass, mass)


def splat_points(points, grid: GridSpec) -> MeasurementDensity:
    """Deposit unit mass per point onto its enclosing nodes with (bi)linear weights."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if grid.dim == 1 else pts[None, :]
    if pts.shape[1] != grid.dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, grid has {grid.dim}")
    values = np.zeros(grid.counts)
    for p in pts:
        if not grid.contains(p):
            raise OutOfGridError(f"point {tuple(p)} lies outside grid extent {grid.origin}..{grid.upper}")
        idx, frac = [], []
        for a in range(grid.dim):
            t = (p[a] - grid.origin[a]) / grid.spacing[a]
            i = min(int(math.floor(t)), grid.counts[a] - 2)
            idx.append(i)
            frac.append(t - i)
        if grid.dim == 1:
            values[idx[0]] += 1.0 - frac[0]
            values[idx[0] + 1] += frac[0]
        else:
            (i, j), (f, g) = idx, frac
            values[i, j] += (1 - f) * (1 - g)
            values[i, j + 1] += (1 - f) * g
            values[i + 1, j] += f * (1 - g)
            values[i + 1, j + 1] += f * g
    return MeasurementDensity(grid, values)


def gaussian_weights(sigma_cells: float) -> np.ndarray:
    radius = int(math.ceil(TRUNCATE * sigma_cells))
    x = np.arange(-radius, radius + 1, dtype=float)
    w = np.exp(-0.5 * (x / sigma_cells) ** 2)
    return w / w.sum()


def blur(d: MeasurementDensity, sigma_eps: float) -> MeasurementDensity:
    """Separable Gaussian blur without renormalization.

    Boundaries are mirror-padded, which keeps constant fields fixed and
    total mass unchanged.
    """
    values = np.array(d.values)
    for a, spacing in enumerate(d.grid.spacing):
        sigma_cells = sigma_eps / spacing
        if sigma_cells < 0.1:
            raise DegenerateKernelError(
                f"sigma_eps={sigma_eps} is below 0.1 cells (spacing {spacing}); kernel unresolvable"
            )
        values = correlate1d(values, gaussian_weights(sigma_cells), axis=a, mode="reflect")
    return MeasurementDensity(d.grid, values, d.normalization)


def convolve_gaussian(d: MeasurementDensity, kernel: SensingKernel) -> MeasurementDensity:
    return normalize(blur(d, kernel.sigma_eps))


def noise_std(d: MeasurementDensity, snr: float) -> float:
    """Noise level for a signal-to-noise ratio measured against the peak value."""
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    return float(d.values.max()) / snr


def add_noise(d: MeasurementDensity, snr: float, seed: int) -> MeasurementDensity:
    """Additive Gaussian noise with std ``max(values) / snr``, clamped at zero, renormalized."""
    std = noise_std(d, snr)
    rng = np.random.default_rng(seed)
    noisy = d.values + rng.normal(0.0, std, size=d.values.shape)
    np.maximum(noisy, 0.0, out=noisy)
    return normalize(MeasurementDensity(d.grid, noisy))


def interp(d: MeasurementDensity, y) -> float | np.ndarray:
    """(Bi)linear interpolation, zero outside the grid.

    ``y`` is one point (length ``dim``) or an array of shape ``(K, dim)``.
    """
    g = d.grid
    y = np.asarray(y, dtype=np.float64)
    if g.dim == 1:
        single = y.size == 1
        pts = y.reshape(-1, 1)
    else:
        single = y.ndim == 1
        pts = np.atleast_2d(y)
    if g.dim == 1:
        out = kernels.interp1d(d.values, g.origin[0], g.spacing[0], np.ascontiguousarray(pts[:, 0]))
    else:
        out = kernels.interp2d(d.values, g.origin[0], g.origin[1], g.spacing[0], g.spacing[1],
                               np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]))
    return float(out[0]) if single else out


def latin_hypercube_normal(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Standard-normal latin-hypercube design of shape ``(n, dim)``.

    Per axis, one uniform draw in each stratum ``[r/n, (r+1)/n)``, strata
    shuffled independently per axis, mapped through the normal quantile.
    """
    u = np.empty((n, dim))
    for a in range(dim):
        strata = rng.permutation(n)
        u[:, a] = (strata + rng.random(n)) / n
    return ndtri(np.minimum(u, _BELOW_ONE))


def symmetric_latin_hypercube_normal(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Latin-hypercube design whose rows come in mirrored pairs ``x, -x``.

    Still exactly one point per stratum on every axis: pair ``j`` takes a
    random stratum ``s`` (from a shuffled half, flipped at random) and its
    partner takes the mirrored stratum ``n - 1 - s``. For odd ``n`` the last
    row is the center. The mirror pairing cancels the odd part of the
    sampling error, which is what biases the location of the optimum.
    """
    h = n // 2
    z = np.zeros((n, dim))
    for a in range(dim):
        s = rng.permutation(h)
        s = np.where(rng.random(h) < 0.5, n - 1 - s, s)
        v = ndtri(np.minimum((s + rng.random(h)) / n, _BELOW_ONE))
        z[:h, a] = v
        z[h:2 * h, a] = -v
    return z


def sample_components(model: ObjectModel, R: int, seed: int, symmetric: bool = True) -> SampleSet:
    """Draw ``R`` latin-hypercube samples for every feature.

    Gaussian features get a fresh standard-normal design each, scaled by the
    feature sigmas and shifted to its center; delta features repeat the center.
    ``symmetric=False`` uses independent (unpaired) strata draws.
    """
    if R < 1:
        raise ValueError(f"R must be at least 1, got {R}")
    rng = np.random.default_rng(seed)
    design = symmetric_latin_hypercube_normal if symmetric else latin_hypercube_normal
    out = np.empty((model.n_features, R, model.dim))
    for i, comp in enumerate(model.components):
        if comp.kind is FeatureKind.DELTA:
            out[i] = comp.center
        else:
            out[i] = comp.center + comp.sigmas * design(R, model.dim, rng)
    return SampleSet(out, seed, R)
