"""Small problem builders shared by the tests."""

import math

import numpy as np
from scipy.integrate import trapezoid

from mixpose.density import GridSpec, MeasurementDensity, ObjectModel, normalize
from mixpose.geometry import Lateration, ParallelCamera
from mixpose.objective import Observation, Problem


def gaussian_density(center, std, origin=(-60.0, -60.0), counts=(161, 161)):
    """Analytic isotropic Gaussian sampled on a unit-spaced 2D grid, normalized."""
    g = GridSpec(origin, (1.0, 1.0), counts)
    a, b = np.meshgrid(g.axis(0), g.axis(1), indexing="ij")
    v = np.exp(-0.5 * ((a - center[0]) ** 2 + (b - center[1]) ** 2) / std ** 2)
    return normalize(MeasurementDensity(g, v))


def single_view_problem(feature=(10.0, -5.0, 20.0), sigma=5.0, g_center=(10.0, 20.0), g_std=8.0,
                        gamma=0.0):
    obj = ObjectModel.from_points([feature], sigma)
    obs = Observation(gaussian_density(g_center, g_std), ParallelCamera(gamma))
    return Problem(obj, (obs,))


def quadrature_objective(problem, pose, n=200, half_width=5.0):
    """Trapezoidal quadrature of the single-feature objective over +-5 sigma."""
    comp = problem.object.components[0]
    axes = [np.linspace(c - half_width * s, c + half_width * s, n) for c, s in zip(comp.center, comp.sigmas)]
    pdf = [np.exp(-0.5 * ((x - c) / s) ** 2) / (s * math.sqrt(2 * math.pi))
           for x, c, s in zip(axes, comp.center, comp.sigmas)]
    from mixpose.objective import sample_products

    inner = np.empty(n)
    z1 = axes[1]
    z2, z3 = np.meshgrid(axes[1], axes[2], indexing="ij")
    w23 = pdf[1][:, None] * pdf[2][None, :]
    for k, x in enumerate(axes[0]):
        pts = np.column_stack([np.full(z2.size, x), z2.ravel(), z3.ravel()])
        vals = sample_products(problem, pose, np.ascontiguousarray(pts)).reshape(n, n)
        inner[k] = trapezoid(trapezoid(vals * w23, axes[2], axis=1), z1)
    return float(trapezoid(inner * pdf[0], axes[0]))


def lateration_probe():
    """One Gaussian feature seen by a far range source along the second axis."""
    g = GridSpec((900.0,), (1.0,), (201,))
    x = g.axis(0)
    dens = normalize(MeasurementDensity(g, np.exp(-0.5 * ((x - 1003.0) / 8.0) ** 2)))
    obj = ObjectModel.from_points([[0.0, 0.0, 0.0]], 5.0)
    return Problem(obj, (Observation(dens, Lateration((0.0, -1000.0, 0.0))),))


def decoy_problem():
    """Two features; view 1 only has a bump where feature A lands, view 2 where B lands.

    At the identity pose each view matches one feature, but no single feature
    matches both views.
    """
    obj = ObjectModel.from_points([[0.0, 0.0, 0.0], [60.0, 60.0, 0.0]], 2.0)
    g1 = gaussian_density((0.0, 0.0), 5.0, origin=(-40.0, -40.0), counts=(141, 81))
    g2 = gaussian_density((60.0, 0.0), 5.0, origin=(-40.0, -40.0), counts=(141, 81))
    return Problem(obj, (Observation(g1, ParallelCamera(0.0)), Observation(g2, ParallelCamera(math.pi / 2))))
