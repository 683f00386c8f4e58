"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Selected automatically when the extension is not built, or forced with
``MIXPOSE_PURE=1``. Arithmetic is ordered the same way as the compiled code.
"""

import math

import numpy as np


def _cells(t, n):
    inside = (t >= 0.0) & (t <= n - 1)
    t = np.where(inside, t, 0.0)
    i = np.minimum(np.floor(t).astype(np.intp), n - 2)
    return inside, i, t - i


def transform(z, rot, shift):
    a = z[:, 0] + shift[0]
    b = z[:, 1] + shift[1]
    c = z[:, 2] + shift[2]
    out = np.empty_like(z)
    for row in range(3):
        out[:, row] = rot[row, 0] * a + rot[row, 1] * b + rot[row, 2] * c
    return out


def interp1d(values, origin, spacing, y):
    n = values.shape[0]
    inside, i, f = _cells((y - origin) / spacing, n)
    out = (1.0 - f) * values[i] + f * values[i + 1]
    return np.where(inside, out, 0.0)


def interp2d(values, o0, o1, s0, s1, y0, y1):
    n0, n1 = values.shape
    in0, i, f = _cells((y0 - o0) / s0, n0)
    in1, j, g = _cells((y1 - o1) / s1, n1)
    out = ((1.0 - f) * ((1.0 - g) * values[i, j] + g * values[i, j + 1])
           + f * ((1.0 - g) * values[i + 1, j] + g * values[i + 1, j + 1]))
    return np.where(in0 & in1, out, 0.0)


def camera_accumulate(u, gamma, values, o0, o1, s0, s1, acc):
    c, s = math.cos(gamma), math.sin(gamma)
    acc *= interp2d(values, o0, o1, s0, s1, c * u[:, 0] + s * u[:, 1], u[:, 2])


def lateration_accumulate(u, source, values, origin, spacing, acc):
    dx = u[:, 0] - source[0]
    dy = u[:, 1] - source[1]
    dz = u[:, 2] - source[2]
    acc *= interp1d(values, origin, spacing, np.sqrt(dx * dx + dy * dy + dz * dz))
