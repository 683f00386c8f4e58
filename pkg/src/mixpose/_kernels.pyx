# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the Monte-Carlo objective.

Every function here has a numpy twin in :mod:`mixpose._fallback` with the same
signature and the same floating-point recipe, so the two agree to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, cos, sin, sqrt

cnp.import_array()


cdef inline double _lerp1(const double[::1] v, Py_ssize_t n, double origin,
                          double spacing, double y) noexcept nogil:
    cdef double t = (y - origin) / spacing
    cdef Py_ssize_t i
    cdef double f
    if not (t >= 0.0 and t <= n - 1):
        return 0.0
    i = <Py_ssize_t>floor(t)
    if i > n - 2:
        i = n - 2
    f = t - i
    return (1.0 - f) * v[i] + f * v[i + 1]


cdef inline double _lerp2(const double[:, ::1] v, Py_ssize_t n0, Py_ssize_t n1,
                          double o0, double o1, double s0, double s1,
                          double y0, double y1) noexcept nogil:
    cdef double t0 = (y0 - o0) / s0
    cdef double t1 = (y1 - o1) / s1
    cdef Py_ssize_t i, j
    cdef double f, g
    if not (t0 >= 0.0 and t0 <= n0 - 1 and t1 >= 0.0 and t1 <= n1 - 1):
        return 0.0
    i = <Py_ssize_t>floor(t0)
    if i > n0 - 2:
        i = n0 - 2
    j = <Py_ssize_t>floor(t1)
    if j > n1 - 2:
        j = n1 - 2
    f = t0 - i
    g = t1 - j
    return ((1.0 - f) * ((1.0 - g) * v[i, j] + g * v[i, j + 1])
            + f * ((1.0 - g) * v[i + 1, j] + g * v[i + 1, j + 1]))


def transform(const double[:, ::1] z, const double[:, ::1] rot, const double[::1] shift):
    """Return ``rot @ (z + shift)`` row-wise as a new (K, 3) array."""
    cdef Py_ssize_t k, n = z.shape[0]
    cdef double a, b, c
    out = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] u = out
    with nogil:
        for k in range(n):
            a = z[k, 0] + shift[0]
            b = z[k, 1] + shift[1]
            c = z[k, 2] + shift[2]
            u[k, 0] = rot[0, 0] * a + rot[0, 1] * b + rot[0, 2] * c
            u[k, 1] = rot[1, 0] * a + rot[1, 1] * b + rot[1, 2] * c
            u[k, 2] = rot[2, 0] * a + rot[2, 1] * b + rot[2, 2] * c
    return out


def interp1d(const double[::1] values, double origin, double spacing, const double[::1] y):
    cdef Py_ssize_t k, n = values.shape[0], m = y.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for k in range(m):
            o[k] = _lerp1(values, n, origin, spacing, y[k])
    return out


def interp2d(const double[:, ::1] values, double o0, double o1, double s0, double s1,
             const double[::1] y0, const double[::1] y1):
    cdef Py_ssize_t k, m = y0.shape[0]
    cdef Py_ssize_t n0 = values.shape[0], n1 = values.shape[1]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for k in range(m):
            o[k] = _lerp2(values, n0, n1, o0, o1, s0, s1, y0[k], y1[k])
    return out


def camera_accumulate(const double[:, ::1] u, double gamma, const double[:, ::1] values,
                      double o0, double o1, double s0, double s1, double[::1] acc):
    """Multiply ``acc`` in place by the camera density at each projected row of ``u``."""
    cdef Py_ssize_t k, m = u.shape[0]
    cdef Py_ssize_t n0 = values.shape[0], n1 = values.shape[1]
    cdef double c = cos(gamma), s = sin(gamma)
    with nogil:
        for k in range(m):
            if acc[k] != 0.0:
                acc[k] *= _lerp2(values, n0, n1, o0, o1, s0, s1,
                                 c * u[k, 0] + s * u[k, 1], u[k, 2])


def lateration_accumulate(const double[:, ::1] u, const double[::1] source,
                          const double[::1] values, double origin, double spacing,
                          double[::1] acc):
    """Multiply ``acc`` in place by the range density at each row's distance to ``source``."""
    cdef Py_ssize_t k, m = u.shape[0], n = values.shape[0]
    cdef double dx, dy, dz
    with nogil:
        for k in range(m):
            if acc[k] != 0.0:
                dx = u[k, 0] - source[0]
                dy = u[k, 1] - source[1]
                dz = u[k, 2] - source[2]
                acc[k] *= _lerp1(values, n, origin, spacing, sqrt(dx * dx + dy * dy + dz * dz))
