# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometry kernels (distance to segments, point-in-polygon)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fmin

cnp.import_array()


def segment_distance(double[:, ::1] points, double[:, ::1] seg_a, double[:, ::1] seg_b):
    """Euclidean distance from each 2D point to the nearest segment."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t k = seg_a.shape[0]
    cdef Py_ssize_t i, j
    cdef double px, py, ax, ay, dx, dy, len2, s, qx, qy, best, d2
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        best = 1e300
        for j in range(k):
            ax = seg_a[j, 0]
            ay = seg_a[j, 1]
            dx = seg_b[j, 0] - ax
            dy = seg_b[j, 1] - ay
            len2 = dx * dx + dy * dy
            if len2 > 0.0:
                s = ((px - ax) * dx + (py - ay) * dy) / len2
                if s < 0.0:
                    s = 0.0
                elif s > 1.0:
                    s = 1.0
            else:
                s = 0.0
            qx = px - (ax + s * dx)
            qy = py - (ay + s * dy)
            d2 = qx * qx + qy * qy
            best = fmin(best, d2)
        res[i] = sqrt(best)
    return out


def points_in_polygon(double[:, ::1] points, double[:, ::1] verts):
    """Even-odd rule membership of each point in a closed polygon."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t m = verts.shape[0]
    cdef Py_ssize_t i, j, jp
    cdef double px, py, xi, yi, xj, yj
    cdef bint inside
    out = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] res = out
    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        inside = False
        jp = m - 1
        for j in range(m):
            xi = verts[j, 0]
            yi = verts[j, 1]
            xj = verts[jp, 0]
            yj = verts[jp, 1]
            if (yi > py) != (yj > py):
                if px < (xj - xi) * (py - yi) / (yj - yi) + xi:
                    inside = not inside
            jp = j
        res[i] = inside
    return out
