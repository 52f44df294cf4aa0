"""Pure numpy versions of the kernels in ``_accel.pyx``.

Both implementations must agree to round-off; the test-suite checks this.
"""

import numpy as np

_CHUNK = 2048


def segment_distance(points, seg_a, seg_b):
    """Euclidean distance from each 2D point to the nearest segment."""
    points = np.ascontiguousarray(points, dtype=float)
    seg_a = np.ascontiguousarray(seg_a, dtype=float)
    seg_b = np.ascontiguousarray(seg_b, dtype=float)
    d = seg_b - seg_a
    len2 = np.einsum("ij,ij->i", d, d)
    safe = np.where(len2 > 0.0, len2, 1.0)
    out = np.empty(len(points))
    for start in range(0, len(points), _CHUNK):
        p = points[start:start + _CHUNK]
        rel = p[:, None, :] - seg_a[None, :, :]
        s = np.einsum("nkj,kj->nk", rel, d) / safe
        s = np.where(len2 > 0.0, np.clip(s, 0.0, 1.0), 0.0)
        q = rel - s[:, :, None] * d[None, :, :]
        out[start:start + _CHUNK] = np.sqrt(np.min(np.einsum("nkj,nkj->nk", q, q), axis=1))
    return out


def points_in_polygon(points, verts):
    """Even-odd rule membership of each point in a closed polygon."""
    points = np.asarray(points, dtype=float)
    verts = np.asarray(verts, dtype=float)
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    xi, yi = verts[:, 0], verts[:, 1]
    xj, yj = np.roll(xi, 1), np.roll(yi, 1)
    straddle = (yi > py) != (yj > py)
    denom = np.where(yj != yi, yj - yi, 1.0)
    cross = px < (xj - xi) * (py - yi) / denom + xi
    return (np.count_nonzero(straddle & cross, axis=1) % 2) == 1
