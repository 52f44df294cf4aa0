"""Select the compiled kernels when available, else the numpy fallback.

Set ``BOUNDECAY_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
segment_distance = _fallback.segment_distance
points_in_polygon = _fallback.points_in_polygon

if not os.environ.get("BOUNDECAY_PURE_PYTHON"):
    try:
        from . import _accel
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        segment_distance = _accel.segment_distance
        points_in_polygon = _accel.points_in_polygon

__all__ = ["BACKEND", "segment_distance", "points_in_polygon"]
