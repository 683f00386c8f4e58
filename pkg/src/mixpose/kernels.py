"""Backend selection for the hot loops.

The compiled Cython extension is used when importable; otherwise the numpy
fallback. Set ``MIXPOSE_PURE=1`` in the environment to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("MIXPOSE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

transform = _impl.transform
interp1d = _impl.interp1d
interp2d = _impl.interp2d
camera_accumulate = _impl.camera_accumulate
lateration_accumulate = _impl.lateration_accumulate

__all__ = [
    "BACKEND",
    "transform",
    "interp1d",
    "interp2d",
    "camera_accumulate",
    "lateration_accumulate",
]
