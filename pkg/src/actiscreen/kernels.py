"""Backend selection for the hot inner loops.

The compiled extension is used when it is importable; setting
``ACTISCREEN_PURE_PYTHON=1`` forces the numpy fallback. ``BACKEND`` names
the active choice and :func:`get_backend` returns either module explicitly
(the benchmark and the cross-backend tests use it).
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and os.environ.get("ACTISCREEN_PURE_PYTHON", "") not in ("1", "true"):
    _active = _compiled
    BACKEND = "compiled"
else:
    _active = _fallback
    BACKEND = "python"

nearest_indices = _active.nearest_indices
stationary_mask = _active.stationary_mask
rolling_median = _active.rolling_median
sos_filter = _active.sos_filter
sampen_counts = _active.sampen_counts
level_best_splits = _active.level_best_splits


def get_backend(name):
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    return _compiled is not None
