"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the ``IMPUTEKIT_BACKEND``
environment variable: ``numba`` (default when numba imports cleanly),
``numpy``, or ``auto``.  Both backends implement the same arithmetic in the
same order, so results are bit-identical; the numba path is just much faster
on tree fitting, routing, and distance sweeps.  ``scripts/kernel_bench.py``
measures the gap.
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import _numpy

_requested = os.environ.get("IMPUTEKIT_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        _impl = _numpy
        BACKEND = "numpy"
elif _requested == "numba":
    from . import _numba as _impl

    BACKEND = "numba"
elif _requested == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    raise ConfigError(
        f"IMPUTEKIT_BACKEND must be 'numba', 'numpy', or 'auto', got {_requested!r}"
    )

scan_split_sse = _impl.scan_split_sse
scan_split_gini = _impl.scan_split_gini
build_tree = _impl.build_tree
route_rows = _impl.route_rows
knn_distances = _impl.knn_distances

__all__ = [
    "BACKEND",
    "scan_split_sse",
    "scan_split_gini",
    "build_tree",
    "route_rows",
    "knn_distances",
]
