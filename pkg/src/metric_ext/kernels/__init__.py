"""Backend selection for the hot loops.

The numba implementation is used when numba imports cleanly, unless the
environment sets ``METRIC_EXT_DISABLE_JIT=1``; then the pure-numpy versions are
used.  ``METRIC_EXT_THREADS`` caps numba's thread pool (0 or unset = auto).
"""

import os

from . import numpy_impl

_DISABLE = os.environ.get("METRIC_EXT_DISABLE_JIT", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from . import numba_impl
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_impl = None

HAVE_NUMBA = numba_impl is not None
BACKEND = "numba" if HAVE_NUMBA and not _DISABLE else "numpy"
_impl = numba_impl if BACKEND == "numba" else numpy_impl

if BACKEND == "numba":
    _threads = os.environ.get("METRIC_EXT_THREADS", "0").strip()
    if _threads.isdigit() and int(_threads) > 0:
        import numba

        numba.set_num_threads(min(int(_threads), numba.config.NUMBA_NUM_THREADS))

pair_ratio_extremes = _impl.pair_ratio_extremes
kirszbraun_solve = _impl.kirszbraun_solve
one_point_feasibility = _impl.one_point_feasibility
forbidden_pattern_scan = _impl.forbidden_pattern_scan

__all__ = [
    "BACKEND",
    "HAVE_NUMBA",
    "numpy_impl",
    "numba_impl",
    "pair_ratio_extremes",
    "kirszbraun_solve",
    "one_point_feasibility",
    "forbidden_pattern_scan",
]
