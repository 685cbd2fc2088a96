"""Outer bi-Lipschitz extensions of finite Euclidean maps and their applications.

Submodules:

* ``geometry``: point sets, finite maps, distortion;
* ``lipschitz``: Kirszbraun extensions by convex minimization;
* ``outer``: the whole-space 3D extension and one-point near-isometric extensions;
* ``jl``: verified Johnson-Lindenstrauss projections;
* ``terminal``: terminal dimension reduction;
* ``prioritized``: prioritized dimension reduction;
* ``line``: continuous extensions of near-isometries of the line (flips, spirals);
* ``harness``: sampled distortion and numeric lower-bound checks;
* ``io`` / ``cli``: file formats and the ``metric-ext`` command.
"""

__version__ = "0.1.0"

from .errors import MetricExtError  # noqa: E402
from .geometry import DistortionReport, MappedPairs, PointSet, distortion_report  # noqa: E402

__all__ = ["DistortionReport", "MappedPairs", "MetricExtError", "PointSet", "distortion_report", "__version__"]
