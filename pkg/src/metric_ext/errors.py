"""Exception types shared across the package.

Every domain failure derives from :class:`MetricExtError` so the CLI can map
them to exit code 1 in one place.
"""


class MetricExtError(ValueError):
    """Base class for domain errors."""


class PointAlreadyMapped(MetricExtError):
    def __init__(self, index):
        super().__init__(f"point already mapped (source index {index})")
        self.index = index


class InfiniteDistortion(MetricExtError):
    def __init__(self, pair=None):
        super().__init__("infinite distortion: two distinct source points share an image")
        self.pair = pair


class SolverDidNotConverge(MetricExtError):
    """Raised when an iterative solver stops with its objective above tolerance."""

    def __init__(self, message, best, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.best = best
        self.residual = residual


class JLRetriesExhausted(MetricExtError):
    def __init__(self, report, attempts, level=None):
        where = "" if level is None else f" at level {level}"
        super().__init__(
            f"JL verification failed after {attempts} draws{where}; "
            f"best distortion {report.distortion:.6f} (increase c_jl)"
        )
        self.report = report
        self.attempts = attempts
        self.level = level


class ForbiddenPattern(MetricExtError):
    def __init__(self, witness):
        super().__init__(
            f"permutation contains forbidden pattern {witness.pattern} "
            f"at positions {witness.positions}"
        )
        self.witness = witness


class DegenerateFlip(MetricExtError):
    def __init__(self):
        super().__init__("degenerate flip: source points coincide")


class PortalOverlap(MetricExtError):
    """Portal intervals of distinct flips overlap.

    The spiral assembly needs every flip to be separated from the remaining
    points by a margin of order |delta| / eps; decrease eps or fall back to the
    whole-space extension.
    """


class SchemaError(MetricExtError):
    def __init__(self, path, field, message):
        super().__init__(f"{path}: {field}: {message}")
        self.path = path
        self.field = field
