"""Exception hierarchy shared across the toolkit.

Every error raised deliberately by this package derives from PipelineError,
so callers (and the CLI) can catch one type. InvalidInputError doubles as a
ValueError for interoperability with generic callers.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(PipelineError, ValueError):
    """An argument failed validation (shape, range, finiteness, ...)."""


class ConfigError(InvalidInputError):
    """A run-config field is missing or malformed."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field {field!r}: {message}")


class MalformedFrameError(InvalidInputError):
    """A sensor frame does not carry exactly the six expected readings."""


class FrameMismatchError(InvalidInputError):
    """Two skeletons or streams live in different coordinate frames."""


class DegenerateGeometryError(PipelineError):
    """Geometry too degenerate to solve (coincident points, rank loss, ...)."""


class InfeasibleTriangleError(DegenerateGeometryError):
    """The PIP two-circle construction is infeasible beyond tolerance."""

    def __init__(self, message: str, excess_mm: float):
        self.excess_mm = float(excess_mm)
        super().__init__(message)


class BehindCameraError(PipelineError):
    """A point with non-positive depth cannot be projected."""


class ConvergenceError(PipelineError):
    """Iterative refinement hit its iteration cap before any stop fired."""

    def __init__(self, message: str, diagnostics=None):
        self.diagnostics = diagnostics
        super().__init__(message)
