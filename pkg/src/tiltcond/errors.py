"""Exception hierarchy shared by all modules."""


class TiltcondError(Exception):
    """Base class for every error raised by the package."""

    code = "error"


class PointOutsideBall(TiltcondError, ValueError):
    code = "point-outside-ball"


class BadIndex(TiltcondError, IndexError):
    code = "bad-index"


class DimensionMismatch(TiltcondError, ValueError):
    code = "dimension-mismatch"


class DomainMismatch(TiltcondError, ValueError):
    code = "domain-mismatch"


class EmptyVertexList(TiltcondError, ValueError):
    code = "empty-vertex-list"


class NonConvergence(TiltcondError, RuntimeError):
    code = "nonconvergence"


class NonconvexInput(TiltcondError, ValueError):
    code = "nonconvex-input"


class BoundaryPoint(TiltcondError, ValueError):
    code = "boundary-point"


class SolutionSetTouchesBoundary(TiltcondError, ValueError):
    code = "solution-set-touches-boundary"


class NotASolution(TiltcondError, ValueError):
    code = "not-a-solution"


class NoExteriorDirection(TiltcondError, ValueError):
    code = "no-exterior-direction"


class GlobalEstimatePassed(TiltcondError, ValueError):
    code = "global-estimate-passed"


class ContractionPreconditionViolated(TiltcondError, ValueError):
    code = "contraction-precondition-violated"


class NotContractive(TiltcondError, ValueError):
    code = "not-contractive-on-samples"


class SpecParseError(TiltcondError, ValueError):
    """Problem file could not be parsed; ``where`` names the offending field or line."""

    code = "parse-error"

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
