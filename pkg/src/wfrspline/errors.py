"""Exception hierarchy shared by all modules."""


class WFRError(Exception):
    """Base class for errors raised by this package."""


class VertexError(WFRError, ValueError):
    """An operation needs a strictly positive mass coordinate."""


class DomainError(WFRError, ValueError):
    """Two cone points are too far apart for the closed-form geodesic."""


class StepError(WFRError, ValueError):
    """A finite-difference stencil would leave the path's time domain."""


class CascadeDomainError(DomainError):
    """An intermediate De Casteljau pair left the pi/2 ball."""


class InfeasibleVelocityError(WFRError, ValueError):
    """Prescribed knot velocities cannot be reached by a cone control point."""

    def __init__(self, message, bound):
        super().__init__(message)
        self.bound = bound


class ScaleError(WFRError, ValueError):
    """A kernel scale or regularization parameter is not positive."""


class DimensionError(WFRError, ValueError):
    """Point dimensions do not agree."""


class EmptyMeasureError(WFRError, ValueError):
    """A measure has no positive mass where some is required."""


class DanglingSourceError(WFRError, ValueError):
    """A source point carries no plan mass, so its conditional mean is undefined."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class ZeroWeightError(WFRError, ValueError):
    """Every target point lies at cost +inf from the query."""


class TimeOrderError(WFRError, ValueError):
    """Knot times are not strictly increasing."""


class OutOfRangeError(WFRError, ValueError):
    """Evaluation time lies outside the fitted interval."""


class BlowUpError(WFRError, RuntimeError):
    """A flow-map trajectory left the field's validity box."""


class FieldCheckError(WFRError, ValueError):
    """Analytic derivatives of a field disagree with finite differences."""


class GradientMismatchError(FieldCheckError):
    """A field declared as a gradient flow does not satisfy v = grad(alpha)."""
