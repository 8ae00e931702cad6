"""Exception hierarchy for smoothrep."""


class SmoothrepError(Exception):
    """Base class for all smoothrep errors."""


class DomainError(SmoothrepError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ShapeSpecError(SmoothrepError, ValueError):
    """A shape or multifunction spec is malformed, empty, or unbounded."""


class SeparationError(SmoothrepError):
    """A requested separation does not exist (e.g. the point lies in the set)."""


class CertificateError(SmoothrepError):
    """A neighbourhood-size search exhausted its floor without acceptance.

    Raised when the upper-semicontinuity certificate for a graph cut cannot
    be established at the requested point, either because the multifunction
    genuinely lacks the property there or because probing was too coarse.
    """


class BracketError(SmoothrepError, ValueError):
    """A bisection bracket does not enclose the requested crossing."""


class UnboundedDirectionError(SmoothrepError):
    """A ray search left the working region without hitting the target level."""


class InstanceError(SmoothrepError, ValueError):
    """An instance file fails validation or contains unresolved references."""
