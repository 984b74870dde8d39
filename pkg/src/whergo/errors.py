"""Exception types shared across the package."""


class WhergoError(Exception):
    """Base class for all library errors."""


class DegenerateCoefficient(WhergoError):
    """Leading coefficient of a quadratic is (numerically) zero."""


class SingularSystem(WhergoError):
    """A dense linear solve hit a pivot below the relative tolerance."""


class ZeroTau(WhergoError):
    """The spectral map is undefined at tau = 0."""


class DegeneratePair(WhergoError):
    """A zero pair collapsed (double zero); the simple-zero assumption fails."""


class InadmissiblePartition(WhergoError):
    """No admissible contour separates the requested inside/outside sets."""


class OutOfChart(WhergoError):
    """Point lies outside the exterior prolate-spheroidal chart."""


class ExtremalOrOverRotating(WhergoError):
    """Kerr parameters violate m > a >= 0."""


class ParameterViolation(WhergoError):
    """Model parameters outside their admissible domain."""


class SchemaError(WhergoError):
    """Malformed JSON model file."""


class InvariantViolation(WhergoError):
    """A loaded or constructed matrix fails a structural invariant."""


class DegenerateZeros(WhergoError):
    """Two inside zeros coincide within tolerance."""


class UnsupportedPoleSet(WhergoError):
    """Scalar factorisation requested for a pole set it cannot handle."""


class NonSquareSystem(WhergoError):
    """Constraint assembly produced a structurally deficient system."""

    def __init__(self, message, unknowns=None, constraints=None, certificate=None):
        super().__init__(message)
        self.unknowns = unknowns
        self.constraints = constraints
        self.certificate = certificate


class NotCanonical(WhergoError):
    """Solution matrix requested from a non-canonical outcome."""


class NonPhysicalM(WhergoError):
    """Solution matrix fails reality/positivity requirements for extraction."""


class NoRealSolution(WhergoError):
    """Closed-form curve has no real branch at the requested parameter."""


class NoCurveFound(WhergoError):
    """No D = 0 locus detected in the search box."""
