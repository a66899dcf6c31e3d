"""Exception hierarchy shared by all modules."""


class SpinSphereError(Exception):
    """Base class for all library errors."""


class InvalidDimensionError(SpinSphereError, ValueError):
    """Raised when a dimension or degree parameter is out of range."""


class ShapeError(SpinSphereError, ValueError):
    """Raised when array arguments have incompatible shapes."""


class DomainError(SpinSphereError, ValueError):
    """Raised when a point or field lies outside the domain of an operation."""


class PoleError(DomainError):
    """Raised when a point coincides with the stereographic projection pole."""


class ExactnessError(SpinSphereError, ValueError):
    """Raised when a quadrature rule is too coarse for the requested integrand."""


class ClusterError(SpinSphereError, RuntimeError):
    """Raised when Dirac eigenvalues do not cluster where they must."""


class SingularIntegrandError(SpinSphereError, ValueError):
    """Raised when a negative power of a vanishing quantity is requested."""


class ConstraintError(SpinSphereError, ValueError):
    """Raised when spinor constants violate a required pairing constraint."""


class TruncationError(SpinSphereError, ValueError):
    """Raised when the truncation degree is too small for an analysis."""
