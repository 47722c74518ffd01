"""Exception types shared by the star-Toeplitz machinery."""


class StarSzegoError(Exception):
    """Base class for all library errors."""


class RangeError(StarSzegoError):
    """A grid, band, or index window does not cover a requested range."""


class InversionError(StarSzegoError):
    """A finite section is singular or too ill-conditioned to invert."""


class BranchCutError(StarSzegoError):
    """The section spectrum touches the log branch cut; the star winding
    number is possibly nonzero."""


class FactorizationError(StarSzegoError):
    """Pivot breakdown during triangular elimination; nonzero star winding
    number suspected."""


class PoleProximityError(StarSzegoError):
    """A resolvent argument comes too close to the range of the symbol."""


class QuadratureError(StarSzegoError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


class ConfigError(StarSzegoError):
    """Invalid run configuration (CLI or symbol definition file)."""
