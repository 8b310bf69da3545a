"""Exception types shared across the package."""


class MmtLabError(Exception):
    """Base class for all package errors."""


class BadParams(MmtLabError):
    """Invalid arguments to an instance generator or operation."""


class NotSymmetric(MmtLabError):
    """Covariance matrix asymmetry exceeds the relative tolerance."""


class NotPSD(MmtLabError):
    """Covariance matrix has an eigenvalue below the negativity tolerance."""


class DistinctnessViolation(MmtLabError):
    """Two embedded points coincide, i.e. two coordinates of the process are a.s. equal."""


class NoConvergence(MmtLabError):
    """Iterative solver exhausted its iteration budget."""


class TailNotCertified(MmtLabError):
    """SNR grid stops before the certified truncation point."""


class TooLarge(MmtLabError):
    """Exhaustive enumeration requested beyond its size bound."""


class MalformedStep(MmtLabError):
    """Step-function input violates monotonicity or boundary conditions."""


class IoError(MmtLabError):
    """File export failed."""
