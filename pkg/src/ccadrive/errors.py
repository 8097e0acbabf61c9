"""Exception hierarchy shared by all ccadrive modules."""


class CcaDriveError(Exception):
    """Base class for every error raised by this package."""


# dataset
class MalformedRow(CcaDriveError, ValueError):
    pass


class UnsynchronizedTracks(CcaDriveError, ValueError):
    pass


class MissingHost(CcaDriveError, ValueError):
    pass


class InvalidConfig(CcaDriveError, ValueError):
    pass


class TooShort(CcaDriveError, ValueError):
    pass


# shared numerics
class DegenerateShape(CcaDriveError, ValueError):
    pass


class ShapeMismatch(CcaDriveError, ValueError):
    pass


# cca
class SingularCovariance(CcaDriveError, ArithmeticError):
    pass


# gmm_gmr
class DegenerateData(CcaDriveError, ValueError):
    pass


class NumericalCollapse(CcaDriveError, ArithmeticError):
    pass


# gpr
class NotPositiveDefinite(CcaDriveError, ArithmeticError):
    pass


class AllRestartsFailed(CcaDriveError, RuntimeError):
    pass


# pipeline
class IoFailure(CcaDriveError, OSError):
    pass
