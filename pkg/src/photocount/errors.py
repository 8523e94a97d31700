"""Exception types shared across the package."""


class PhotocountError(Exception):
    pass


class TruncationError(PhotocountError):
    """A truncation bound (n_max or m_max) is too small for the request."""

    def __init__(self, msg, required=None):
        super().__init__(msg)
        self.required = required


class UndefinedStatisticError(PhotocountError):
    """Requested statistic has no defined value (e.g. zero-mean state)."""


class InsufficientStatisticsError(PhotocountError):
    """A Monte Carlo estimate has no accepted samples."""


class PlateauUndefinedError(PhotocountError):
    """A bias scan has no low-bias plateau to reference."""


class QuadratureError(PhotocountError):
    """Numerical integration failed to converge."""

    def __init__(self, msg, n=None, integral=None):
        super().__init__(msg)
        self.n = n
        self.integral = integral
