"""Exception hierarchy for broyden_lab."""


class BroydenLabError(Exception):
    """Base class for every error raised by the library."""


class DimensionMismatchError(BroydenLabError, ValueError):
    pass


class RoleMismatchError(BroydenLabError, TypeError):
    """An operator or vector was used in the wrong space (E versus E*)."""


class NotPositiveDefiniteError(BroydenLabError, ValueError):
    pass


class UndefinedDirectionError(BroydenLabError, ValueError):
    """The direction u is zero where the formula needs u != 0."""


class InvalidParameterError(BroydenLabError, ValueError):
    pass


class DivergenceError(BroydenLabError, ArithmeticError):
    def __init__(self, k: int, message: str = "non-finite iterate"):
        super().__init__(f"{message} at iteration {k}")
        self.k = k


class QuadratureError(BroydenLabError, ArithmeticError):
    def __init__(self, k: int, est_error: float, limit: float):
        super().__init__(
            f"integral Hessian error estimate {est_error:.3e} exceeds {limit:.3e} "
            f"at iteration {k}"
        )
        self.k = k
        self.est_error = est_error
        self.limit = limit


class MissingSnapshotsError(BroydenLabError, LookupError):
    pass


class ConfigError(BroydenLabError, ValueError):
    pass
