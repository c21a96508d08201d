"""Exception types raised across the package."""


class KiclockError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(KiclockError, ValueError):
    pass


class LabelingError(KiclockError, RuntimeError):
    """Adiabatic level tracking could not resolve an eigenvector match."""

    def __init__(self, message: str, field: float):
        super().__init__(f"{message} (Bz = {field:.9g} T)")
        self.field = field


class NoRootError(KiclockError, ValueError):
    pass


class CriticalCurrentError(KiclockError, ValueError):
    pass


class DegenerateCircuitError(KiclockError, ValueError):
    pass


class UnsupportedConfigurationError(KiclockError, ValueError):
    pass


class StiffnessError(KiclockError, RuntimeError):
    pass


class InvalidScheduleError(KiclockError, ValueError):
    pass


class InvalidConfigurationError(KiclockError, ValueError):
    pass


class FitError(KiclockError, RuntimeError):
    """Raised when a least-squares fit fails; carries the residual norm."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual norm {residual:.6g})")
        self.residual = residual
