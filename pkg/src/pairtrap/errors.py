"""Exception hierarchy shared by all pairtrap modules."""


class PairtrapError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(PairtrapError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class CalibrationRangeError(DomainError):
    """The trap voltage is too low for a real-valued radial frequency."""


class ModeInversionError(DomainError):
    """The radial mode frequency does not exceed the axial one."""


class NumericalError(PairtrapError, ArithmeticError):
    """An integrator or solver failed to reach the requested accuracy."""


class TruncationError(NumericalError):
    """Population leaked beyond the safe part of a truncated Fock space.

    Attributes
    ----------
    leaked : float
        Population found in the top part of the basis.
    """

    def __init__(self, message: str, leaked: float):
        super().__init__(message)
        self.leaked = leaked


class UnitarityError(NumericalError):
    """Norm drift of a Schrodinger integration exceeded its tolerance."""


class FitError(NumericalError):
    """A least-squares fit did not converge."""


class IllPosedError(FitError):
    """The fit design matrix is rank deficient."""


class TachyonicWindowError(DomainError):
    """A compiled mode frequency squared is not positive somewhere.

    Attributes
    ----------
    interval : tuple of float
        First and last time at which the squared frequency is not positive.
    """

    def __init__(self, message: str, interval: tuple[float, float]):
        super().__init__(message)
        self.interval = interval


class UnmappableModeError(DomainError):
    """A trap frequency is too small to be mapped onto the chosen mode."""


class ConfigError(PairtrapError):
    """An experiment configuration failed validation."""
