"""Exception hierarchy shared by every stage of the pipeline."""


class VibronicError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(VibronicError, ValueError):
    """Input violates a documented precondition (bad shapes, signs, keys)."""


class NumericalError(VibronicError, ArithmeticError):
    """A numerical step failed or produced an out-of-tolerance result."""


class DimensionMismatch(ValidationError):
    pass


class ConstraintViolation(ValidationError):
    """A Bogoliubov pair (X, Y) fails YY^+ - XX^+ = I or XY^t = YX^t."""


class NonUnitary(ValidationError):
    pass


class InvalidFrequency(ValidationError):
    pass


class SingularJ(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class SingularCovariance(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class InsufficientTruncation(VibronicError):
    """The Fock cutoff could not reach the requested captured probability."""

    def __init__(self, message: str, captured_mass: float, n_max: int):
        super().__init__(message)
        self.captured_mass = captured_mass
        self.n_max = n_max


class EmptyTable(VibronicError, ValueError):
    pass
