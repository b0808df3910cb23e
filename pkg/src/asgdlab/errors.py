"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the admissible domain."""


class DegenerateDiffusionError(DomainError):
    """The diffusion amplitude vanishes, so the inverse temperature is infinite."""


class CertificateError(ArithmeticError):
    """A Lyapunov certificate could not be built or checked."""


class StalenessOverflowError(RuntimeError):
    """A delayed read reached further back than the history buffer allows."""


class NumericalInstabilityError(FloatingPointError):
    """A time integrator produced non-finite or spuriously growing values."""


class NullSpaceError(ArithmeticError):
    """The generator null space is not one-dimensional."""


class TruncationWarning(UserWarning):
    """Spectral coefficients above the truncation degree were discarded."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
