"""Exception hierarchy.

The CLI maps these onto exit codes: configuration and validation problems
exit with 1, numerical failures with 2.
"""


class MMPurcellError(Exception):
    """Base class for all package errors."""


class ConfigError(MMPurcellError, ValueError):
    """A configuration document could not be parsed or converted."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ValidationError(MMPurcellError, ValueError):
    """One or more physical invariants of a system are violated.

    ``errors`` holds every violation found, not only the first.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NumericalError(MMPurcellError, ArithmeticError):
    """Base class for failures of a numerical routine."""


class SingularConfigurationError(NumericalError):
    """A perturbative denominator vanishes."""


class EigenSolverError(NumericalError):
    """Eigendecomposition failed or produced residuals above tolerance."""

    def __init__(self, message, worst_residual=float("nan")):
        self.worst_residual = worst_residual
        super().__init__(message)


class BranchAmbiguityError(NumericalError):
    """The qubit-like eigenvalue branch could not be identified."""


class NormalizationError(NumericalError):
    """A normalized curve was requested with a vanishing reference rate."""


class DegenerateGridError(NumericalError):
    """A fit was requested on too few or invalid grid points."""


class DispersivePoleError(SingularConfigurationError):
    """A dispersive-shift denominator vanishes (zero detuning or detuning equal to the anharmonicity)."""
