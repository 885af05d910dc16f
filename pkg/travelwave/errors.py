"""
Exceptions and warning categories shared by all packages.
Every error derives from a builtin exception class, so callers that only know about ValueError or RuntimeError keep
working. `exit_code_for` maps an exception onto the exit code contract of the command line interface.
"""


class ConfigurationError(ValueError):
    """
    Raised for invalid domains, boundary conditions, problem or experiment files.
    """
    pass


class NumericError(ArithmeticError):
    """
    Base class for failures of a numerical procedure.
    """
    pass


class DivergenceError(NumericError):
    pass


class SingularJacobianError(NumericError):
    pass


class NonHyperbolicError(NumericError):
    """
    Raised if a quantity that needs a hyperbolic rest point (e.g. the Morse index) is requested at a point whose
    linearization has an eigenvalue inside the zero band.
    """
    pass


class StiffnessError(NumericError):
    pass


class AssemblyError(RuntimeError):
    """
    Raised if two independent assemblies of the same operator disagree.
    """
    pass


class InsufficientDataError(ValueError):
    pass


class HomotopyValidationError(ValueError):
    pass


class NonRegularLevelError(ValueError):
    pass


class DegenerateOrbitError(RuntimeError):
    """
    Raised for a nonconstant orbit candidate whose relative index is smaller than 1.
    """
    pass


class UncertifiedCountError(RuntimeError):
    pass


class InvalidPartitionError(ValueError):
    pass


class MissingPrerequisiteError(RuntimeError):
    pass


class TangentialCrossingWarning(RuntimeWarning):
    pass


class UndecidedOrbitWarning(RuntimeWarning):
    pass


class TransversalityWarning(RuntimeWarning):
    pass


class DegeneracyWarning(RuntimeWarning):
    pass


EXIT_SUCCESS = 0
EXIT_CONFIGURATION = 2
EXIT_PREREQUISITE = 3
EXIT_CERTIFICATION = 4

# order matters: subclasses of ValueError that are certification failures must be found first
_EXIT_CODES = [
    (MissingPrerequisiteError, EXIT_PREREQUISITE),
    (InsufficientDataError, EXIT_CERTIFICATION),
    (InvalidPartitionError, EXIT_CERTIFICATION),
    (ConfigurationError, EXIT_CONFIGURATION),
    (HomotopyValidationError, EXIT_CONFIGURATION),
    (NonRegularLevelError, EXIT_CONFIGURATION),
    (NumericError, EXIT_CERTIFICATION),
    (AssemblyError, EXIT_CERTIFICATION),
    (DegenerateOrbitError, EXIT_CERTIFICATION),
    (UncertifiedCountError, EXIT_CERTIFICATION),
]


def exit_code_for(error: BaseException) -> int:
    """
    Returns the exit code that the command line interface uses for `error`.
    Unknown exception types are treated as certification failures.
    """
    for error_type, code in _EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return EXIT_CERTIFICATION
