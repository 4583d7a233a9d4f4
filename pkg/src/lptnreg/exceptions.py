"""Exception and warning types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class ShapeError(ValueError):
    """Array dimensions do not agree."""


class UnsupportedModelError(ValueError):
    """The requested operation is not defined for this error model."""


class RankDeficiencyError(ValueError):
    """The design matrix does not have full column rank."""


class InitializationError(RuntimeError):
    """A sampler cannot start because the target is not finite at the initial point."""


class SamplerDiagnosticError(RuntimeError):
    """A chain finished but its output cannot support the requested estimate."""


class QuadratureError(RuntimeError):
    """A numerical integral did not reach the requested tolerance."""


class StructuralError(KeyError):
    """A report is missing rows that other rows depend on."""


class ConvergenceWarning(UserWarning):
    """An optimizer stopped on its evaluation budget rather than its tolerances."""


class InputError(ValueError):
    """Malformed input file or command-line value."""
