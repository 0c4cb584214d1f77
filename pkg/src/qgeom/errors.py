"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """Invalid argument: index out of range, shape mismatch, insufficient jet degree."""


class SingularValueError(ArithmeticError):
    """A jet operation hit a singular point (zero divisor, log of non-positive value)."""


class DomainError(ValueError):
    """Evaluation point or parameter outside the admissible domain."""


class ModelDefinitionError(ValueError):
    """A model manifold produced an invalid metric or failed its own certificate."""


class PreconditionError(ValueError):
    """An operation's mathematical precondition (Einstein base, TT direction, ...) fails."""
