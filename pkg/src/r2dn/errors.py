"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are inconsistent with the declared model dimensions."""


class ParameterError(ValueError):
    """A scalar hyperparameter is outside its valid range."""


class IllConditionedError(ArithmeticError):
    """A matrix that must be inverted is numerically close to singular."""


class StructureError(ValueError):
    """A matrix violates a required structural constraint (e.g. nonzero diagonal)."""


class MetricError(ValueError):
    """A metric is undefined for the given inputs (e.g. zero-norm reference)."""
