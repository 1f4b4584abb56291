"""Exception and warning types raised across the package."""


class ScaleOverflowError(ValueError):
    """A requested dyadic scale exceeds the configured maximum."""


class DomainError(ValueError):
    """An index or interval lies outside the set it is queried against."""


class UndefinedDimensionError(ValueError):
    """A dimension was requested for an empty set of counts."""


class LadderTooShortError(ValueError):
    """Fewer than three distinct rungs fit below the maximum scale."""


class InvalidParameterError(ValueError):
    pass


class IncompatibleLadderError(ValueError):
    """The ladder ratio is not an integer root of ``1 + beta_n``."""


class ConstructionError(RuntimeError):
    """A generation of the Cantor-type construction could not be filled."""

    def __init__(self, message, node=None, shortfall=None):
        super().__init__(message)
        self.node = node
        self.shortfall = shortfall


class IFSBudgetWarning(UserWarning):
    """Outer IFS cover iteration stopped before stabilising."""


class FlooringCollisionWarning(UserWarning):
    """Several ladder rungs floored to the same integer scale."""
