class GridShieldError(Exception):
    """Base class for every error raised by gridshield."""


class ConfigError(GridShieldError):
    """Invalid scenario, attack spec or estimator settings."""


class ModelError(ConfigError):
    """A model file violates the schema or a model invariant."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DimensionError(GridShieldError, ValueError):
    """Shapes or index sets do not match."""


class NumericalError(GridShieldError):
    """A computation cannot proceed on the given numbers."""


class RankDeficientError(NumericalError):
    pass


class SingularMatrixError(NumericalError):
    pass


class NoConsistentSubsetError(NumericalError):
    pass


class NoStealthyAttackError(NumericalError):
    pass


class SeedingError(NumericalError):
    pass
