"""Exception hierarchy shared across the package."""


class SeqParetoError(Exception):
    """Base class for every error raised by seqpareto."""


class DimensionError(SeqParetoError, ValueError):
    pass


class EmptySetError(SeqParetoError, ValueError):
    pass


class DataError(SeqParetoError, ValueError):
    pass


class SchemaError(DataError):
    """A required column or field is missing."""


class ReferencePointError(SeqParetoError, ValueError):
    """A front point fails to dominate the reference point."""


class MetricError(SeqParetoError, ValueError):
    pass


class IllConditionedError(SeqParetoError, ArithmeticError):
    """Cholesky factorization failed even after jitter escalation."""


class StateError(SeqParetoError, RuntimeError):
    pass


class CapacityError(SeqParetoError, RuntimeError):
    """The candidate pool has no unconsumed points left."""


class CombinatorialLimitError(SeqParetoError, ValueError):
    pass


class MigrationError(SeqParetoError, ValueError):
    """A checkpoint document cannot be restored (bad version or corrupt)."""
