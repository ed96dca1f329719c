"""Exception types shared across the package."""


class LvlingamError(Exception):
    """Base class for operational failures."""


class CycleError(LvlingamError):
    """The edge set contains a directed cycle."""


class GenerationError(LvlingamError):
    """Random model generation exhausted its retry budget."""


class EmptyResultError(LvlingamError):
    """No model is compatible with the given basis / ensemble."""


class FitError(LvlingamError):
    """Basis estimation failed to produce a usable result."""


class ConfigBudgetError(LvlingamError):
    """Mixture-configuration enumeration would exceed the hard budget."""


class SchemaError(LvlingamError):
    """An input file does not match its documented JSON/CSV schema."""
