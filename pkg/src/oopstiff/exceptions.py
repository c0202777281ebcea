"""Exception hierarchy shared by all oopstiff modules."""


class OopstiffError(Exception):
    """Base class for every error raised by the package."""


class DomainError(OopstiffError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConfigError(OopstiffError, ValueError):
    """Malformed design-space or pipeline configuration."""


class SamplingExhaustedError(OopstiffError):
    pass


class PerturbationFailedError(OopstiffError):
    pass


class LookupMissError(OopstiffError, KeyError):
    """A dataset oracle holds no record for the requested point."""

    def __str__(self):
        return str(self.args[0]) if self.args else "lookup miss"


class OracleExhaustedError(OopstiffError):
    def __init__(self, message, attempted=()):
        super().__init__(message)
        self.attempted = list(attempted)


class DatasetParseError(OopstiffError, ValueError):
    pass


class ModelFormatError(OopstiffError, ValueError):
    """A serialized surrogate file could not be parsed."""


class InsufficientDataError(OopstiffError, ValueError):
    pass


class DegenerateGeometryError(OopstiffError):
    pass


class IllConditionedError(OopstiffError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class LinearAlgebraError(OopstiffError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class PoleError(OopstiffError, ArithmeticError):
    """Displacement surrogate plus epsilon is non-positive."""


class TieError(OopstiffError):
    pass


class SplitError(OopstiffError, ValueError):
    pass


class UndefinedMetricError(OopstiffError, ArithmeticError):
    pass


class MultistartError(OopstiffError):
    def __init__(self, message, results=()):
        super().__init__(message)
        self.results = list(results)
