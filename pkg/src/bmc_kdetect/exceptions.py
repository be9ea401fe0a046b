"""Exception hierarchy shared by all modules."""


class BmcError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(BmcError, ValueError):
    """Invalid user-supplied parameters or configuration."""


class NumericalError(BmcError, ArithmeticError):
    """A numerical routine failed to converge or broke down."""


# model
class NotStochastic(ConfigError):
    pass


class NotIrreducible(ConfigError):
    pass


class BadAlpha(ConfigError):
    pass


class ClusterTooSmall(ConfigError):
    pass


class DegenerateVectors(ConfigError):
    pass


class NoConvergence(NumericalError):
    pass


class NoMixing(NumericalError):
    pass


# linalg
class FactorizationBreakdown(NumericalError):
    pass


# estimators
class EmptyEmbedding(NumericalError):
    pass


class NoCenters(BmcError, ValueError):
    pass


class DegenerateSplit(BmcError, ValueError):
    pass


class EigenFailure(NumericalError):
    pass


# metrics
class NormalizeUndefined(BmcError, ValueError):
    pass
