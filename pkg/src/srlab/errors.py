"""Exception types shared across the package."""


class SrlabError(Exception):
    """Base class for all srlab errors."""


class UnknownModel(SrlabError):
    """Requested model name is not in the registry."""


class UnstableParameters(SrlabError):
    """Model parameters violate a stability constraint; message names it."""


class DimensionMismatch(SrlabError):
    """State array does not match the model dimension."""


class AlreadyStopped(SrlabError):
    """update() called on a detector that has already raised an alarm."""


class InvalidRho(SrlabError):
    """Geometric prior rate outside (0, 1)."""


class OutOfRange(SrlabError):
    """A scalar argument is outside its valid range."""


class WindowTooSmall(SrlabError):
    """Window length below the class-inclusion lower bound."""


class InsufficientBudget(SrlabError):
    """Monte Carlo budget too small to resolve the requested quantity."""


class DegenerateConditioning(SrlabError):
    """Conditional-risk denominator below the guard threshold."""


class ExcessCensoring(SrlabError):
    """Censored fraction exceeds the configured cap; refusing to aggregate."""


class NoClosedForm(SrlabError):
    """Closed-form value requested from a model that lacks one."""


class NoDensity(SrlabError):
    """Operation needs a closed-form transition density that is unavailable."""


class NoValidRho(SrlabError):
    """Drift inequality cannot be satisfied with any positive rate."""


class QuadratureFailure(SrlabError):
    """Quadrature produced a non-finite or inconsistent value."""


class ParseError(SrlabError):
    """Config text is malformed; message carries the line number."""


class UnknownKey(SrlabError):
    """Config contains a key that no experiment understands."""
