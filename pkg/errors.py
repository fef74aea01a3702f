class RecLabError(Exception):
    """
    Base class for every error raised by reclab.
    """


class SingularOrbit(RecLabError):
    """
    An orbit came within the singular tolerance of a system's singular set.
    """


class EmptySample(RecLabError, ValueError):
    pass


class ZeroBallMeasure(RecLabError):
    """
    A ball (or the denominator of a ratio of ball measures) was estimated to have measure zero.
    """


class NonPositiveRoof(RecLabError, ValueError):
    pass


class NonIntegrableRoof(RecLabError):
    """
    The running mean of the roof did not settle as the sample size doubled.
    """


class DirtyFlowBox(RecLabError):
    """
    A flow ball touches the floor or the roof, so it is not a clean flow box.
    """


class HorizonExceeded(RecLabError):
    pass


class TruncatedRecord(RecLabError):
    """
    A hitting record ended at its horizon before the requested number of hits.
    """


class ProfileRangeExceeded(RecLabError):
    pass


class DomainError(RecLabError, ValueError):
    """
    An argument lies outside the domain on which a transform or level is defined.
    """


class UnknownReference(RecLabError, ValueError):
    pass


class ConfigError(RecLabError, ValueError):
    """
    An experiment config is missing keys, has unknown keys or holds invalid values.
    """


class PluginInfoError(RecLabError, ValueError):
    pass
