# (c) 2026 lumenfit authors

"""
    Exceptions raised by lumenfit.

    Everything derives from LumenfitError, so callers can catch the whole
    family at once. Errors caused by bad arguments also derive from
    ValueError.
"""

from .utilities import append_to

__all__ = []


@append_to(__all__)
class LumenfitError(Exception):
    """ Base class of all lumenfit exceptions. """


@append_to(__all__)
class ValidationError(LumenfitError, ValueError):
    """ A value is outside the domain of the field it was given for. """

    def __init__(self, field, value, message=None):
        self.field = field
        self.value = value
        if message is None:
            message = 'invalid value for {}: {!r}'.format(field, value)
        super().__init__(message)


@append_to(__all__)
class RankError(LumenfitError, ValueError):
    """ A design matrix does not have full column rank. """

    def __init__(self, columns, message=None):
        self.columns = list(columns)
        if message is None:
            message = 'rank deficient design, collinear columns: {}'.format(
                ', '.join(map(str, self.columns)),
            )
        super().__init__(message)


@append_to(__all__)
class ConfigError(LumenfitError, ValueError):
    """ The configuration cannot be parsed or contains unknown keys. """


@append_to(__all__)
class NotComputable(LumenfitError):
    """ A statistic is undefined for the data it was given. """


@append_to(__all__)
class StageError(LumenfitError):
    """ A pipeline stage failed; carries the stage name and the cause. """

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__('stage {} failed: {}'.format(stage, cause))
