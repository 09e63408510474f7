"""Exception types raised across the package."""


class PalmCountError(Exception):
    """Base class for every error raised by palmcount."""


class UnsupportedFormat(PalmCountError, ValueError):
    pass


class CorruptImage(PalmCountError, ValueError):
    pass


class WrongChannelCount(PalmCountError, ValueError):
    pass


class EmptyImage(PalmCountError, ValueError):
    pass


class ZeroPerimeter(PalmCountError, ValueError):
    pass


class CenterOutOfBounds(PalmCountError, ValueError):
    pass


class MissingGeo(PalmCountError, ValueError):
    """Physical size bounds were requested for an image without a GSD."""


class ConfigError(PalmCountError, ValueError):
    pass


class SpecInfeasible(PalmCountError, ValueError):
    """A synthetic grove cannot be laid out with the requested spacing."""
