"""Exception hierarchy shared by the library and the command line."""


class SQKDError(Exception):
    """Base class for domain errors raised by this package."""


class InadmissibleNoiseError(SQKDError, ValueError):
    """Noise parameters outside the region where the key-rate bounds apply."""


class AttackSpecError(SQKDError, ValueError):
    """An attack specification violates unitarity, isometry or shape constraints."""


class DegenerateStatisticsError(SQKDError, ValueError):
    """Statistics carry no accepted (consistent) mass to build a key from."""


class NoSignChangeError(SQKDError, ValueError):
    """Root bracketing failed: the function has the same sign at both ends."""


class NoKeyError(SQKDError):
    """A simulation produced no key-generating rounds."""
