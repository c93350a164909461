"""Exception hierarchy shared by all modules."""


class RaseError(Exception):
    """Base class for every error raised by rasesim."""


class InvalidArgument(RaseError, ValueError):
    pass


class PhysicalityError(RaseError):
    """A covariance matrix is not symmetric or violates the uncertainty bound."""


class DomainError(RaseError, ValueError):
    pass


class LowConfidencePhase(RaseError):
    """Reference pulses too weak to give a trustworthy phase estimate."""


class UndefinedEfficiency(RaseError, ValueError):
    pass


class NoGainError(RaseError, ValueError):
    pass


class PairingError(RaseError, ValueError):
    pass


class FitError(RaseError):
    pass


class ConfigError(RaseError, ValueError):
    pass


class FormatVersionError(RaseError):
    """Record dump written by an incompatible format version."""


class DataFormatError(RaseError):
    pass
