"""Exception hierarchy shared by every ganlab module."""


class GanlabError(Exception):
    """Base class for all errors raised by ganlab."""


class ContractError(GanlabError, ValueError):
    """An argument violated an operation's documented precondition."""


class ConfigurationError(GanlabError, ValueError):
    """A run, trainer or loss was configured inconsistently."""


class NumericError(GanlabError, ArithmeticError):
    """A value became NaN/Inf or a numeric routine had no valid answer."""


class CapabilityError(GanlabError, RuntimeError):
    """The tensor engine cannot perform the requested operation."""


class FormatError(GanlabError, ValueError):
    """A file or byte stream does not follow the expected format."""


class IntegrityError(GanlabError, ValueError):
    """A file is truncated or fails its checksum."""


class IncompatibleVersionError(GanlabError, ValueError):
    """A checkpoint or config was written by an unsupported format version."""


class NotPSDError(NumericError):
    """A matrix expected to be positive semi-definite has a negative eigenvalue."""
