"""Exception types shared across the package.

The CLI maps these onto stable exit codes, so library code should raise the
most specific class that applies instead of bare ValueError/RuntimeError.
"""


class ReplayOptError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ReplayOptError):
    """Invalid configuration: bad layer spec, unknown key, unreadable file."""


class ContractViolation(ReplayOptError):
    """A caller broke an API precondition (shape mismatch, step after done)."""


class NumericFault(ReplayOptError):
    """Non-finite values appeared where finite math was required."""


class EmptyBufferError(ReplayOptError):
    """Sampling was requested from a buffer that holds no transitions."""


class DegeneratePriorityError(ReplayOptError):
    """Priority mass is zero, so proportional sampling is undefined."""
