"""Exception types shared across the toolkit."""


class NilabError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(NilabError):
    """Array shape violates an operation's contract (odd sizes, mismatches)."""


class DomainError(NilabError):
    """Scalar or array value outside the documented input domain."""


class ProfileError(NilabError):
    """Invalid synthetic camera profile (non-positive gains, bad matrix)."""


class SamplingError(NilabError):
    """Patch sampler exhausted its draw budget before filling a batch."""


class NumericError(NilabError):
    """Non-finite value produced inside a numerical pipeline stage."""


class ConfigError(NilabError):
    """Invalid or inconsistent run configuration."""
