"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, FormatError -> 3,
InfeasibleError -> 4.
"""


class CachePlanError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CachePlanError, ValueError):
    """A parameter or precondition violation (bad flag, bad shape, bad range)."""


class FormatError(CachePlanError):
    """A serialized artifact violates its format contract."""


class InfeasibleError(CachePlanError, ValueError):
    """No feasible schedule exists for the requested (T, K, M)."""


class DivergedError(CachePlanError, ArithmeticError):
    """State became non-finite during sampling integration."""
