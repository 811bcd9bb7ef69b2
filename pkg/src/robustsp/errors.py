"""Exception types shared across the toolkit."""


class RobustSPError(Exception):
    """Base class for all toolkit errors."""


class NoPath(RobustSPError):
    """Target is not reachable from the source."""


class TooManyPaths(RobustSPError):
    """Exhaustive path enumeration exceeded its cap."""


class SchemaError(RobustSPError):
    """An input file does not match the documented schema."""


class EmptySeries(RobustSPError):
    """A speed series has no observed value at any time point."""


class DegenerateGeometry(RobustSPError):
    """A segment's endpoints coincide after snapping."""


class ZeroSpeed(RobustSPError):
    """An interpolated speed is not strictly positive."""


class DegenerateData(RobustSPError):
    """Not enough scenarios to fit the requested model."""


class DimensionMismatch(RobustSPError):
    """Model and path do not share the same arc index space."""


class BudgetExceeded(RobustSPError):
    """A solver exceeded its configured resource budget."""


class LabelBudgetExceeded(BudgetExceeded):
    """Pareto label count exceeded the configured cap."""


class NodeBudgetExceeded(BudgetExceeded):
    """Branch-and-bound node count exceeded the configured cap."""


class NoConnectedPairs(RobustSPError):
    """The graph contains no ordered pair (s, t) with t reachable from s."""


class EmptyReport(RobustSPError):
    """A benchmark report contains no records."""


class ConfigError(RobustSPError):
    """An experiment configuration failed validation."""
