"""Shared exception types."""


class ChartDomainError(ValueError):
    """Point falls outside the declared chart domain."""


class MetricParameterError(ValueError):
    """Metric family parameter outside its valid range."""


class ImmersionError(ValueError):
    """Coordinate tangent frame degenerate at the requested point."""


class UnreliableLoopError(ValueError):
    """Winding loop passes too close to a degeneracy to be trusted."""


class SignatureLossError(RuntimeError):
    """Induced metric lost definiteness during a flow."""


class ConfigError(ValueError):
    """Bad configuration key or value."""
