"""Exception types raised across the package."""


class ChernFlowError(Exception):
    pass


class DomainError(ChernFlowError):
    """A point or stencil leaves the coordinate domain of a metric."""


class SingularMetricError(ChernFlowError):
    """Metric matrix is not invertible (or has nonpositive determinant)."""


class SingularTimeError(ChernFlowError):
    """Requested time is at or beyond the singular time of a model flow."""


class ContractViolation(ChernFlowError):
    """Inputs violate a documented precondition."""


class ConfigError(ChernFlowError):
    """Invalid run configuration; the message names the offending field."""


class PositivityLoss(ChernFlowError):
    """Metric lost positive definiteness during a flow step."""

    def __init__(self, message, point=None, min_eigenvalue=None):
        super().__init__(message)
        self.point = point
        self.min_eigenvalue = min_eigenvalue
