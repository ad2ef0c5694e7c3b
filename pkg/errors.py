"""Exceptions raised by the lab modules."""


class LabError(Exception):
    pass


class DomainError(LabError, ValueError):
    """Argument outside the domain of an operation"""


class ConfigurationError(LabError, ValueError):
    """Invalid grid, potential or experiment configuration"""


class ContractViolation(LabError):
    """Input breaks the precondition an identity relies on"""


class SingularityError(LabError):
    def __init__(self, message, layer=None, node=None):
        super().__init__(message)
        self.layer = layer
        self.node = node


class InfeasibleConfiguration(LabError):
    def __init__(self, message, rate=None):
        super().__init__(message)
        self.rate = rate


class StepSizeError(LabError):
    def __init__(self, message, fraction=None):
        super().__init__(message)
        self.fraction = fraction
