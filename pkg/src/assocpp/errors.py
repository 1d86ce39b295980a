"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class AssocPPError(Exception):
    """Base class for all library errors."""

    code = "error"
    exit_code = 1

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def to_dict(self):
        return {"code": self.code, "message": str(self), "diagnostics": self.diagnostics}


class ParameterError(AssocPPError, ValueError):
    code = "parameter"
    exit_code = 2


class ExistenceError(ParameterError):
    """Kernel spec violates the spectral existence condition."""

    code = "existence"


class ValidationError(ParameterError):
    code = "validation"


class DomainError(AssocPPError, ValueError):
    code = "domain"
    exit_code = 2


class UnsupportedOrderError(DomainError):
    code = "unsupported_order"


class NumericError(AssocPPError, ArithmeticError):
    code = "numeric"
    exit_code = 3


class OperatorValidityError(NumericError):
    """Discretized kernel operator has eigenvalues outside [0, 1]."""

    code = "operator_validity"


class DegenerateStatisticError(NumericError):
    code = "degenerate_statistic"


class ResourceError(AssocPPError, RuntimeError):
    code = "resource"
    exit_code = 4


class ConvergenceError(AssocPPError, RuntimeError):
    code = "non_convergence"
    exit_code = 5


class DesignError(ConvergenceError):
    """Singular Jacobian in the intensity score equation."""

    code = "design"
