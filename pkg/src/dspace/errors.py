"""Exception types shared across the package."""


class DspaceError(Exception):
    """Base class for all package errors."""

    code = "error"


class SpecificationError(DspaceError):
    """Invalid model/problem specification (duplicate terms, bad fields)."""

    code = "specification"


class CodingError(DspaceError):
    """Categorical data does not match the declared coding."""

    code = "coding"


class SingularFitError(DspaceError):
    """Design matrix is rank deficient; carries the offending columns."""

    code = "singular_fit"

    def __init__(self, message: str, columns=()):
        super().__init__(message)
        self.columns = list(columns)


class ContractError(DspaceError):
    """Caller violated an operation contract (e.g. dimension mismatch)."""

    code = "contract"


class DegeneratePointError(DspaceError):
    """Zero prediction variance at a point while the model has noise."""

    code = "degenerate_point"


class NumericError(DspaceError):
    """A numeric routine failed to converge; message carries diagnostics."""

    code = "numeric"


class CapacityError(DspaceError):
    """Requested computation exceeds a guarded size limit."""

    code = "capacity"


class InfeasibleError(DspaceError):
    """No feasible design space exists for the given problem."""

    code = "infeasible"

    def __init__(self, message: str, details=None):
        super().__init__(message)
        self.details = details or {}
