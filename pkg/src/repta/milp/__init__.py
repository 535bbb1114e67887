"""Small linear-modelling layer with pluggable exact MILP backends."""

from .bigm import big_m_product
from .model import (
    ConstraintBlock,
    Domain,
    FrozenModelError,
    LinExpr,
    Model,
    ModelError,
    ModelMismatchError,
    Sense,
    ValidationError,
    Var,
    VarArray,
    quicksum,
)
from .solve import (
    ConfigurationError,
    SolveOptions,
    SolveResult,
    Status,
    Violation,
    available_backends,
    solve,
    verify_solution,
)

__all__ = [
    "ConfigurationError", "ConstraintBlock", "Domain", "FrozenModelError", "LinExpr", "Model",
    "ModelError", "ModelMismatchError", "Sense", "SolveOptions", "SolveResult", "Status",
    "ValidationError", "Var", "VarArray", "Violation", "available_backends", "big_m_product",
    "quicksum", "solve", "verify_solution",
]
