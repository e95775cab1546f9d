"""Unit-based traffic allocation for cache-enabled base stations."""

__version__ = "0.1.0"

from .model import (AllocationMatrix, Cbs, Flow, Instance, InstanceTooLarge, UserGroup,
                    check_allocation, make_instance, validate_instance)
from .objective import marginal_value, total_objective
from .solvers import SOLVERS, SolveResult, get_solver

__all__ = ["AllocationMatrix", "Cbs", "Flow", "Instance", "InstanceTooLarge", "UserGroup",
           "check_allocation", "make_instance", "validate_instance", "marginal_value",
           "total_objective", "SOLVERS", "SolveResult", "get_solver", "__version__"]
