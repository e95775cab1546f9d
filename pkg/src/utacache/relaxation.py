"""Equality-constrained program versus its at-most-one relaxation.

P1 requires every unit to be placed; P2 allows a unit to stay unplaced.
Both are enumerated exhaustively on small full-connectivity instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import Instance, total_capacity, total_demand
from .solvers import enumerate_allocations

# optimum-set membership tolerance, relative to the objective magnitude
OPT_TOL = 1e-9


@dataclass
class RelaxationReport:
    capacity_ok: bool
    p1_feasible: bool
    p1_optima: frozenset = field(default_factory=frozenset)
    p2_optima: frozenset = field(default_factory=frozenset)
    p1_best: Optional[float] = None
    p2_best: Optional[float] = None

    @property
    def equivalent(self) -> Optional[bool]:
        if not self.p1_feasible:
            return None
        return self.p1_optima == self.p2_optima

    @property
    def capacity_consistent(self) -> bool:
        # placing every unit is only possible when capacity covers demand
        return self.capacity_ok or not self.p1_feasible

    def to_dict(self) -> dict:
        return {
            "capacity_ok": self.capacity_ok,
            "p1_feasible": self.p1_feasible,
            "equivalent": self.equivalent,
            "p1_optima": sorted(list(a) for a in self.p1_optima),
            "p2_optima": sorted(list(a) for a in self.p2_optima),
            "p1_best": self.p1_best,
            "p2_best": self.p2_best,
        }


def check_capacity_condition(instance: Instance) -> bool:
    return total_capacity(instance) >= total_demand(instance)


def _require_full_connectivity(instance: Instance):
    if instance.connectivity.size and not np.all(instance.connectivity == 1):
        raise ValueError("equivalence checks need full connectivity (t == 1 everywhere)")


def _optima(instance: Instance, full: bool) -> tuple[frozenset, Optional[float]]:
    values = list(enumerate_allocations(instance, full=full))
    if not values:
        return frozenset(), None
    best = max(v for v, _ in values)
    tol = OPT_TOL * max(1.0, abs(best))
    return frozenset(a for v, a in values if v >= best - tol), best


def enumerate_p1_optima(instance: Instance) -> frozenset:
    """Optimal assignments (tuples of CBS per unit) with every unit placed."""
    _require_full_connectivity(instance)
    return _optima(instance, full=True)[0]


def enumerate_p2_optima(instance: Instance) -> frozenset:
    _require_full_connectivity(instance)
    return _optima(instance, full=False)[0]


def verify_equivalence(instance: Instance) -> RelaxationReport:
    _require_full_connectivity(instance)
    p1, p1_best = _optima(instance, full=True)
    p2, p2_best = _optima(instance, full=False)
    report = RelaxationReport(capacity_ok=check_capacity_condition(instance),
                              p1_feasible=p1_best is not None, p1_optima=p1, p2_optima=p2,
                              p1_best=None if p1_best is None else float(p1_best),
                              p2_best=None if p2_best is None else float(p2_best))
    if not report.capacity_consistent:
        raise AssertionError("P1 feasible although total capacity < total demand")
    return report
