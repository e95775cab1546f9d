"""Problem instance data model, validation and JSON interchange.

An allocation is kept as a dense boolean cube ``x[i, j, k]`` over
(flow, CBS, sub-flow).  Entries with ``k >= unit_count[i]`` are padding and
must stay False.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Optional, Sequence

import numpy as np

# relative slack used when turning c_j / lambda0 into an integer unit count
_FLOOR_EPS = 1e-9


class InstanceTooLarge(ValueError):
    """Raised by enumeration routines when the search space exceeds the guard."""


@dataclass(frozen=True)
class Cbs:
    id: str
    position: tuple[float, float]
    radius: float
    capacity: float
    cache_slots: int = 1


@dataclass(frozen=True)
class UserGroup:
    id: str
    position: tuple[float, float]


@dataclass(frozen=True)
class Flow:
    ug: int
    domain: int
    rate: float
    unit_count: int

    @property
    def id(self) -> tuple[int, int]:
        return (self.ug, self.domain)


@dataclass(frozen=True)
class Violation:
    code: str
    where: tuple = ()

    def __str__(self) -> str:
        if not self.where:
            return self.code
        return f"{self.code}{self.where}"


@dataclass(eq=False)
class Instance:
    cbss: list[Cbs]
    user_groups: list[UserGroup]
    n_domains: int
    flows: list[Flow]
    lambda0: float
    connectivity: np.ndarray  # (F, M) in {0, 1}
    gains: np.ndarray  # (F, M)
    weights: np.ndarray  # (F, M)
    mu: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        n_f, n_m = len(self.flows), len(self.cbss)
        self.connectivity = _as_matrix(self.connectivity, n_f, n_m, dtype=np.int8)
        self.gains = _as_matrix(self.gains, n_f, n_m)
        self.weights = _as_matrix(self.weights, n_f, n_m)
        self.mu = tuple(float(m) for m in self.mu)

    @property
    def n_flows(self) -> int:
        return len(self.flows)

    @property
    def n_cbs(self) -> int:
        return len(self.cbss)

    @cached_property
    def unit_counts(self) -> np.ndarray:
        return np.array([f.unit_count for f in self.flows], dtype=np.int64)

    @cached_property
    def max_units(self) -> int:
        return int(max((f.unit_count for f in self.flows), default=0))

    @cached_property
    def capacities(self) -> np.ndarray:
        return np.array([c.capacity for c in self.cbss], dtype=float)

    @cached_property
    def flow_domains(self) -> np.ndarray:
        return np.array([f.domain for f in self.flows], dtype=np.int64)

    @cached_property
    def unit_capacity(self) -> np.ndarray:
        """Integer unit bound floor(c_j / lambda0) per CBS."""
        return np.array([unit_capacity(c.capacity, self.lambda0) for c in self.cbss],
                        dtype=np.int64)

    @cached_property
    def unit_mask(self) -> np.ndarray:
        """(F, K) bool: sub-flow k exists for flow i."""
        k = np.arange(max(self.max_units, 1))
        return k[None, :] < self.unit_counts[:, None]

    def units(self) -> list[tuple[int, int]]:
        """All mapping units (i, k) in flow-major order."""
        return [(i, k) for i, f in enumerate(self.flows) for k in range(f.unit_count)]

    def distances(self) -> np.ndarray:
        """UG-to-CBS distance of every (flow, CBS) pair, meters."""
        ug = np.array([self.user_groups[f.ug].position for f in self.flows], dtype=float)
        cb = np.array([c.position for c in self.cbss], dtype=float)
        if ug.size == 0 or cb.size == 0:
            return np.zeros((self.n_flows, self.n_cbs))
        return np.hypot(ug[:, None, 0] - cb[None, :, 0], ug[:, None, 1] - cb[None, :, 1])

    def replace(self, **changes) -> "Instance":
        data = dict(cbss=self.cbss, user_groups=self.user_groups, n_domains=self.n_domains,
                    flows=self.flows, lambda0=self.lambda0, connectivity=self.connectivity,
                    gains=self.gains, weights=self.weights, mu=self.mu)
        data.update(changes)
        return Instance(**data)

    def empty_allocation(self) -> "AllocationMatrix":
        return AllocationMatrix.empty(self)

    # -- JSON -------------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return {
            "cbss": [
                {"id": c.id, "position": list(c.position), "radius": c.radius,
                 "capacity": c.capacity, "cache_slots": c.cache_slots}
                for c in self.cbss
            ],
            "user_groups": [{"id": u.id, "position": list(u.position)}
                            for u in self.user_groups],
            "n_domains": self.n_domains,
            "flows": [{"id": [f.ug, f.domain], "rate": f.rate, "unit_count": f.unit_count}
                      for f in self.flows],
            "lambda0": self.lambda0,
            "connectivity": self.connectivity.astype(int).tolist(),
            "gains": self.gains.tolist(),
            "weights": self.weights.tolist(),
            "mu": list(self.mu),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Instance":
        cbss = [Cbs(id=str(c["id"]), position=tuple(c["position"]), radius=float(c["radius"]),
                    capacity=float(c["capacity"]), cache_slots=int(c.get("cache_slots", 1)))
                for c in data["cbss"]]
        ugs = [UserGroup(id=str(u["id"]), position=tuple(u["position"]))
               for u in data["user_groups"]]
        flows = [Flow(ug=int(f["id"][0]), domain=int(f["id"][1]), rate=float(f["rate"]),
                      unit_count=int(f["unit_count"]))
                 for f in data["flows"]]
        return cls(cbss=cbss, user_groups=ugs, n_domains=int(data["n_domains"]), flows=flows,
                   lambda0=float(data["lambda0"]), connectivity=data["connectivity"],
                   gains=data["gains"], weights=data["weights"], mu=tuple(data["mu"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))


def _as_matrix(values, n_rows, n_cols, dtype=float) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.size == 0:
        return np.zeros((n_rows, n_cols), dtype=dtype)
    if arr.shape != (n_rows, n_cols):
        raise ValueError(f"expected a {n_rows}x{n_cols} matrix, got shape {arr.shape}")
    return arr


def unit_capacity(capacity: float, lambda0: float) -> int:
    """floor(capacity / lambda0), robust to representation error in the ratio."""
    if lambda0 <= 0 or capacity <= 0:
        return 0
    ratio = capacity / lambda0
    return int(math.floor(ratio * (1 + _FLOOR_EPS) + _FLOOR_EPS))


@dataclass(eq=False)
class AllocationMatrix:
    """Binary decision x[i, j, k] plus the flow->domain map it was built for."""

    x: np.ndarray  # bool (F, M, K)
    unit_counts: np.ndarray
    flow_domains: np.ndarray
    capacity_checked: bool = True

    @classmethod
    def empty(cls, instance: Instance) -> "AllocationMatrix":
        shape = (instance.n_flows, instance.n_cbs, max(instance.max_units, 1))
        return cls(np.zeros(shape, dtype=bool), instance.unit_counts, instance.flow_domains)

    @classmethod
    def from_triples(cls, instance: Instance, triples: Iterable[Sequence[int]],
                     capacity_checked: bool = True) -> "AllocationMatrix":
        alloc = cls.empty(instance)
        alloc.capacity_checked = capacity_checked
        counts = instance.unit_counts
        n_f, n_m = instance.n_flows, instance.n_cbs
        for i, j, k in triples:
            if not (0 <= i < n_f and 0 <= j < n_m and 0 <= k < counts[i]):
                raise IndexError(f"element ({i}, {j}, {k}) outside the instance")
            alloc.x[i, j, k] = True
        return alloc

    @property
    def n_cbs(self) -> int:
        return self.x.shape[1]

    def triples(self) -> list[tuple[int, int, int]]:
        return [tuple(int(v) for v in t) for t in np.argwhere(self.x)]

    def unit_counts_per_cbs(self) -> np.ndarray:
        return self.x.sum(axis=(0, 2)).astype(np.int64)

    def assignment(self) -> dict[tuple[int, int], int]:
        """(i, k) -> j for every allocated unit (first CBS if several)."""
        out = {}
        for i, j, k in self.triples():
            out.setdefault((i, k), j)
        return out

    def served_domains(self, n_domains: int) -> np.ndarray:
        """(S, M) bool: CBS j serves at least one unit of domain s."""
        served = np.zeros((n_domains, self.n_cbs), dtype=bool)
        per_flow = self.x.any(axis=2)
        for i in np.flatnonzero(per_flow.any(axis=1)):
            served[self.flow_domains[i]] |= per_flow[i]
        return served

    def copy(self) -> "AllocationMatrix":
        return AllocationMatrix(self.x.copy(), self.unit_counts.copy(),
                                self.flow_domains.copy(), self.capacity_checked)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AllocationMatrix):
            return NotImplemented
        return self.x.shape == other.x.shape and bool(np.array_equal(self.x, other.x))

    def key(self) -> frozenset:
        return frozenset(self.triples())


def validate_instance(instance: Instance) -> list[Violation]:
    """Every invariant violation of ``instance``; empty when it is well formed."""
    out: list[Violation] = []
    if not instance.lambda0 > 0:
        out.append(Violation("NonPositiveLambda0"))
    for j, c in enumerate(instance.cbss):
        if not c.radius > 0:
            out.append(Violation("NonPositiveRadius", (j,)))
        if c.capacity < 0:
            out.append(Violation("NegativeCapacity", (j,)))
        if c.cache_slots < 1:
            out.append(Violation("NoCacheSlots", (j,)))
    for i, f in enumerate(instance.flows):
        if f.rate < 0:
            out.append(Violation("NegativeRate", (i,)))
        if f.unit_count < 0:
            out.append(Violation("NegativeUnitCount", (i,)))
        if not 0 <= f.ug < len(instance.user_groups):
            out.append(Violation("UnknownUserGroup", (i,)))
        if not 0 <= f.domain < instance.n_domains:
            out.append(Violation("UnknownDomain", (i,)))
    for i, j in np.argwhere(instance.gains < 0):
        out.append(Violation("NegativeGain", (int(i), int(j))))
    for i, j in np.argwhere(instance.weights < 0):
        out.append(Violation("NegativeWeight", (int(i), int(j))))
    for i, j in np.argwhere((instance.connectivity != 0) & (instance.connectivity != 1)):
        out.append(Violation("NonBinaryConnectivity", (int(i), int(j))))
    if len(instance.mu) != 3:
        out.append(Violation("BadMu"))
    return out


def check_allocation(instance: Instance, alloc: AllocationMatrix,
                     capacity: bool = True) -> list[Violation]:
    """Violations of the capacity, at-most-one, connectivity and padding rules."""
    out: list[Violation] = []
    x = alloc.x
    n_f, n_m = instance.n_flows, instance.n_cbs
    if x.shape[:2] != (n_f, n_m):
        return [Violation("ShapeMismatch", tuple(x.shape))]
    mask = instance.unit_mask
    if x.shape[2] != mask.shape[1]:
        width = min(x.shape[2], mask.shape[1])
        if x[:, :, width:].any():
            out.append(Violation("PaddingSet", ()))
        x = x[:, :, :width]
        mask = mask[:, :width]
    padding = x & ~mask[:, None, :]
    if padding.any():
        out.extend(Violation("PaddingSet", (int(i),)) for i in np.unique(np.nonzero(padding)[0]))
    if capacity:
        over = x.sum(axis=(0, 2)) > instance.unit_capacity
        out.extend(Violation("CapacityExceeded", (int(j),)) for j in np.flatnonzero(over))
    multi = x.sum(axis=1) > 1
    if multi.any():
        out.extend(Violation("UnitAllocatedTwice", (int(i), int(k)))
                   for i, k in np.argwhere(multi))
    bad = x & (instance.connectivity[:, :, None] == 0)
    if bad.any():
        out.extend(Violation("NotConnected", (int(i), int(j), int(k)))
                   for i, j, k in np.argwhere(bad))
    return out


def allocation_feasible(instance: Instance, alloc: AllocationMatrix) -> bool:
    """True iff ``alloc`` meets capacity, at-most-one and connectivity."""
    x = alloc.x
    if x.shape[2] != instance.unit_mask.shape[1] or x.shape[:2] != instance.connectivity.shape:
        return not check_allocation(instance, alloc)
    if (x.sum(axis=(0, 2)) > instance.unit_capacity).any():
        return False
    if (x.sum(axis=1) > 1).any():
        return False
    allowed = (instance.connectivity[:, :, None] > 0) & instance.unit_mask[:, None, :]
    return not (x & ~allowed).any()


def total_capacity(instance: Instance) -> float:
    return float(sum(c.capacity for c in instance.cbss))


def total_demand(instance: Instance) -> float:
    return float(instance.lambda0 * sum(f.unit_count for f in instance.flows))


def load_instance(path) -> Instance:
    with open(path) as fh:
        return Instance.from_json(fh.read())


def make_instance(capacities: Sequence[float], unit_counts: Sequence[int], gains,
                  lambda0: float = 1.0, connectivity=None, weights=None,
                  mu=(1.0, 1.0, 1.0), domains: Optional[Sequence[int]] = None) -> Instance:
    """Compact constructor for small hand-built or random instances."""
    n_m, n_f = len(capacities), len(unit_counts)
    gains = np.asarray(gains, dtype=float).reshape(n_f, n_m)
    if connectivity is None:
        connectivity = np.ones((n_f, n_m), dtype=np.int8)
    if weights is None:
        weights = np.zeros((n_f, n_m))
    if domains is None:
        domains = list(range(n_f))
    cbss = [Cbs(id=f"cbs{j}", position=(100.0 * j, 0.0), radius=1000.0, capacity=float(c),
                cache_slots=1) for j, c in enumerate(capacities)]
    ugs = [UserGroup(id="ug0", position=(0.0, 0.0))]
    flows = [Flow(ug=0, domain=int(d), rate=lambda0 * int(n), unit_count=int(n))
             for d, n in zip(domains, unit_counts)]
    n_domains = max(domains, default=-1) + 1
    return Instance(cbss=cbss, user_groups=ugs, n_domains=max(n_domains, 1), flows=flows,
                    lambda0=float(lambda0), connectivity=connectivity, gains=gains,
                    weights=weights, mu=tuple(mu))


def inst_a() -> Instance:
    """The two-CBS desk instance used across the test-suite and docs."""
    return make_instance(capacities=[2, 1], unit_counts=[2, 1],
                         gains=[[3, 1], [2, 2]], lambda0=1.0, mu=(1, 0.1, 1))
