"""QoS gain, spare-capacity balance, consistency and the combined objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import AllocationMatrix, Instance


@dataclass
class ObjectiveBreakdown:
    qos: float
    balance: float
    consistency: float
    total: float
    loads: np.ndarray

    def to_dict(self) -> dict:
        return {"qos": self.qos, "balance": self.balance, "consistency": self.consistency,
                "total": self.total, "loads": [float(v) for v in self.loads]}


def loads(instance: Instance, alloc: AllocationMatrix) -> np.ndarray:
    return instance.lambda0 * alloc.x.sum(axis=(0, 2)).astype(float)


def load_of(instance: Instance, alloc: AllocationMatrix, j: int) -> float:
    if not 0 <= j < instance.n_cbs:
        raise KeyError(f"unknown CBS index {j}")
    return float(instance.lambda0 * alloc.x[:, j, :].sum())


def qos_gain(instance: Instance, alloc: AllocationMatrix) -> float:
    per_pair = alloc.x.sum(axis=2)
    return float(instance.lambda0 * np.sum(instance.gains * per_pair))


def balance(instance: Instance, alloc: AllocationMatrix) -> float:
    spare = instance.capacities - loads(instance, alloc)
    return float(-np.sum(spare ** 2))


def consistency(instance: Instance, alloc: AllocationMatrix) -> float:
    per_pair = alloc.x.sum(axis=2)
    return float(np.sum(instance.weights * per_pair))


def total_objective(instance: Instance, alloc: AllocationMatrix) -> ObjectiveBreakdown:
    mu1, mu2, mu3 = instance.mu
    per_pair = alloc.x.sum(axis=2)
    load = instance.lambda0 * per_pair.sum(axis=0).astype(float)
    g = float(instance.lambda0 * np.sum(instance.gains * per_pair))
    b = float(-np.sum((instance.capacities - load) ** 2))
    w = float(np.sum(instance.weights * per_pair))
    return ObjectiveBreakdown(qos=g, balance=b, consistency=w,
                              total=mu1 * g + mu2 * b + mu3 * w, loads=load)


def consistency_weights(prev: Optional[AllocationMatrix], instance: Instance) -> np.ndarray:
    """w[i, j] = 1 iff CBS j served any unit of flow i's domain under ``prev``.

    ``prev`` may come from a different instance over the same CBS and domain
    universe; only its domain -> CBS footprint matters.
    """
    w = np.zeros((instance.n_flows, instance.n_cbs))
    if prev is None:
        return w
    if prev.n_cbs != instance.n_cbs:
        raise ValueError(f"previous policy covers {prev.n_cbs} CBSs, "
                         f"instance has {instance.n_cbs}")
    if len(prev.flow_domains) and int(prev.flow_domains.max()) >= instance.n_domains:
        raise ValueError("previous policy references a domain outside the instance")
    served = prev.served_domains(instance.n_domains)
    if instance.n_flows:
        w[:] = served[instance.flow_domains]
    return w


def marginal_value(instance: Instance, alloc: AllocationMatrix, i: int, j: int, k: int,
                   load_j: Optional[float] = None) -> float:
    """Exact gain of flipping x[i, j, k] from 0 to 1.

    The balance term differs by exactly -mu2 * lambda0**2 from the often
    quoted 2*lambda0*spare form: (s)^2 - (s - l)^2 = 2*l*s - l^2.
    """
    if alloc.x[i, j, k]:
        raise ValueError(f"x[{i}, {j}, {k}] is already set")
    if load_j is None:
        load_j = load_of(instance, alloc, j)
    return marginal_closed_form(instance, i, j, load_j)


def marginal_closed_form(instance: Instance, i: int, j: int, load_j: float) -> float:
    mu1, mu2, mu3 = instance.mu
    lam = instance.lambda0
    spare = instance.capacities[j] - load_j
    return (mu1 * lam * instance.gains[i, j]
            + mu2 * (2.0 * lam * spare - lam * lam)
            + mu3 * instance.weights[i, j])
