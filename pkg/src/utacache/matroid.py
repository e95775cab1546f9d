"""Set view of the allocation problem: ground set, independence and set objective.

A ground element is a triple ``(i, j, k)``: unit k of flow i goes to CBS j.
Three partitions of the ground set carry the constraints:

* ``P_j``     all elements with CBS j, bound floor(c_j / lambda0)
* ``Q_ik``    all elements of unit (i, k), bound 1
* ``T_ijk``   singletons, bound t_ij
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .model import AllocationMatrix, Instance
from .rng import stream

Element = tuple[int, int, int]

MATROIDS = ("capacity", "unit", "connectivity")


def ground_set(instance: Instance) -> list[Element]:
    return [(i, j, k) for i, f in enumerate(instance.flows)
            for j in range(instance.n_cbs) for k in range(f.unit_count)]


def matrix_to_set(alloc: AllocationMatrix) -> frozenset:
    return frozenset(alloc.triples())


def set_to_matrix(instance: Instance, elements: Iterable[Element]) -> AllocationMatrix:
    return AllocationMatrix.from_triples(instance, elements)


@dataclass
class PartitionView:
    """The three partitions of E with their block bounds."""

    blocks_p: dict[int, list[Element]]
    blocks_q: dict[tuple[int, int], list[Element]]
    blocks_t: dict[Element, list[Element]]
    bound_p: dict[int, int]
    bound_t: dict[Element, int]

    @classmethod
    def of(cls, instance: Instance) -> "PartitionView":
        ground = ground_set(instance)
        caps = instance.unit_capacity
        bp: dict[int, list[Element]] = {j: [] for j in range(instance.n_cbs)}
        bq: dict[tuple[int, int], list[Element]] = {u: [] for u in instance.units()}
        for e in ground:
            bp[e[1]].append(e)
            bq[(e[0], e[2])].append(e)
        return cls(blocks_p=bp, blocks_q=bq, blocks_t={e: [e] for e in ground},
                   bound_p={j: int(caps[j]) for j in bp},
                   bound_t={e: int(instance.connectivity[e[0], e[1]]) for e in ground})


def independent_in(instance: Instance, elements: Iterable[Element], which: str) -> bool:
    """Independence in one of the three partition matroids."""
    elements = list(elements)
    if which == "capacity":
        caps = instance.unit_capacity
        per_cbs = Counter(e[1] for e in elements)
        return all(n <= caps[j] for j, n in per_cbs.items())
    if which == "unit":
        per_unit = Counter((e[0], e[2]) for e in elements)
        return all(n <= 1 for n in per_unit.values())
    if which == "connectivity":
        return all(instance.connectivity[e[0], e[1]] >= 1 for e in set(elements))
    raise ValueError(f"unknown matroid {which!r}")


def is_independent(instance: Instance, elements: Iterable[Element]) -> bool:
    elements = list(elements)
    return all(independent_in(instance, elements, m) for m in MATROIDS)


def set_objective(instance: Instance, elements: Iterable[Element]) -> float:
    """F'(A) evaluated directly from block counts."""
    elements = set(elements)
    mu1, mu2, mu3 = instance.mu
    lam = instance.lambda0
    g = sum(lam * instance.gains[i, j] for i, j, _ in elements)
    w = sum(instance.weights[i, j] for i, j, _ in elements)
    per_cbs = Counter(j for _, j, _ in elements)
    b = -sum((c.capacity - lam * per_cbs.get(j, 0)) ** 2 for j, c in enumerate(instance.cbss))
    return mu1 * g + mu2 * b + mu3 * w


def set_marginal(instance: Instance, elements: frozenset, e: Element) -> float:
    return set_objective(instance, elements | {e}) - set_objective(instance, elements)


# -- audit ---------------------------------------------------------------


@dataclass
class AuditReport:
    trials: int
    violations: list[dict] = field(default_factory=list)
    checks: Counter = field(default_factory=Counter)
    intersection_exchange_failures: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"trials": self.trials, "violations": self.violations,
                "checks": dict(self.checks),
                "intersection_exchange_failures": self.intersection_exchange_failures}


def _random_independent(instance, ground, rng, which=MATROIDS) -> list[Element]:
    order = rng.permutation(len(ground))
    target = int(rng.integers(0, len(ground) + 1))
    chosen: list[Element] = []
    for idx in order:
        if len(chosen) >= target:
            break
        cand = chosen + [ground[idx]]
        if all(independent_in(instance, cand, m) for m in which):
            chosen = cand
    return chosen


def _random_subset(items, rng) -> list:
    if not items:
        return []
    mask = rng.random(len(items)) < rng.random()
    return [e for e, keep in zip(items, mask) if keep]


def _exchange_holds(instance, small, large, which) -> bool:
    small_set = set(small)
    for e in large:
        if e in small_set:
            continue
        if all(independent_in(instance, small + [e], m) for m in which):
            return True
    return False


def audit_matroid(instance: Instance, trials: int = 1000, seed: int = 0,
                  tol: float = 1e-9) -> AuditReport:
    """Randomised regression checks of the set-view structure.

    Violations: downward closure of the intersection, the exchange axiom of
    each partition matroid on its own, spare-capacity monotonicity and
    submodularity of F'.  Exchange failures of the *intersection* are
    counted separately: an intersection of partition matroids need not be a
    matroid, and the greedy guarantee does not rely on it being one.
    """
    rng = stream(seed, "matroid-audit")
    ground = ground_set(instance)
    report = AuditReport(trials=trials)
    if len(ground) <= 1:
        return report
    lam = instance.lambda0
    caps = instance.capacities
    scale = 1.0 + float(np.max(np.abs(instance.gains), initial=0)) * lam * abs(instance.mu[0]) \
        + float(np.max(caps, initial=0)) ** 2 * abs(instance.mu[1]) \
        + float(np.max(np.abs(instance.weights), initial=0)) * abs(instance.mu[2])

    def violate(kind, **witness):
        report.violations.append({"kind": kind, "witness": _jsonable(witness)})

    for _ in range(trials):
        ind = _random_independent(instance, ground, rng)
        sub = _random_subset(ind, rng)
        report.checks["downward_closure"] += 1
        if not is_independent(instance, sub):
            violate("downward_closure", independent=ind, subset=sub)

        for which in MATROIDS:
            a = _random_independent(instance, ground, rng, (which,))
            b = _random_independent(instance, ground, rng, (which,))
            if len(a) > len(b):
                a, b = b, a
            if len(a) < len(b):
                report.checks[f"exchange_{which}"] += 1
                if not _exchange_holds(instance, a, b, (which,)):
                    violate(f"exchange_{which}", small=a, large=b)
        a = _random_independent(instance, ground, rng)
        b = _random_independent(instance, ground, rng)
        if len(a) > len(b):
            a, b = b, a
        if len(a) < len(b) and not _exchange_holds(instance, a, b, MATROIDS):
            report.intersection_exchange_failures += 1

        # chain A <= B, e outside B
        big = frozenset(_random_subset(ground, rng))
        small = frozenset(_random_subset(sorted(big), rng))
        outside = [e for e in ground if e not in big]
        if not outside:
            continue
        e = outside[int(rng.integers(len(outside)))]
        m_small = set_marginal(instance, small, e)
        m_big = set_marginal(instance, big, e)
        report.checks["submodularity"] += 1
        if m_small < m_big - tol * scale:
            violate("submodularity", A=sorted(small), B=sorted(big), e=e,
                    gain_A=m_small, gain_B=m_big)
        spare = caps[e[1]] - lam * sum(1 for x in small if x[1] == e[1])
        if spare >= lam:
            report.checks["monotonicity"] += 1
            if m_small < -tol * scale:
                violate("monotonicity", A=sorted(small), e=e, gain=m_small)
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
