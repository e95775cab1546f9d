"""Greedy allocation, the three baselines and an exhaustive oracle."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from .model import AllocationMatrix, Instance, InstanceTooLarge
from .objective import (ObjectiveBreakdown, consistency_weights, marginal_closed_form,
                        total_objective)

# search-space guard of the exhaustive oracle (product of per-unit choices)
EXACT_LIMIT = 2 ** 24


@dataclass
class SolveResult:
    solver: str
    allocation: AllocationMatrix
    breakdown: ObjectiveBreakdown
    steps: list[tuple[int, int, int, float]] = field(default_factory=list)
    elapsed: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "solver": self.solver,
            "allocation": allocation_to_dict(self.allocation),
            "breakdown": self.breakdown.to_dict(),
            "steps": [[i, j, k, m] for i, j, k, m in self.steps],
        }
        if timing:
            out["elapsed_ms"] = round(self.elapsed * 1e3, 3)
        return out


def allocation_to_dict(alloc: AllocationMatrix) -> dict:
    return {
        "triples": [list(t) for t in alloc.triples()],
        "n_cbs": int(alloc.n_cbs),
        "unit_counts": [int(v) for v in alloc.unit_counts],
        "flow_domains": [int(v) for v in alloc.flow_domains],
        "capacity_checked": bool(alloc.capacity_checked),
    }


def allocation_from_dict(data: dict) -> AllocationMatrix:
    units = np.asarray(data["unit_counts"], dtype=np.int64)
    shape = (len(units), int(data["n_cbs"]), max(int(units.max(initial=0)), 1))
    x = np.zeros(shape, dtype=bool)
    for i, j, k in data["triples"]:
        x[i, j, k] = True
    return AllocationMatrix(x, units, np.asarray(data["flow_domains"], dtype=np.int64),
                            bool(data.get("capacity_checked", True)))


def _with_prev(instance: Instance, prev: Optional[AllocationMatrix]) -> Instance:
    if prev is None:
        return instance
    return instance.replace(weights=consistency_weights(prev, instance))


def _finish(name, instance, alloc, steps, t0) -> SolveResult:
    return SolveResult(solver=name, allocation=alloc,
                       breakdown=total_objective(instance, alloc), steps=steps,
                       elapsed=time.perf_counter() - t0)


def _greedy(instance: Instance) -> tuple[AllocationMatrix, list]:
    """Algorithm core: repeatedly take the feasible (i, j, k) of maximal marginal.

    Marginals split into a per-(flow, CBS) part that never changes and a
    per-CBS balance part that depends only on that CBS's load, so each column
    caches its best flow and only columns touched by a step are refreshed.
    Ties resolve to the lowest (flow, sub, CBS).
    """
    mu1, mu2, mu3 = instance.mu
    lam = instance.lambda0
    n_f, n_m = instance.n_flows, instance.n_cbs
    alloc = AllocationMatrix.empty(instance)
    steps: list[tuple[int, int, int, float]] = []
    if n_f == 0 or n_m == 0:
        return alloc, steps

    caps = instance.capacities
    unit_cap = instance.unit_capacity
    base = mu1 * lam * instance.gains + mu3 * instance.weights
    base = np.where(instance.connectivity > 0, base, -np.inf)
    remaining = instance.unit_counts.copy()
    next_k = np.zeros(n_f, dtype=np.int64)
    count = np.zeros(n_m, dtype=np.int64)
    open_col = unit_cap > 0

    masked = np.where((remaining > 0)[:, None], base, -np.inf)
    col_i = np.argmax(masked, axis=0)
    col_v = masked[col_i, np.arange(n_m)]

    while True:
        spare = caps - lam * count
        score = col_v + mu2 * (2.0 * lam * spare - lam * lam)
        score = np.where(open_col & np.isfinite(col_v), score, -np.inf)
        best = score.max()
        if not np.isfinite(best):
            break
        ties = np.flatnonzero(score == best)
        j = int(min(ties, key=lambda c: (col_i[c], c)))
        i = int(col_i[j])
        k = int(next_k[i])
        steps.append((i, j, k, float(marginal_closed_form(instance, i, j, lam * count[j]))))
        alloc.x[i, j, k] = True
        count[j] += 1
        next_k[i] += 1
        remaining[i] -= 1
        if count[j] >= unit_cap[j]:
            open_col[j] = False
        if remaining[i] == 0:
            masked[i, :] = -np.inf
            stale = np.flatnonzero(col_i == i)
            if stale.size:
                col_i[stale] = np.argmax(masked[:, stale], axis=0)
                col_v[stale] = masked[col_i[stale], stale]
    return alloc, steps


def solve_greedy(instance: Instance, prev: Optional[AllocationMatrix] = None) -> SolveResult:
    t0 = time.perf_counter()
    inst = _with_prev(instance, prev)
    alloc, steps = _greedy(inst)
    return _finish("greedy", inst, alloc, steps, t0)


def solve_greedy_ic(instance: Instance, prev: Optional[AllocationMatrix] = None) -> SolveResult:
    """Greedy on the objective without the consistency term.

    ``prev`` only affects the reported breakdown, never the allocation.
    """
    t0 = time.perf_counter()
    inst = _with_prev(instance, prev)
    mu1, mu2, _ = inst.mu
    blind = inst.replace(mu=(mu1, mu2, 0.0), weights=np.zeros_like(inst.weights))
    alloc, steps = _greedy(blind)
    return _finish("greedy-ic", inst, alloc, steps, t0)


def solve_closest(instance: Instance, prev: Optional[AllocationMatrix] = None) -> SolveResult:
    """Every unit to its nearest connected CBS, ignoring capacity."""
    t0 = time.perf_counter()
    inst = _with_prev(instance, prev)
    dist = inst.distances()
    dist = np.where(inst.connectivity > 0, dist, np.inf)
    alloc = AllocationMatrix.empty(inst)
    alloc.capacity_checked = False
    for i, f in enumerate(inst.flows):
        if f.unit_count == 0 or inst.n_cbs == 0 or not np.isfinite(dist[i]).any():
            continue
        j = int(np.argmin(dist[i]))
        alloc.x[i, j, :f.unit_count] = True
    return _finish("closest", inst, alloc, [], t0)


def solve_ggs(instance: Instance, prev: Optional[AllocationMatrix] = None) -> SolveResult:
    """Capacity-quota deferred acceptance with g_ij as both sides' preference.

    Units propose down their list of connected CBSs (highest gain first);
    a CBS holds at most floor(c_j / lambda0) proposals and keeps the
    highest-gain ones (lower (i, k) wins ties).
    """
    t0 = time.perf_counter()
    inst = _with_prev(instance, prev)
    g = inst.gains
    quota = inst.unit_capacity
    units = inst.units()
    prefs = {}
    for i, k in units:
        js = [j for j in range(inst.n_cbs) if inst.connectivity[i, j] > 0]
        prefs[(i, k)] = sorted(js, key=lambda j: (-g[i, j], j))
    ptr = {u: 0 for u in units}
    held: dict[int, list[tuple[int, int]]] = {j: [] for j in range(inst.n_cbs)}
    free = deque(units)
    while free:
        u = free.popleft()
        if ptr[u] >= len(prefs[u]):
            continue
        j = prefs[u][ptr[u]]
        ptr[u] += 1
        held[j].append(u)
        if len(held[j]) > quota[j]:
            worst = min(held[j], key=lambda v: (g[v[0], j], -v[0], -v[1]))
            held[j].remove(worst)
            free.append(worst)
    alloc = AllocationMatrix.empty(inst)
    for j, us in held.items():
        for i, k in us:
            alloc.x[i, j, k] = True
    return _finish("ggs", inst, alloc, [], t0)


def search_space(instance: Instance, full: bool = False) -> int:
    """Product of per-unit choice counts, an upper bound on enumerated leaves."""
    total = 1
    for i, f in enumerate(instance.flows):
        n = int(np.count_nonzero(instance.connectivity[i])) + (0 if full else 1)
        total *= max(n, 1) ** f.unit_count
        if total > EXACT_LIMIT:
            break
    return total


def enumerate_allocations(instance: Instance, full: bool = False
                          ) -> Iterator[tuple[float, tuple[int, ...]]]:
    """Yield (objective, assignment) over every feasible allocation.

    ``assignment[u]`` is the CBS of the u-th unit of ``instance.units()`` or
    -1.  With ``full=True`` every unit must be placed.
    """
    if search_space(instance, full) > EXACT_LIMIT:
        raise InstanceTooLarge(f"enumeration exceeds {EXACT_LIMIT} candidates")
    mu1, mu2, mu3 = instance.mu
    lam = instance.lambda0
    caps = instance.capacities
    unit_cap = instance.unit_capacity
    units = instance.units()
    choices = [[j for j in range(instance.n_cbs) if instance.connectivity[i, j] > 0]
               for i, _ in units]
    add = mu1 * lam * instance.gains + mu3 * instance.weights
    count = np.zeros(instance.n_cbs, dtype=np.int64)
    picked = [-1] * len(units)

    def leaf_value(acc):
        return acc + mu2 * -float(np.sum((caps - lam * count) ** 2))

    def rec(u, acc):
        if u == len(units):
            yield leaf_value(acc), tuple(picked)
            return
        i = units[u][0]
        if not full:
            picked[u] = -1
            yield from rec(u + 1, acc)
        for j in choices[u]:
            if count[j] >= unit_cap[j]:
                continue
            count[j] += 1
            picked[u] = j
            yield from rec(u + 1, acc + add[i, j])
            count[j] -= 1
        picked[u] = -1

    yield from rec(0, 0.0)


def assignment_to_allocation(instance: Instance, assignment) -> AllocationMatrix:
    alloc = AllocationMatrix.empty(instance)
    for (i, k), j in zip(instance.units(), assignment):
        if j >= 0:
            alloc.x[i, j, k] = True
    return alloc


def solve_exact(instance: Instance, prev: Optional[AllocationMatrix] = None) -> SolveResult:
    t0 = time.perf_counter()
    inst = _with_prev(instance, prev)
    best_v, best_a = -np.inf, None
    for value, assignment in enumerate_allocations(inst):
        if value > best_v:
            best_v, best_a = value, assignment
    alloc = assignment_to_allocation(inst, best_a)
    return _finish("exact", inst, alloc, [], t0)


def audit_ratio(instance: Instance) -> float:
    """(F(opt) - F(greedy)) / (F(opt) - F(empty)); 0 when opt equals empty."""
    opt = solve_exact(instance).breakdown.total
    got = solve_greedy(instance).breakdown.total
    empty = total_objective(instance, instance.empty_allocation()).total
    span = opt - empty
    if span <= 1e-12 * max(1.0, abs(opt)):
        return 0.0
    return (opt - got) / span


SOLVERS: dict[str, Callable[..., SolveResult]] = {
    "greedy": solve_greedy,
    "greedy-ic": solve_greedy_ic,
    "closest": solve_closest,
    "ggs": solve_ggs,
    "exact": solve_exact,
}


def get_solver(name: str) -> Callable[..., SolveResult]:
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
