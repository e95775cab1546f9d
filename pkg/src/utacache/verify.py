"""Randomised audit suites over small instances, shared by the CLI and tests."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .matroid import audit_matroid, ground_set, is_independent, set_objective, set_to_matrix
from .model import Instance, allocation_feasible, make_instance
from .objective import marginal_value, total_objective
from .relaxation import verify_equivalence
from .rng import stream
from .solvers import audit_ratio

RATIO_BOUND = 0.75
EXHAUSTIVE_GROUND = 12


@dataclass
class SuiteResult:
    name: str
    trials: int
    failures: list[dict] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"suite": self.name, "trials": self.trials, "ok": self.ok,
                "failures": self.failures[:20], "n_failures": len(self.failures),
                "stats": self.stats}


def random_instance(rng: np.random.Generator, max_cbs: int = 3, max_units: int = 6,
                    full_connectivity: bool = False, integral_capacity: bool = False
                    ) -> Instance:
    """Small random instance: g in [0, 100], w in {0, 1}, positive mu."""
    n_m = int(rng.integers(1, max_cbs + 1))
    total_units = int(rng.integers(0, max_units + 1))
    n_f = int(rng.integers(1, 4))
    cuts = np.sort(rng.integers(0, total_units + 1, size=n_f - 1))
    units = np.diff(np.concatenate([[0], cuts, [total_units]])).astype(int)
    lam0 = float(rng.choice([0.5, 1.0, 1.5, 2.0]))
    if integral_capacity:
        caps = lam0 * rng.integers(0, 4, size=n_m)
    else:
        caps = rng.uniform(0.0, 4.0 * lam0, size=n_m)
    gains = rng.uniform(0.0, 100.0, size=(n_f, n_m))
    weights = rng.integers(0, 2, size=(n_f, n_m)).astype(float)
    if full_connectivity:
        conn = np.ones((n_f, n_m), dtype=np.int8)
    else:
        conn = (rng.random((n_f, n_m)) < 0.75).astype(np.int8)
    mu = (float(rng.uniform(0.05, 2.0)), float(rng.uniform(0.05, 2.0)),
          float(rng.uniform(0.05, 50.0)))
    domains = rng.integers(0, 2, size=n_f)
    return make_instance(capacities=caps, unit_counts=units, gains=gains, lambda0=lam0,
                         connectivity=conn, weights=weights, mu=mu, domains=domains)


def ratio_suite(trials: int = 200, seed: int = 0) -> SuiteResult:
    res = SuiteResult("ratio", trials)
    worst = 0.0
    for t in range(trials):
        inst = random_instance(stream(seed, "ratio", t))
        r = audit_ratio(inst)
        worst = max(worst, r)
        if not (r <= RATIO_BOUND + 1e-9) or r < -1e-9:
            res.failures.append({"trial": t, "ratio": r, "instance": inst.to_dict()})
    res.stats = {"worst_ratio": worst}
    return res


def formulation_suite(trials: int = 500, seed: int = 0, tol: float = 1e-9) -> SuiteResult:
    """Set view versus matrix view: objective values and constraint membership."""
    res = SuiteResult("formulation", trials)
    checked = 0
    for t in range(trials):
        rng = stream(seed, "formulation", t)
        inst = random_instance(rng)
        ground = ground_set(inst)
        if len(ground) <= EXHAUSTIVE_GROUND:
            subsets = itertools.chain.from_iterable(
                itertools.combinations(ground, r) for r in range(len(ground) + 1))
        else:
            subsets = ([e for e in ground if rng.random() < p]
                       for p in rng.random(64))
        for sub in subsets:
            checked += 1
            alloc = set_to_matrix(inst, sub)
            diff = abs(set_objective(inst, sub) - total_objective(inst, alloc).total)
            indep = is_independent(inst, sub)
            feasible = allocation_feasible(inst, alloc)
            if diff > tol or indep != feasible:
                res.failures.append({"trial": t, "subset": [list(e) for e in sub],
                                     "objective_gap": diff, "independent": indep,
                                     "feasible": feasible})
    res.stats = {"subsets_checked": checked}
    return res


def matroid_suite(trials: int = 1000, seed: int = 0) -> SuiteResult:
    """Audit rounds on random instances until ``trials`` chains A <= B, e not
    in B have been checked: closure, per-matroid exchange, spare-capacity
    monotonicity, submodularity."""
    res = SuiteResult("matroid", trials)
    inter = drawn = 0
    checks: dict[str, int] = {}
    while checks.get("submodularity", 0) < trials:
        inst = random_instance(stream(seed, "matroid", drawn))
        rep = audit_matroid(inst, trials=1, seed=seed * 1_000_003 + drawn)
        drawn += 1
        inter += rep.intersection_exchange_failures
        for k, v in rep.checks.items():
            checks[k] = checks.get(k, 0) + v
        for v in rep.violations:
            res.failures.append({"instance": drawn - 1, **v})
    res.stats = {"checks": checks, "instances": drawn,
                 "intersection_exchange_failures": inter}
    return res


def marginal_suite(trials: int = 10_000, seed: int = 0, tol: float = 1e-9) -> SuiteResult:
    """Closed-form marginal against the explicit objective difference."""
    res = SuiteResult("marginal", trials)
    rng = stream(seed, "marginal")
    done = 0
    while done < trials:
        inst = random_instance(rng)
        ground = ground_set(inst)
        if not ground:
            continue
        for _ in range(20):
            if done >= trials:
                break
            chosen = [e for e in ground if rng.random() < 0.4]
            alloc = set_to_matrix(inst, chosen)
            free = [e for e in ground if not alloc.x[e]]
            if not free:
                continue
            i, j, k = free[int(rng.integers(len(free)))]
            closed = marginal_value(inst, alloc, i, j, k)
            after = alloc.copy()
            after.x[i, j, k] = True
            explicit = total_objective(inst, after).total - total_objective(inst, alloc).total
            done += 1
            if abs(closed - explicit) > tol * max(1.0, abs(explicit)):
                res.failures.append({"element": [i, j, k], "closed": closed,
                                     "explicit": explicit})
    return res


def relaxation_suite(trials: int = 100, seed: int = 0) -> SuiteResult:
    """P1/P2 optimum-set equality on ``trials`` P1-feasible instances, plus
    the capacity inequality on every P1-feasible instance drawn on the way."""
    res = SuiteResult("relaxation", trials)
    feasible = drawn = 0
    while feasible < trials:
        rng = stream(seed, "relaxation", drawn)
        drawn += 1
        inst = random_instance(rng, full_connectivity=True, integral_capacity=drawn % 2 == 0)
        try:
            rep = verify_equivalence(inst)
        except AssertionError:
            res.failures.append({"draw": drawn, "kind": "feasible_over_capacity"})
            continue
        if not rep.capacity_ok or not rep.p1_feasible:
            continue
        feasible += 1
        if not rep.equivalent:
            res.failures.append({"draw": drawn, "kind": "optima_differ", **rep.to_dict()})
    res.stats = {"instances_drawn": drawn, "p1_feasible": feasible}
    return res


SUITES = {
    "matroid": matroid_suite,
    "ratio": ratio_suite,
    "relaxation": relaxation_suite,
    "formulation": formulation_suite,
    "marginal": marginal_suite,
}
