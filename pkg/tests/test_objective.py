import numpy as np
import pytest

from conftest import oracle_objective
from utacache.model import AllocationMatrix, make_instance
from utacache.objective import (balance, consistency, consistency_weights, load_of,
                                marginal_value, qos_gain, total_objective)
from utacache.solvers import solve_greedy


def one_cbs(cap=3.0, units=3, lam=1.0, g=3.0, w=0.0, mu=(1, 1, 1)):
    return make_instance([cap], [units], [[g]], lambda0=lam, weights=[[w]], mu=mu)


def test_load_of():
    inst = one_cbs(cap=10, units=3, lam=2.0)
    assert load_of(inst, inst.empty_allocation(), 0) == 0
    alloc = AllocationMatrix.from_triples(inst, [(0, 0, 0), (0, 0, 1), (0, 0, 2)])
    assert load_of(inst, alloc, 0) == 6
    inst1 = one_cbs(units=2)
    assert load_of(inst1, AllocationMatrix.from_triples(inst1, [(0, 0, 0), (0, 0, 1)]), 0) == 2
    with pytest.raises(KeyError):
        load_of(inst, alloc, 5)


def test_qos_gain(a):
    assert qos_gain(a, a.empty_allocation()) == 0
    inst = one_cbs(units=1)
    assert qos_gain(inst, AllocationMatrix.from_triples(inst, [(0, 0, 0)])) == 3
    assert qos_gain(a, solve_greedy(a).allocation) == 8


def test_balance(a):
    assert balance(a, a.empty_allocation()) == -5
    full = AllocationMatrix.from_triples(a, [(0, 0, 0), (0, 0, 1), (1, 1, 0)])
    assert balance(a, full) == 0
    inst = one_cbs(cap=3)
    assert balance(inst, AllocationMatrix.from_triples(inst, [(0, 0, 0)])) == -4


def test_consistency_weights_cold_start(a):
    assert not consistency_weights(None, a).any()


def test_consistency_weights_follow_domain_across_user_groups():
    # flows: <UG0, s0>, <UG1, s0>, <UG1, s1>; CBSs A, B
    inst = make_instance([4, 4], [1, 1, 1], np.ones((3, 2)), domains=[0, 0, 1])
    prev = AllocationMatrix.from_triples(inst, [(0, 0, 0)])  # domain 0 on A via UG0
    w = consistency_weights(prev, inst)
    assert w.tolist() == [[1, 0], [1, 0], [0, 0]]


def test_consistency_weights_reject_mismatched_universe(a):
    other = make_instance([1, 1, 1], [1], np.ones((1, 3)))
    with pytest.raises(ValueError):
        consistency_weights(other.empty_allocation(), a)
    wide = make_instance([1, 1], [1, 1, 1], np.ones((3, 2)), domains=[0, 1, 5])
    with pytest.raises(ValueError):
        consistency_weights(wide.empty_allocation(), a)


def test_consistency():
    inst = one_cbs(units=2, w=1.0)
    cold = inst.replace(weights=np.zeros((1, 1)))
    one = AllocationMatrix.from_triples(inst, [(0, 0, 0)])
    two = AllocationMatrix.from_triples(inst, [(0, 0, 0), (0, 0, 1)])
    assert consistency(cold, two) == 0
    assert consistency(inst, one) == 1
    assert consistency(inst, two) == 2


def test_total_objective(a):
    empty = total_objective(a, a.empty_allocation())
    assert empty.total == pytest.approx(-0.5, abs=1e-12)
    alloc = solve_greedy(a).allocation
    qos_only = a.replace(mu=(1, 0, 0))
    assert total_objective(qos_only, alloc).total == qos_gain(a, alloc)
    bd = total_objective(a, alloc)
    assert bd.total == 8
    assert bd.total == oracle_objective(a, alloc.triples())
    assert bd.loads.sum() == a.lambda0 * alloc.x.sum()
    assert bd.to_dict() == {"qos": 8.0, "balance": 0.0, "consistency": 0.0, "total": 8.0,
                            "loads": [2.0, 1.0]}


def test_marginal_examples():
    inst = one_cbs(cap=3, units=3, mu=(0, 1, 0))
    alloc = AllocationMatrix.from_triples(inst, [(0, 0, 0)])
    assert marginal_value(inst, alloc, 0, 0, 1) == 3
    inst = one_cbs(g=3, mu=(1, 0, 0))
    assert marginal_value(inst, inst.empty_allocation(), 0, 0, 0) == 3
    inst = one_cbs(w=1, mu=(0, 0, 1))
    assert marginal_value(inst, inst.empty_allocation(), 0, 0, 0) == 1


def test_marginal_includes_lambda0_squared_correction():
    inst = one_cbs(cap=5, units=2, lam=2.0, g=0.0, mu=(0, 1, 0))
    # spare 5: 25 - 9 = 16 = 2*2*5 - 2**2
    assert marginal_value(inst, inst.empty_allocation(), 0, 0, 0) == 16


def test_marginal_rejects_set_entry(a):
    alloc = AllocationMatrix.from_triples(a, [(0, 0, 0)])
    with pytest.raises(ValueError):
        marginal_value(a, alloc, 0, 0, 0)


def test_marginal_scales_with_mu(a):
    alloc = AllocationMatrix.from_triples(a, [(0, 0, 0)])
    scaled = a.replace(mu=tuple(3 * m for m in a.mu))
    assert marginal_value(scaled, alloc, 1, 1, 0) == pytest.approx(
        3 * marginal_value(a, alloc, 1, 1, 0))
    assert total_objective(scaled, alloc).total == pytest.approx(
        3 * total_objective(a, alloc).total)


def test_balance_separable_over_cbss(a):
    alloc = AllocationMatrix.from_triples(a, [(0, 0, 0), (1, 1, 0)])
    spare = a.capacities - np.array([1.0, 1.0])
    assert balance(a, alloc) == -float(np.sum(spare ** 2))
