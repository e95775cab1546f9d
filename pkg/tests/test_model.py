import json

import numpy as np
import pytest

from utacache.model import (AllocationMatrix, Instance, allocation_feasible, check_allocation,
                            inst_a, make_instance, total_capacity, total_demand,
                            unit_capacity, validate_instance)


def test_well_formed_instance_has_no_violations(two_cbs):
    assert validate_instance(two_cbs) == []


def test_negative_gain_is_reported():
    inst = make_instance([2, 1], [1], [[-1, 2]])
    codes = [(v.code, v.where) for v in validate_instance(inst)]
    assert codes == [("NegativeGain", (0, 0))]


def test_nonpositive_lambda0_is_reported(two_cbs):
    bad = two_cbs.replace(lambda0=0.0)
    assert [v.code for v in validate_instance(bad)] == ["NonPositiveLambda0"]


def test_other_violation_codes(two_cbs):
    bad = two_cbs.replace(weights=np.array([[0, -1], [0, 0]], dtype=float),
                          connectivity=np.array([[1, 2], [1, 1]], dtype=np.int8))
    codes = sorted(v.code for v in validate_instance(bad))
    assert codes == ["NegativeWeight", "NonBinaryConnectivity"]


def test_validate_is_idempotent(two_cbs):
    bad = two_cbs.replace(lambda0=-1.0)
    assert validate_instance(bad) == validate_instance(bad)


@pytest.mark.parametrize("caps, expected", [([2, 1], 3.0), ([], 0.0), ([1200], 1200.0)])
def test_total_capacity(caps, expected):
    inst = make_instance(caps, [], np.zeros((0, len(caps))))
    assert total_capacity(inst) == expected


@pytest.mark.parametrize("lam, units, expected", [(1, [2, 1], 3.0), (2, [3], 6.0), (1, [], 0.0)])
def test_total_demand(lam, units, expected):
    inst = make_instance([1], units, np.zeros((len(units), 1)), lambda0=lam)
    assert total_demand(inst) == expected


def test_totals_invariant_under_permutation():
    inst = make_instance([3, 1, 2], [2, 1, 4], np.ones((3, 3)), lambda0=0.5)
    perm = make_instance([2, 3, 1], [4, 2, 1], np.ones((3, 3)), lambda0=0.5)
    assert total_capacity(inst) == total_capacity(perm)
    assert total_demand(inst) == total_demand(perm)


def test_unit_capacity_floors_with_representation_slack():
    assert unit_capacity(2.0, 1.0) == 2
    assert unit_capacity(2.999, 1.0) == 2
    assert unit_capacity(0.3, 0.1) == 3  # 0.3 / 0.1 = 2.9999999999999996
    assert unit_capacity(0.0, 1.0) == 0


def test_check_allocation_reports_each_family(a):
    ok = AllocationMatrix.from_triples(a, [(0, 0, 0), (0, 0, 1), (1, 1, 0)])
    assert check_allocation(a, ok) == []
    assert allocation_feasible(a, ok)
    over = AllocationMatrix.from_triples(a, [(0, 1, 0), (1, 1, 0)])
    assert [v.code for v in check_allocation(a, over)] == ["CapacityExceeded"]
    assert check_allocation(a, over, capacity=False) == []
    twice = AllocationMatrix.from_triples(a, [(0, 0, 0), (0, 1, 0)])
    assert [v.code for v in check_allocation(a, twice)] == ["UnitAllocatedTwice"]
    cut = a.replace(connectivity=np.array([[1, 0], [1, 1]], dtype=np.int8))
    off = AllocationMatrix.from_triples(cut, [(0, 1, 0)])
    assert [v.code for v in check_allocation(cut, off)] == ["NotConnected"]
    assert not allocation_feasible(cut, off)


def test_padding_slot_is_rejected(a):
    alloc = a.empty_allocation()
    alloc.x[1, 0, 1] = True  # flow 1 has a single unit
    assert [v.code for v in check_allocation(a, alloc)] == ["PaddingSet"]
    with pytest.raises(IndexError):
        AllocationMatrix.from_triples(a, [(1, 0, 1)])


def test_json_roundtrip_keys(a):
    data = json.loads(a.to_json())
    assert sorted(data) == sorted(["cbss", "user_groups", "n_domains", "flows", "lambda0",
                                   "connectivity", "gains", "weights", "mu"])
    back = Instance.from_json(a.to_json())
    assert back.to_json() == a.to_json()
    assert np.array_equal(back.gains, a.gains)


def test_allocation_roundtrip_helpers(a):
    alloc = AllocationMatrix.from_triples(a, [(0, 0, 1), (1, 1, 0)])
    assert alloc.triples() == [(0, 0, 1), (1, 1, 0)]
    assert alloc.assignment() == {(0, 1): 0, (1, 0): 1}
    assert alloc.unit_counts_per_cbs().tolist() == [1, 1]
    assert alloc.copy() == alloc and alloc.copy() is not alloc


def test_inst_a_shape():
    a = inst_a()
    assert a.capacities.tolist() == [2.0, 1.0]
    assert a.unit_counts.tolist() == [2, 1]
    assert a.mu == (1, 0.1, 1)
