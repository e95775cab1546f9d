import numpy as np
import pytest

from utacache.model import make_instance
from utacache.relaxation import (check_capacity_condition, enumerate_p1_optima,
                                 enumerate_p2_optima, verify_equivalence)


@pytest.mark.parametrize("caps, units, ok", [([1, 1], [3], False), ([2, 1], [2, 1], True),
                                             ([1], [], True)])
def test_capacity_condition(caps, units, ok):
    inst = make_instance(caps, units, np.zeros((len(units), len(caps))))
    assert check_capacity_condition(inst) is ok


def test_p1_optima(a):
    assert enumerate_p1_optima(a) == {(0, 0, 1)}
    short = make_instance([1, 1], [3], [[1, 1]])
    assert enumerate_p1_optima(short) == frozenset()
    forced = make_instance([2], [1], [[1]])
    assert enumerate_p1_optima(forced) == {(0,)}


def test_p2_optima(a):
    assert enumerate_p2_optima(a) == {(0, 0, 1)}
    flat = make_instance([2, 1], [2, 1], np.zeros((2, 2)), mu=(1, 1, 1))
    assert enumerate_p2_optima(flat) == {(0, 0, 1), (0, 1, 0), (1, 0, 0)}
    empty = make_instance([1], [], np.zeros((0, 1)))
    assert enumerate_p2_optima(empty) == {()}


def test_verify_equivalence(a):
    rep = verify_equivalence(a)
    assert rep.equivalent is True and rep.capacity_ok and rep.capacity_consistent
    assert rep.to_dict()["p1_optima"] == [[0, 0, 1]]
    short = verify_equivalence(make_instance([1, 1], [3], [[1, 1]]))
    assert short.p1_feasible is False and short.equivalent is None


def test_p2_best_dominates_p1_best():
    inst = make_instance([3, 1], [2, 2], [[5, 1], [0, 9]], mu=(1, 0.5, 1))
    rep = verify_equivalence(inst)
    assert rep.p2_best >= rep.p1_best


def test_mu2_zero_is_recorded_not_asserted():
    # without the balance term a zero-gain unit is as good placed as not
    inst = make_instance([1], [1], [[0]], mu=(1, 0, 1))
    rep = verify_equivalence(inst)
    assert rep.p1_optima == {(0,)}
    assert rep.p2_optima == {(0,), (-1,)}
    assert rep.equivalent is False


def test_partial_connectivity_rejected(a):
    cut = a.replace(connectivity=np.array([[1, 0], [1, 1]], dtype=np.int8))
    for fn in (verify_equivalence, enumerate_p1_optima, enumerate_p2_optima):
        with pytest.raises(ValueError):
            fn(cut)
