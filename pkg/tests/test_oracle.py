from math import comb

import numpy as np
import pytest

from mpclp.instance import Instance
from mpclp.objective import objective_value
from mpclp.oracle import (
    BudgetExceeded,
    EnumerationBudget,
    box_points,
    count_states,
    enumerate_optimal,
    feasible_points,
)
from mpclp.verify import random_instance


def test_state_count_and_order():
    Y = feasible_points(3, 2)
    assert len(Y) == count_states(3, 2) == comb(3 + 2, 2)
    assert len({tuple(y) for y in Y}) == len(Y)
    assert np.all(Y.sum(axis=1) <= 2)
    assert [tuple(y) for y in Y] == sorted(tuple(y) for y in Y)
    assert len(box_points(2, 3)) == 16


def test_single_location_colocation_pays():
    value, y = enumerate_optimal(Instance([[0.5]], [1.0], 3, 0.0))
    assert value == pytest.approx(0.875) and y.tolist() == [3]


def test_all_zero_and_k1(rng):
    value, y = enumerate_optimal(Instance(np.zeros((3, 2)), [1, 1], 2, 0.5))
    assert value == 0.0 and y.tolist() == [0, 0, 0]
    inst = random_instance(rng, 5, 4, 1, 0.3)
    singles = [objective_value(inst, np.eye(5, dtype=int)[i]) for i in range(5)]
    assert enumerate_optimal(inst)[0] == pytest.approx(max(singles))


def test_ties_go_to_lexicographically_smallest():
    value, y = enumerate_optimal(Instance(np.full((2, 2), 0.5), [1.0, 1.0], 2, 0.0))
    assert value == pytest.approx(1.5) and y.tolist() == [0, 2]


def test_frozen_fixture_optima(data_dir):
    from mpclp.instance import read_instance

    # computed once by enumeration and frozen here
    cases = [
        ("toy4", 2, None, 7.806008789471436, [2, 0, 0, 0]),
        ("toy4", 3, 0.0, 7.987627260691458, [3, 0, 0, 0]),
        ("toy6", 3, 0.5, 16.51024152477474, [0, 1, 1, 0, 0, 1]),
        ("toy6", 3, 1.0, 16.48535750677152, [0, 1, 1, 0, 0, 1]),
    ]
    for name, K, theta, value, y in cases:
        inst = read_instance(f"{data_dir}/{name}.native", "native", K, theta)
        got, gy = enumerate_optimal(inst)
        assert got == pytest.approx(value, abs=1e-12) and gy.tolist() == y


def test_budget_refusal():
    inst = Instance(np.full((11, 1), 0.5), [1.0], 2, 0.0)
    with pytest.raises(BudgetExceeded, match="states"):
        enumerate_optimal(inst)
    with pytest.raises(BudgetExceeded):
        enumerate_optimal(Instance(np.full((3, 1), 0.5), [1.0], 3, 0.0), EnumerationBudget(max_states=10))


def test_permutation_invariance(rng):
    inst = random_instance(rng, 5, 4, 3, 0.4)
    v = enumerate_optimal(inst)[0]
    pl, pc = rng.permutation(5), rng.permutation(4)
    perm = Instance(inst.p[np.ix_(pl, pc)], inst.demand[pc], 3, 0.4)
    assert enumerate_optimal(perm)[0] == pytest.approx(v, abs=1e-12)


def test_monotone_in_k(rng):
    inst = random_instance(rng, 4, 4, 1, 0.6)
    values = [enumerate_optimal(inst.with_params(K=k))[0] for k in range(1, 5)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
