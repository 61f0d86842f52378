import itertools
from fractions import Fraction as F

import pytest

from chorefair.efx import SwapStep, classify, efx_small, four_efx, matching_payments
from chorefair.errors import PreconditionViolated, TooManyChores
from chorefair.instances import Allocation, ErInstance, Instance, random_instance
from chorefair.lcp import solve_er
from chorefair.verify import efx_factor, is_efx


def test_two_agents_three_chores():
    inst = Instance.from_matrix([[1, 2, 3], [1, 2, 3]])
    assert efx_small(inst).bundles == ((0, 1), (2,))


def test_order_and_guards():
    inst = Instance.from_matrix([[1, 2, 3], [1, 2, 3]])
    assert efx_small(inst, [1, 0]).bundles == ((2,), (0, 1))
    with pytest.raises(PreconditionViolated):
        efx_small(inst, [0, 0])
    with pytest.raises(TooManyChores):
        efx_small(Instance.from_matrix([[1] * 5, [1] * 5]))


def test_efx_small_swaps_happen():
    swaps = 0
    for seed in range(300):
        n = 2 + seed % 3
        inst = random_instance(n, n + 1 + seed % n, "uniform", seed)
        trace = []
        alloc = efx_small(inst, trace=trace)
        assert efx_factor(inst, alloc) == 1
        assert [s.t for s in trace] == list(range(1, len(trace) + 1))
        swaps += len(trace)
    assert swaps > 0


def test_matching_identity():
    mt = matching_payments([0, 1], [0, 1], [[1, 10], [10, 1]])
    assert mt.sigma == {0: 0, 1: 1}
    assert mt.q == {0: 1, 1: 1} and mt.alpha == {0: 1, 1: 1}


def test_matching_subset_labels():
    d = [[F(1)] * 6, [F(3), F(2), F(5), F(9), F(1), F(4)], [F(2), F(8), F(1), F(1), F(6), F(7)]]
    mt = matching_payments([1, 2], [4, 3], d)
    assert mt.sigma == {1: 4, 2: 3}
    assert mt.product(d) == 1


def test_matching_rejects_shapes():
    with pytest.raises(PreconditionViolated):
        matching_payments([0, 1], [0], [[1, 1], [1, 1]])


def test_four_efx_swap_fixture():
    inst = random_instance(2, 5, "bivalued:1:10", 93)
    er = ErInstance.uniform(inst, 1, F(1, 2))
    eq, _ = solve_er(er)
    trace = []
    alloc = four_efx(eq, er, trace)
    assert trace == [SwapStep(1, 1, 0, (0,), F(1))]
    assert alloc.bundles == ((0,), (1, 2, 3, 4))
    assert is_efx(inst, alloc, 4)


def test_four_efx_needs_enough_chores():
    inst = random_instance(3, 5, "uniform", 0)
    er = ErInstance.uniform(inst, 1, 1)
    eq, _ = solve_er(er)
    with pytest.raises(PreconditionViolated):
        four_efx(eq, er)


def test_classify():
    rounded = Allocation.from_bundles([[0, 1], [2], [3]], [1, 1, 1, 1])
    c = classify(rounded, {0, 2}, [[0], [2, 4], []])
    assert (c.n_low, c.n_high1, c.n_high2, c.n_high, c.n_zero) == ((2,), (0,), (1,), (0, 1), (2,))


@pytest.mark.parametrize("seed", [17, 56])
def test_four_agent_swaps(seed):
    model = "bivalued:1:10" if seed == 17 else "uniform"
    m = 9 if seed == 17 else 8
    inst = random_instance(4, m, model, seed)
    er = ErInstance.uniform(inst, 1, F(1, 2))
    eq, _ = solve_er(er)
    trace = []
    assert is_efx(inst, four_efx(eq, er, trace), 4)
    assert trace


def test_efx_small_matches_oracle_on_grid():
    for flat in itertools.product((1, 2, 4), repeat=6):
        inst = Instance.from_matrix([flat[:3], flat[3:]])
        assert is_efx(inst, efx_small(inst))
