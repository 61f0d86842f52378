from fractions import Fraction as F

import pytest
from conftest import CASE1_P, CASE1_Q, CASE2_P, CASE2_Q, three_by_four, fixture_eq

from chorefair.errors import PreconditionViolated
from chorefair.instances import ErInstance, Instance, random_instance
from chorefair.lcp import solve_er
from chorefair.market import bundle_payment, mpb_certificate
from chorefair.rounding import HALF, RebalanceStep, balanced_po, rebalance_ef1, round_er_half, round_er_one, run_engine
from chorefair.verify import is_efk


def _earnings(alloc):
    return tuple(bundle_payment(b, alloc.payments) for b in alloc.bundles)


def test_case_one_fixture():
    eq, er = fixture_eq(CASE1_P, CASE1_Q)
    first = round_er_one(eq, er)
    assert first.bundles == ((1, 3), (4,), (0, 5), (2, 6))
    assert _earnings(first) == (F(9, 10), F(3, 10), F(3, 2), F(13, 10))
    steps = []
    out = rebalance_ef1(first, eq, er, steps)
    assert out.bundles == ((0, 3), (1, 4), (5,), (2, 6))
    assert _earnings(out) == (F(7, 5), F(4, 5), F(1, 2), F(13, 10))
    assert steps == [RebalanceStep(1, 1, 1, F(2, 5), F(1, 10))]
    assert is_efk(er.base, out, 1, 3)


def test_case_two_fixture():
    eq, er = fixture_eq(CASE2_P, CASE2_Q)
    first = round_er_one(eq, er)
    assert first.bundles == ((2,), (3,), (0, 4), (1, 5))
    steps = []
    out = rebalance_ef1(first, eq, er, steps)
    assert out.bundles == ((2,), (0, 3), (4,), (1, 5))
    assert _earnings(out) == (F(9, 10), F(13, 10), F(1, 2), F(13, 10))
    assert steps == [RebalanceStep(2, 1, 0, F(2, 5), F(1, 2))]
    assert is_efk(er.base, out, 1)
    assert mpb_certificate(out, out.payments, er.base)


def test_engine_records_phases():
    eq, _ = fixture_eq(CASE1_P, CASE1_Q)
    state = run_engine(eq, HALF)
    assert state.low and state.high
    assert state.snapshots and state.phase3_trees


def test_preconditions():
    inst = random_instance(2, 3, "uniform", 1)
    er_one = ErInstance.uniform(inst, 1, 1)
    eq, _ = solve_er(er_one)
    with pytest.raises(PreconditionViolated):
        round_er_half(eq, er_one)  # wrong cap
    er_half = ErInstance.uniform(inst, 1, HALF)
    with pytest.raises(PreconditionViolated):
        round_er_half(eq, er_half)  # too few chores and not an equilibrium for these caps


def test_round_three_by_four():
    er = ErInstance.uniform(three_by_four(), 1, 1)
    eq, _ = solve_er(er)
    alloc = round_er_one(eq, er)
    assert is_efk(er.base, alloc, 1, 2)
    assert mpb_certificate(alloc, alloc.payments, er.base)


def test_two_agent_rebalance():
    for seed in range(40):
        inst = random_instance(2, 3 + seed % 4, "uniform", seed)
        er = ErInstance.uniform(inst, 1, 1)
        eq, _ = solve_er(er)
        out = rebalance_ef1(round_er_one(eq, er), eq, er)
        assert is_efk(inst, out, 1)


def test_balanced_po_shapes():
    inst = Instance.from_matrix([[1, 1, 1, 1], [2, 2, 2, 2]])
    trace = []
    out = balanced_po(inst, trace)
    assert sorted(len(b) for b in out.bundles) == [2, 2]
    assert mpb_certificate(out, out.payments, inst)
    assert trace
    assert balanced_po(Instance.from_matrix([[], []])).bundles == ((), ())


@pytest.mark.parametrize("seed,m", [(46, 8), (92, 7), (100, 5)])
def test_full_agent_tree_below_floor(seed, m):
    """A tree holding every agent is left alone: 2-EF1 holds even below the floor."""
    inst = random_instance(3, m, "uniform", seed)
    er = ErInstance.uniform(inst, 1, 1)
    eq, _ = solve_er(er)
    first = round_er_one(eq, er)
    state = run_engine(eq, HALF)
    assert any(len(t.agents) == 3 for t in state.phase3_trees)
    out = rebalance_ef1(first, eq, er)
    assert min(_earnings(out)) < F(1, 2)
    assert is_efk(inst, out, 1, 2)
