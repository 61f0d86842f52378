from fractions import Fraction as F

import pytest
from conftest import three_by_four

from chorefair.errors import InfeasibleEarning, IterationCapExceeded
from chorefair.instances import ErInstance, Instance, random_instance
from chorefair.lcp import build_er_lcp, encode_equilibrium, is_good, lemke_solve, solve_er
from chorefair.verify import verify_er


def test_lemke_three_by_four():
    er = ErInstance.uniform(three_by_four(), 1, 1)
    eq, trace = solve_er(er)
    assert eq.p == (F(4, 3), F(2, 3), F(2, 3), F(2, 3))
    assert eq.q[1] == (0, F(2, 3), F(1, 3), 0)
    assert trace.z_start == trace.z_formula == 12
    assert trace.reason == "Solved(z=0)"
    assert trace.pivots[-1][1] == "z"
    js = trace.to_json()
    assert js["z_start"] == "12" and len(js["pivots"]) == len(trace.pivots)


def test_infeasible_earning():
    er = ErInstance(Instance.from_matrix([[1], [1]]), (F(1), F(1)), (F(1),))
    with pytest.raises(InfeasibleEarning):
        solve_er(er)


def test_pivot_budget():
    er = ErInstance.uniform(three_by_four(), 1, 1)
    with pytest.raises(IterationCapExceeded):
        solve_er(er, max_pivots=2)


def test_encode_round_trip_is_good():
    er = ErInstance.uniform(random_instance(3, 6, "uniform", 4), 1, F(1, 2))
    eq, _ = solve_er(er)
    t = build_er_lcp(er)
    assert is_good(t, encode_equilibrium(eq, er, t, F(1)))


@pytest.mark.parametrize("seed", range(12))
def test_lemke_on_four_agents(seed):
    er = ErInstance.uniform(random_instance(4, 4 + seed % 5, "uniform", seed), 1, 1)
    eq, trace = solve_er(er)
    assert verify_er(eq, er) == (True, [])
    t = build_er_lcp(er)
    sol, _ = lemke_solve(t)
    assert is_good(t, sol)
