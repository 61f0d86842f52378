import itertools
from fractions import Fraction as F

import pytest
from conftest import three_by_four

from chorefair.enumeration import enumerate_consumption_graphs, find_er_equilibrium_enum
from chorefair.errors import TooManyAgents
from chorefair.instances import ErInstance, random_instance
from chorefair.verify import verify_er


def _brute_forest_count(n: int, m: int) -> int:
    """Bipartite forests with every chore covered, by checking every edge subset."""
    edges = [(i, j) for i in range(n) for j in range(m)]
    count = 0
    for mask in range(1 << len(edges)):
        chosen = [e for k, e in enumerate(edges) if mask >> k & 1]
        if any(all(e[1] != j for e in chosen) for j in range(m)):
            continue
        parent = list(range(n + m))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        for i, j in chosen:
            a, b = find(i), find(n + j)
            if a == b:
                ok = False
                break
            parent[a] = b
        count += ok
    return count


@pytest.mark.parametrize("n,m,expected", [(2, 1, 3), (1, 2, 1), (2, 2, 8)])
def test_graph_counts(n, m, expected):
    graphs = list(enumerate_consumption_graphs(n, m))
    assert len(graphs) == expected == _brute_forest_count(n, m)
    assert len(set(graphs)) == len(graphs)


@pytest.mark.parametrize("n,m", [(2, 3), (3, 2), (3, 3)])
def test_graph_counts_match_brute_force(n, m):
    assert sum(1 for _ in enumerate_consumption_graphs(n, m)) == _brute_forest_count(n, m)


def test_first_equilibrium_three_by_four():
    er = ErInstance.uniform(three_by_four(), 1, 1)
    eq = find_er_equilibrium_enum(er)
    assert eq.p == (2, F(1, 2), F(1, 2), 1)
    assert [sum(1 for v in row if v > 0) for row in eq.q] == [1, 2, 1]
    assert verify_er(eq, er)[0]


def test_agent_guard():
    er = ErInstance.uniform(random_instance(5, 5, "uniform", 0), 1, 1)
    with pytest.raises(TooManyAgents):
        find_er_equilibrium_enum(er)


@pytest.mark.parametrize("seed", range(20))
def test_enum_with_mixed_caps(seed):
    inst = random_instance(2 + seed % 2, 3 + seed % 3, "uniform", seed)
    caps = tuple(F(1 + (seed + j) % 3, 2) for j in range(inst.m))
    er = ErInstance(inst, (F(1),) * inst.n, caps)
    if not er.feasible:
        pytest.skip("infeasible draw")
    assert verify_er(find_er_equilibrium_enum(er), er) == (True, [])
