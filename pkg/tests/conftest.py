from __future__ import annotations

import itertools
from fractions import Fraction as F

import pytest

from chorefair.instances import ErInstance, Instance
from chorefair.market import ErEquilibrium

ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, note: str) -> None:
    """Store one verdict for the acceptance summary."""
    ACCEPTANCE.setdefault(criterion, []).append((ok, note))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        ok = all(v for v, _ in parts)
        notes = [note for v, note in parts if not v] or [note for _, note in parts]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  " + " | ".join(notes))


def three_by_four() -> Instance:
    return Instance.from_matrix([[2, 1, 2, 2], [4, 1, 1, 2], [9, 2, 1, 1]])


def three_by_four_equilibrium() -> ErEquilibrium:
    p = [F(4, 3), F(2, 3), F(2, 3), F(2, 3)]
    q = [[1, 0, 0, 0], [0, F(2, 3), F(1, 3), 0], [0, 0, F(1, 3), F(2, 3)]]
    return ErEquilibrium.from_earnings(three_by_four(), p, q)


def cost_from_earnings(p, q) -> Instance:
    """Disutilities making every positive-earning edge MPB with ratio 1."""
    return Instance.from_matrix(
        [[p[j] if q[i][j] > 0 else 10 * p[j] for j in range(len(p))] for i in range(len(q))]
    )


def fixture_eq(p, q) -> tuple[ErEquilibrium, ErInstance]:
    p = [F(v) for v in p]
    q = [[F(v) for v in row] for row in q]
    inst = cost_from_earnings(p, q)
    er = ErInstance.uniform(inst, 1, 1)
    return ErEquilibrium.from_earnings(inst, p, q), er


# rebalance, first case: the root loses a low chore
CASE1_P = ["1", "1/2", "1", "2/5", "3/10", "1/2", "3/10"]
CASE1_Q = [
    ["1/2", "1/10", 0, "2/5", 0, 0, 0],
    [0, "2/5", "3/10", 0, "3/10", 0, 0],
    ["1/2", 0, 0, 0, 0, "1/2", 0],
    [0, 0, "7/10", 0, 0, 0, "3/10"],
]

# rebalance, second case: the root loses a high chore
CASE2_P = ["1", "1", "9/10", "3/10", "1/2", "3/10"]
CASE2_Q = [
    ["1/10", 0, "9/10", 0, 0, 0],
    ["2/5", "3/10", 0, "3/10", 0, 0],
    ["1/2", 0, 0, 0, "1/2", 0],
    [0, "7/10", 0, 0, 0, "3/10"],
]


def grid_instances(n: int, m: int, values):
    """Every n x m matrix over ``values``."""
    for flat in itertools.product(values, repeat=n * m):
        yield Instance.from_matrix([flat[i * m : (i + 1) * m] for i in range(n)])


@pytest.fixture
def three_by_four_inst() -> Instance:
    return three_by_four()
