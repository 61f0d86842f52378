"""Fairness and efficiency checkers plus exhaustive oracles.

The checkers evaluate the definitions directly with exact rationals.  The
oracles enumerate every integral allocation and are only meant for tiny
instances; their budget is controlled by ``cap`` (default 10**7 allocations).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import IncompleteFractional, MissingPayments, TooLarge
from .instances import Allocation, ErInstance, Instance
from .market import ErEquilibrium, bundle_payment, mpb_ratios

ZERO = Fraction(0)
INF = float("inf")
DEFAULT_CAP = 10**7

CRITERIA = ("EFk", "EFX", "pEFk", "pEFX")


@dataclass(frozen=True)
class FairnessQuery:
    criterion: str
    inst: Instance
    alloc: Allocation
    alpha: Fraction = Fraction(1)
    k: int = 1
    payments: tuple[Fraction, ...] | None = None

    def __post_init__(self) -> None:
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if self.alpha < 1 or self.k < 0:
            raise ValueError("need alpha >= 1 and k >= 0")


@dataclass(frozen=True)
class Witness:
    agent: int
    target: int
    removed: tuple[int, ...]
    lhs: Fraction
    rhs: Fraction


@dataclass(frozen=True)
class Verdict:
    ok: bool
    witness: Witness | None = None

    def __bool__(self) -> bool:
        return self.ok


def _removal(values: dict[int, Fraction], criterion: str, k: int) -> tuple[int, ...]:
    """Chores to drop from a bundle: the k largest, or the single smallest for X variants."""
    order = sorted(values, key=lambda j: (values[j], j))
    if criterion.endswith("X"):
        return tuple(order[:1])
    return tuple(order[::-1][:k]) if k > 0 else ()


def _views(q: FairnessQuery) -> list[tuple[int, int, tuple[int, ...], Fraction, Fraction]]:
    """All (i, h, removed, lhs, base) with the test lhs <= alpha * base."""
    inst, alloc = q.inst, q.alloc
    use_pay = q.criterion.startswith("p")
    pay = q.payments if q.payments is not None else alloc.payments
    if use_pay and pay is None:
        raise MissingPayments(f"{q.criterion} needs payments")
    out = []
    for i, bundle in enumerate(alloc.bundles):
        if q.criterion.endswith("X") and not bundle:
            continue
        if use_pay:
            vals = {j: pay[j] for j in bundle}  # type: ignore[index]
        else:
            vals = {j: inst.d[i][j] for j in bundle}
        removed = _removal(vals, q.criterion, q.k)
        lhs = sum((v for j, v in vals.items() if j not in removed), ZERO)
        for h, other in enumerate(alloc.bundles):
            if h == i:
                continue
            base = bundle_payment(other, pay) if use_pay else inst.cost(i, other)  # type: ignore[arg-type]
            out.append((i, h, removed, lhs, base))
    return out


def check_fairness(q: FairnessQuery) -> Verdict:
    for i, h, removed, lhs, base in _views(q):
        if lhs > q.alpha * base:
            return Verdict(False, Witness(i, h, removed, lhs, q.alpha * base))
    return Verdict(True)


def agent_passes(q: FairnessQuery, i: int) -> bool:
    """Whether agent i alone meets the criterion towards every other bundle."""
    return all(lhs <= q.alpha * base for a, _, _, lhs, base in _views(q) if a == i)


def is_two_ef2(inst: Instance, alloc: Allocation) -> bool:
    """Every agent is 2-EF1 or EF2 towards all others (its choice)."""
    q21 = FairnessQuery("EFk", inst, alloc, Fraction(2), 1)
    q12 = FairnessQuery("EFk", inst, alloc, Fraction(1), 2)
    return all(agent_passes(q21, i) or agent_passes(q12, i) for i in range(inst.n))


def is_efx(inst: Instance, alloc: Allocation, alpha: Fraction | int = 1) -> bool:
    return check_fairness(FairnessQuery("EFX", inst, alloc, Fraction(alpha))).ok


def is_efk(inst: Instance, alloc: Allocation, k: int, alpha: Fraction | int = 1) -> bool:
    return check_fairness(FairnessQuery("EFk", inst, alloc, Fraction(alpha), k)).ok


def agent_is_efx(inst: Instance, bundles: Sequence[Sequence[int]], i: int, alpha: Fraction | int = 1) -> bool:
    """Whether agent i alone is alpha-EFX towards everyone."""
    return not efx_envied(inst, bundles, i, alpha)


def efx_envied(inst: Instance, bundles: Sequence[Sequence[int]], i: int, alpha: Fraction | int = 1) -> list[int]:
    """Agents that i alpha-EFX-envies, in index order."""
    mine = bundles[i]
    if not mine:
        return []
    row = inst.d[i]
    lhs = sum((row[j] for j in mine), ZERO) - min(row[j] for j in mine)
    return [h for h, b in enumerate(bundles) if h != i and lhs > alpha * inst.cost(i, b)]


def factor(q: FairnessQuery) -> Fraction | float:
    """Smallest alpha >= 1 for which the allocation passes the criterion."""
    best: Fraction | float = Fraction(1)
    for _, _, _, lhs, base in _views(q):
        if lhs <= 0:
            continue
        if base == 0:
            return INF
        best = max(best, lhs / base)
    return best


def efx_factor(inst: Instance, alloc: Allocation) -> Fraction | float:
    return factor(FairnessQuery("EFX", inst, alloc))


def efk_factor(inst: Instance, alloc: Allocation, k: int) -> Fraction | float:
    return factor(FairnessQuery("EFk", inst, alloc, Fraction(1), k))


# oracles


def _all_allocations(inst: Instance, cap: int):
    if inst.n**inst.m > cap:
        raise TooLarge(f"{inst.n}^{inst.m} allocations exceed the cap {cap}")
    for owner in itertools.product(range(inst.n), repeat=inst.m):
        yield owner, Allocation.from_owner(owner, inst.n)


def minimal_alpha_oracle(inst: Instance, criterion: str = "EFX", cap: int = DEFAULT_CAP) -> tuple[Fraction | float, Allocation]:
    """Minimum achievable factor over all integral allocations (EFX, EF1 or EF2)."""
    if criterion == "EFX":
        make = lambda a: FairnessQuery("EFX", inst, a)  # noqa: E731
    elif criterion in ("EF1", "EF2"):
        k = int(criterion[2])
        make = lambda a: FairnessQuery("EFk", inst, a, Fraction(1), k)  # noqa: E731
    else:
        raise ValueError(f"unsupported criterion {criterion!r}")
    best: tuple[Fraction | float, Allocation] | None = None
    for _, alloc in _all_allocations(inst, cap):
        f = factor(make(alloc))
        if best is None or f < best[0]:
            best = (f, alloc)
            if f == 1:
                break
    assert best is not None
    return best


def _costs(inst: Instance, alloc: Allocation) -> list[Fraction]:
    return [inst.cost(i, b) for i, b in enumerate(alloc.bundles)]


def dominates(a: Sequence[Fraction], b: Sequence[Fraction]) -> bool:
    """Cost vector a Pareto-dominates b."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def po_bruteforce(inst: Instance, alloc: Allocation, cap: int = DEFAULT_CAP) -> tuple[bool, Allocation | None]:
    """Integral Pareto optimality: (True, None) or (False, dominating allocation)."""
    base = _costs(inst, alloc)
    for _, other in _all_allocations(inst, cap):
        if dominates(_costs(inst, other), base):
            return False, other
    return True, None


def fractional_domination(inst: Instance, alloc: Allocation, frac: Sequence[Sequence[Fraction]]) -> bool:
    """Whether the complete fractional allocation frac Pareto-dominates alloc."""
    for j in range(inst.m):
        if sum((Fraction(frac[i][j]) for i in range(inst.n)), ZERO) != 1:
            raise IncompleteFractional(f"chore {j} is not fully allocated")
    frac_cost = [sum((inst.d[i][j] * Fraction(frac[i][j]) for j in range(inst.m)), ZERO) for i in range(inst.n)]
    return dominates(frac_cost, _costs(inst, alloc))


# equilibria


def verify_er(eq: ErEquilibrium, er: ErInstance) -> tuple[bool, list[str]]:
    """Check every earning-restricted equilibrium clause; return (ok, violations)."""
    inst = er.base
    n, m = inst.n, inst.m
    problems: list[str] = []
    if eq.n != n or eq.m != m or len(eq.x) != n or any(len(r) != m for r in eq.x) or any(len(r) != m for r in eq.q):
        return False, ["shape: equilibrium dimensions do not match the instance"]
    for j in range(m):
        if eq.p[j] <= 0:
            problems.append(f"payment: p[{j}] = {eq.p[j]} is not positive")
    if problems:
        return False, problems
    alpha = mpb_ratios(inst, eq.p)
    for i in range(n):
        for j in range(m):
            x_ij, q_ij = eq.x[i][j], eq.q[i][j]
            if x_ij < 0 or x_ij > 1:
                problems.append(f"range: x[{i}][{j}] = {x_ij} outside [0, 1]")
            if q_ij != eq.p[j] * x_ij:
                problems.append(f"earning: q[{i}][{j}] = {q_ij} differs from p*x = {eq.p[j] * x_ij}")
            if x_ij > 0 and inst.d[i][j] / eq.p[j] != alpha[i]:
                problems.append(f"mpb: agent {i} holds chore {j} with ratio {inst.d[i][j] / eq.p[j]} > {alpha[i]}")
    for i in range(n):
        total = sum(eq.q[i], ZERO)
        if total != er.e[i]:
            problems.append(f"agent: agent {i} earns {total}, needs {er.e[i]}")
    for j in range(m):
        total = sum((eq.q[i][j] for i in range(n)), ZERO)
        want = min(eq.p[j], er.c[j])
        if total != want:
            problems.append(f"chore: chore {j} pays out {total}, expected min(p, c) = {want}")
    return not problems, problems
