"""Rounding earning-restricted equilibria to integral allocations.

One engine serves both roundings: it orients the acyclic payment forest,
gives leaf chores to their parents, hands out low-paying chores in BFS
order, prunes every remaining chore to its best-earning child and finally
matches the leftover high-paying chores inside each tree.  The rebalancing
pass reruns the engine with a few overrides (new roots, late chores and
forced edges) until no tree has an agent below the earning floor.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InvariantViolation, PreconditionViolated
from .instances import Allocation, ErInstance, Instance
from .market import (
    ErEquilibrium,
    bundle_payment,
    forest_components,
    make_acyclic,
    mpb_certificate,
    mpb_graph,
    mpb_ratios,
    payment_minus_k,
)
from .verify import is_efk, verify_er

ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)


@dataclass
class Overrides:
    roots: set[int] = field(default_factory=set)  # agents that must root their tree
    late: set[int] = field(default_factory=set)  # chores offered last to their parent
    forced_child: dict[int, int] = field(default_factory=dict)  # chore -> child that keeps it
    forced_owner: dict[int, int] = field(default_factory=dict)  # low chore -> its receiver


@dataclass
class Phase3Tree:
    agents: list[int]
    chores: list[int]
    top: int  # agent nearest the root of the oriented forest
    h: int  # agent left without a matched chore


@dataclass
class RoundingState:
    """Everything the engine decided, kept for assertions and rebalancing."""

    bundles: list[list[int]]
    p: tuple[Fraction, ...]
    low: set[int]
    high: set[int]
    parent_of_chore: dict[int, int]
    parent_chore: dict[int, int | None]
    children_of_chore: dict[int, list[int]]
    earning: tuple[tuple[Fraction, ...], ...]
    phase1_trees: list[list[int]]
    phase3_trees: list[Phase3Tree]
    snapshots: list[list[list[int]]]

    def owner(self, j: int) -> int:
        for i, b in enumerate(self.bundles):
            if j in b:
                return i
        raise KeyError(j)

    def allocation(self) -> Allocation:
        return Allocation.from_bundles(self.bundles, self.p)


def _best_child(children: list[int], j: int, q, forced: int | None) -> int:
    if forced is not None and forced in children:
        return forced
    return max(children, key=lambda i: (q[i][j], -i))


def run_engine(eq: ErEquilibrium, split: Fraction, ov: Overrides | None = None) -> RoundingState:
    """Round ``eq`` (already acyclic or not) with L = {p <= split}."""
    ov = ov or Overrides()
    z = make_acyclic(eq)
    n, m, p, q = z.n, z.m, z.p, z.q
    low = {j for j in range(m) if p[j] <= split}
    high = set(range(m)) - low
    edges = z.support()
    adj_agent: list[list[int]] = [[] for _ in range(n)]
    adj_chore: list[list[int]] = [[] for _ in range(m)]
    for i, j in edges:
        adj_agent[i].append(j)
        adj_chore[j].append(i)

    # orient each tree from its root agent
    parent_of_chore: dict[int, int] = {}
    parent_chore: dict[int, int | None] = {}
    children_of_chore: dict[int, list[int]] = {}
    children_of_agent: dict[int, list[int]] = {}
    bfs_orders: list[list[int]] = []
    for agents, _ in forest_components(n, m, edges):
        forced = [a for a in agents if a in ov.roots]
        root = forced[0] if forced else agents[0]
        parent_chore[root] = None
        order = []
        queue = deque([root])
        while queue:
            i = queue.popleft()
            order.append(i)
            kids = sorted(j for j in adj_agent[i] if j != parent_chore[i])
            children_of_agent[i] = kids
            for j in kids:
                parent_of_chore[j] = i
                children_of_chore[j] = sorted(a for a in adj_chore[j] if a != i)
                for a in children_of_chore[j]:
                    parent_chore[a] = j
                    queue.append(a)
        bfs_orders.append(order)

    bundles: list[list[int]] = [[] for _ in range(n)]
    alive = set(range(m))

    def give(i: int, j: int) -> None:
        bundles[i].append(j)
        alive.discard(j)

    def pay(i: int) -> Fraction:
        return bundle_payment(bundles[i], p)

    # phase 1: leaf chores
    for j in range(m):
        if not children_of_chore.get(j):
            give(parent_of_chore[j], j)
    snapshots = [[list(b) for b in bundles]]

    # phase 2: low-paying chores in BFS order
    for order in bfs_orders:
        for i in order:
            kids = [j for j in children_of_agent[i] if j in alive]
            if pay(i) > 1:
                for j in kids:
                    if j in high:
                        give(_best_child(children_of_chore[j], j, q, ov.forced_child.get(j)), j)
            lows = [j for j in kids if j in low and j in alive]
            lows.sort(key=lambda j: (j in ov.late, j))
            candidates = [j for j in lows if j not in ov.forced_owner]
            progress = True
            while progress:
                progress = False
                for j in candidates:
                    if j in alive and pay(i) + p[j] <= 1:
                        give(i, j)
                        progress = True
                        break
            for j in lows:
                if j in alive and ov.forced_owner.get(j) == i:
                    give(i, j)
            for j in lows:
                if j in alive:
                    target = ov.forced_owner.get(j)
                    if target not in children_of_chore[j]:
                        target = children_of_chore[j][0]
                    give(target, j)
    snapshots.append([list(b) for b in bundles])

    # phase 3: keep the parent edge and the best child edge of every remaining chore
    kept: dict[int, tuple[int, int]] = {}
    for j in sorted(alive):
        child = _best_child(children_of_chore[j], j, q, ov.forced_child.get(j))
        kept[j] = (parent_of_chore[j], child)
    snapshots.append([list(b) for b in bundles])

    # phase 4: match each tree's chores to all agents but its top earner
    tree_edges = [(a, j) for j, pair in kept.items() for a in pair]
    trees: list[Phase3Tree] = []
    for agents, chores in forest_components(n, m, tree_edges):
        top = next(a for a in agents if parent_chore.get(a) not in chores)
        h = max(agents, key=lambda a: (pay(a), -a))
        queue = deque([h])
        seen = {h}
        while queue:
            a = queue.popleft()
            for j in chores:
                if a in kept[j]:
                    other = kept[j][0] if kept[j][1] == a else kept[j][1]
                    if other not in seen:
                        seen.add(other)
                        give(other, j)
                        queue.append(other)
        trees.append(Phase3Tree(agents, chores, top, h))
    snapshots.append([list(b) for b in bundles])

    if alive:
        raise InvariantViolation(f"chores left unassigned: {sorted(alive)}")
    for i, b in enumerate(bundles):
        for j in b:
            if q[i][j] <= 0:
                raise InvariantViolation(f"chore {j} rounded to agent {i} outside the support")
    return RoundingState(
        [sorted(b) for b in bundles],
        p,
        low,
        high,
        parent_of_chore,
        parent_chore,
        children_of_chore,
        q,
        bfs_orders,
        trees,
        snapshots,
    )


def _uniform(values, target: Fraction) -> bool:
    return all(v == target for v in values)


def _check_input(eq: ErEquilibrium, er: ErInstance, c: Fraction, min_m: int) -> None:
    if not _uniform(er.e, ONE) or not _uniform(er.c, c):
        raise PreconditionViolated(f"needs e = 1 and c = {c} for every agent and chore")
    if er.m < min_m:
        raise PreconditionViolated(f"needs m >= {min_m}, got m = {er.m}")
    ok, problems = verify_er(eq, er)
    if not ok:
        raise PreconditionViolated("input is not an equilibrium: " + "; ".join(problems))


def _assert_mpb(alloc: Allocation, inst: Instance) -> None:
    if not mpb_certificate(alloc, alloc.payments, inst):  # type: ignore[arg-type]
        raise InvariantViolation("rounded allocation lost the MPB certificate")


def round_er_half(eq: ErEquilibrium, er: ErInstance) -> Allocation:
    """Round an equilibrium with e = 1 and c = 1/2 (needs m >= 2n)."""
    _check_input(eq, er, HALF, 2 * er.n)
    state = run_engine(eq, HALF)
    alloc = state.allocation()
    _assert_mpb(alloc, er.base)
    p = state.p
    for i, b in enumerate(alloc.bundles):
        if bundle_payment(b, p) < HALF:
            raise InvariantViolation(f"agent {i} earns {bundle_payment(b, p)} < 1/2")
        n_high = sum(1 for j in b if j in state.high)
        if not (payment_minus_k(b, p, 1) <= 1 or (n_high == 2 and payment_minus_k(b, p, 2) <= HALF)):
            raise InvariantViolation(f"agent {i} breaks the earning upper bound")
    return alloc


def round_er_one(eq: ErEquilibrium, er: ErInstance) -> Allocation:
    """Round an equilibrium with e = 1 and c = 1 (needs m >= n), splitting L/H at 1/2."""
    _check_input(eq, er, ONE, er.n)
    alloc = run_engine(eq, HALF).allocation()
    _check_one(alloc, er, floor=None)
    return alloc


def _check_one(alloc: Allocation, er: ErInstance, floor: Fraction | None) -> None:
    _assert_mpb(alloc, er.base)
    n, p = er.n, alloc.payments
    assert p is not None
    if floor is None and n > 1:
        floor = Fraction(1, 2 * (n - 1))
    for i, b in enumerate(alloc.bundles):
        if payment_minus_k(b, p, 1) > 1:
            raise InvariantViolation(f"agent {i} has p_-1 = {payment_minus_k(b, p, 1)} > 1")
        if floor is not None and bundle_payment(b, p) < floor:
            raise InvariantViolation(f"agent {i} earns {bundle_payment(b, p)} < {floor}")


# rebalancing


@dataclass(frozen=True)
class RebalanceStep:
    case: int
    root: int  # i1, root of the problematic tree
    chore: int  # j1, the parent chore it lost
    s1: Fraction  # earning of i1 from j1
    s2: Fraction  # earning of the agent that kept j1


def _problematic(state: RoundingState, n: int) -> list[Phase3Tree]:
    floor = Fraction(1, n - 1)
    out = []
    for t in state.phase3_trees:
        if len(t.agents) == n:
            continue  # a tree with every agent is 2-EF1 whatever the floor
        if any(bundle_payment(state.bundles[a], state.p) < floor for a in t.agents):
            out.append(t)
    return out


def rebalance_ef1(
    alloc: Allocation, eq: ErEquilibrium, er: ErInstance, trace: list[RebalanceStep] | None = None
) -> Allocation:
    """Repair a round_er_one output until it is (n-1)-EF1."""
    n = er.n
    if n == 1:
        return alloc
    if n == 2:
        return _rebalance_two(alloc, eq, er)
    floor = Fraction(1, n - 1)
    p = alloc.payments
    assert p is not None
    if all(bundle_payment(b, p) >= floor for b in alloc.bundles):
        return alloc
    ov = Overrides()
    steps = trace if trace is not None else []
    for _ in range(n + 2):
        state = run_engine(eq, HALF, ov)
        bad = _problematic(state, n)
        if not bad:
            out = state.allocation()
            _check_one(out, er, floor=None)
            if not is_efk(er.base, out, 1, n - 1):
                raise InvariantViolation("rebalanced allocation is not (n-1)-EF1")
            return out
        tree = min(bad, key=lambda t: t.top)
        i1 = tree.top
        j1 = state.parent_chore.get(i1)
        if j1 is None or j1 in state.bundles[i1]:
            raise InvariantViolation(f"problematic tree at agent {i1} did not lose its parent chore")
        keeper = state.owner(j1)
        s1, s2 = state.earning[i1][j1], state.earning[keeper][j1]
        if j1 in state.low:
            if j1 in ov.late:
                # second visit: both halves are short, so j1 goes to the larger earner
                pair = [i1, keeper]
                ov.forced_owner[j1] = max(pair, key=lambda a: (state.earning[a][j1], -a))
                steps.append(RebalanceStep(1, i1, j1, s1, s2))
                continue
            ov.roots = {r for r in ov.roots if not _same_tree(state, r, i1)} | {i1}
            ov.late.add(j1)
            steps.append(RebalanceStep(1, i1, j1, s1, s2))
        else:
            ov.forced_child[j1] = i1
            steps.append(RebalanceStep(2, i1, j1, s1, s2))
    raise InvariantViolation(f"rebalancing did not settle after {n + 2} rounds")


def _same_tree(state: RoundingState, a: int, b: int) -> bool:
    return any(a in order and b in order for order in state.phase1_trees)


def _rebalance_two(alloc: Allocation, eq: ErEquilibrium, er: ErInstance) -> Allocation:
    inst = er.base
    if is_efk(inst, alloc, 1):
        return alloc
    z = make_acyclic(eq)
    shared = [j for j in range(z.m) if z.q[0][j] > 0 and z.q[1][j] > 0]
    if not shared:
        raise InvariantViolation("two-agent rounding is not EF1 yet no chore is shared")
    j1 = shared[0]
    base = [[j for j in range(z.m) if z.q[i][j] > 0 and j != j1 and (i == 0 or z.q[0][j] == 0)] for i in range(2)]
    first = max((0, 1), key=lambda a: (z.q[a][j1], -a))
    for a in (first, 1 - first):
        bundles = [list(b) for b in base]
        bundles[a].append(j1)
        out = Allocation.from_bundles(bundles, z.p)
        if is_efk(inst, out, 1):
            _assert_mpb(out, inst)
            return out
    raise InvariantViolation("neither rounding of the shared chore is EF1")


# balanced allocations


def balanced_po(inst: Instance, trace: list[str] | None = None) -> Allocation:
    """Balanced allocation with MPB payments, starting from agent 0 owning everything."""
    n, m = inst.n, inst.m
    h = 0
    bundles: list[list[int]] = [list(range(m))] + [[] for _ in range(n - 1)]
    p = list(inst.d[h])
    budget = m * n + m
    steps = 0
    while True:
        ell = min(range(n), key=lambda i: (len(bundles[i]), i))
        if len(bundles[h]) <= len(bundles[ell]) + 1:
            break
        steps += 1
        if steps > budget:
            raise InvariantViolation(f"balanced_po exceeded {budget} iterations")
        agent_out, chore_out = mpb_graph(inst, bundles, p)
        prev: dict[tuple[str, int], tuple[str, int] | None] = {("a", h): None}
        queue = deque([("a", h)])
        while queue:
            node = queue.popleft()
            kind, v = node
            nxt = [("c", j) for j in agent_out[v]] if kind == "a" else [("a", i) for i in chore_out[v]]
            for w in nxt:
                if w not in prev:
                    prev[w] = node
                    queue.append(w)
        if ("a", ell) in prev:
            path = [("a", ell)]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])  # type: ignore[arg-type]
            path.reverse()
            for r in range(1, len(path), 2):
                giver, chore, taker = path[r - 1][1], path[r][1], path[r + 1][1]
                bundles[giver].remove(chore)
                bundles[taker].append(chore)
            if trace is not None:
                trace.append(f"transfer {[v for _, v in path]}")
            continue
        reach_agents = {v for kind, v in prev if kind == "a"}
        reach_chores = [v for kind, v in prev if kind == "c"]
        alpha = mpb_ratios(inst, p)
        gamma = min(
            inst.d[i][j] / p[j] / alpha[i] for i in range(n) if i not in reach_agents for j in reach_chores
        )
        for j in reach_chores:
            p[j] *= gamma
        if trace is not None:
            trace.append(f"raise {gamma}")
    out = Allocation.from_bundles(bundles, p)
    _assert_mpb(out, inst)
    sizes = [len(b) for b in out.bundles]
    if m and max(sizes) - min(sizes) > 1:
        raise InvariantViolation("balanced_po output is not balanced")
    return out
