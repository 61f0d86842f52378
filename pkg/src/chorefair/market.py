"""Equilibria, payment graphs, cycle cancellation and MPB certificates."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import NotAnEquilibrium
from .instances import Allocation, ErInstance, Instance, Matrix

ZERO = Fraction(0)


@dataclass(frozen=True)
class ErEquilibrium:
    """Fractional allocation x, payments p, earnings q and MPB ratios alpha."""

    x: Matrix
    p: tuple[Fraction, ...]
    q: Matrix
    alpha: tuple[Fraction, ...]

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def m(self) -> int:
        return len(self.p)

    @classmethod
    def from_earnings(cls, inst: Instance, p: Sequence[Fraction], q: Sequence[Sequence[Fraction]]) -> "ErEquilibrium":
        p = tuple(Fraction(v) for v in p)
        q = tuple(tuple(Fraction(v) for v in row) for row in q)
        x = tuple(tuple(q_ij / p_j for q_ij, p_j in zip(row, p)) for row in q)
        return cls(x, p, q, mpb_ratios(inst, p))

    def support(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(self.m) if self.q[i][j] > 0]

    def is_integral(self) -> bool:
        return all(sum(1 for i in range(self.n) if self.q[i][j] > 0) <= 1 for j in range(self.m))


def mpb_ratios(inst: Instance, p: Sequence[Fraction]) -> tuple[Fraction, ...]:
    if inst.m == 0:
        return tuple(Fraction(1) for _ in range(inst.n))
    return tuple(min(d_ij / p_j for d_ij, p_j in zip(row, p)) for row in inst.d)


def mpb_sets(inst: Instance, p: Sequence[Fraction]) -> list[set[int]]:
    alpha = mpb_ratios(inst, p)
    return [{j for j in range(inst.m) if inst.d[i][j] / p[j] == alpha[i]} for i in range(inst.n)]


def mpb_certificate(alloc: Allocation | Sequence[Sequence[Fraction]], p: Sequence[Fraction], inst: Instance) -> bool:
    """True iff every assigned (agent, chore) pair is minimum pain-per-buck."""
    if any(v <= 0 for v in p):
        return False
    alpha = mpb_ratios(inst, p)
    if isinstance(alloc, Allocation):
        pairs: Iterable[tuple[int, int]] = ((i, j) for i, b in enumerate(alloc.bundles) for j in b)
    else:
        pairs = ((i, j) for i, row in enumerate(alloc) for j, v in enumerate(row) if v > 0)
    return all(inst.d[i][j] / p[j] == alpha[i] for i, j in pairs)


# earning views


def bundle_payment(bundle: Iterable[int], p: Sequence[Fraction]) -> Fraction:
    return sum((p[j] for j in bundle), ZERO)


def payment_minus_k(bundle: Iterable[int], p: Sequence[Fraction], k: int) -> Fraction:
    """Payment after dropping the k highest-paying chores."""
    vals = sorted((p[j] for j in bundle), reverse=True)
    return sum(vals[k:], ZERO)


def payment_minus_x(bundle: Iterable[int], p: Sequence[Fraction]) -> Fraction:
    """Payment after dropping the single lowest-paying chore."""
    vals = sorted(p[j] for j in bundle)
    return sum(vals[1:], ZERO)


@dataclass(frozen=True)
class EarningView:
    total: Fraction
    minus_k: Fraction
    minus_x: Fraction


def earning_views(alloc: Allocation, p: Sequence[Fraction] | None = None, k: int = 1) -> list[EarningView]:
    pay = alloc.payments if p is None else p
    if pay is None:
        raise ValueError("payments required")
    return [
        EarningView(bundle_payment(b, pay), payment_minus_k(b, pay, k), payment_minus_x(b, pay))
        for b in alloc.bundles
    ]


# payment graph


def _find_cycle(n: int, edges: list[tuple[int, int]]) -> list[tuple[int, int]] | None:
    """Return the edges of some cycle in the bipartite graph, or None for a forest.

    Nodes 0..n-1 are agents, n+j is chore j.  Edges are scanned in the given
    order; the first edge closing a cycle determines the cycle returned.
    """
    adj: dict[int, list[int]] = {}
    parent: dict[int, int] = {}

    def root(v: int) -> int:
        while parent.setdefault(v, v) != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i, j in edges:
        a, c = i, n + j
        ra, rc = root(a), root(c)
        if ra != rc:
            parent[ra] = rc
            adj.setdefault(a, []).append(c)
            adj.setdefault(c, []).append(a)
            continue
        # a and c already connected: BFS for the tree path c -> a
        prev = {c: c}
        queue = deque([c])
        while queue:
            v = queue.popleft()
            if v == a:
                break
            for w in adj.get(v, []):
                if w not in prev:
                    prev[w] = v
                    queue.append(w)
        path = [a]
        while path[-1] != c:
            path.append(prev[path[-1]])
        cycle = [(i, j)]
        for u, v in zip(path, path[1:]):
            ag, ch = (u, v - n) if u < n else (v, u - n)
            cycle.append((ag, ch))
        return cycle
    return None


def make_acyclic(eq: ErEquilibrium, er: ErInstance | None = None) -> ErEquilibrium:
    """Cancel cycles of the payment graph until it is a forest.

    Each round shifts the smallest earning of the cycle around it, which
    deletes that edge while leaving every agent and chore total unchanged.
    """
    if er is not None:
        from .verify import verify_er

        ok, problems = verify_er(eq, er)
        if not ok:
            raise NotAnEquilibrium("; ".join(problems))
    n, m = eq.n, eq.m
    q = [list(row) for row in eq.q]
    while True:
        edges = [(i, j) for i in range(n) for j in range(m) if q[i][j] > 0]
        cycle = _find_cycle(n, edges)
        if cycle is None:
            break
        # cycle[0] = (i, j) closes the path; walk it so consecutive edges share a vertex
        ordered = _orient_cycle(cycle)
        k = min(range(len(ordered)), key=lambda t: (q[ordered[t][0]][ordered[t][1]], ordered[t]))
        delta = q[ordered[k][0]][ordered[k][1]]
        for t, (i, j) in enumerate(ordered):
            if (t - k) % 2 == 0:
                q[i][j] -= delta
            else:
                q[i][j] += delta
        q[ordered[k][0]][ordered[k][1]] = ZERO
    x = tuple(tuple(q[i][j] / eq.p[j] for j in range(m)) for i in range(n))
    return ErEquilibrium(x, eq.p, tuple(tuple(row) for row in q), eq.alpha)


def _orient_cycle(cycle: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Order cycle edges so that consecutive edges share an endpoint."""
    rest = list(cycle[1:])
    out = [cycle[0]]
    last_shared = ("chore", cycle[0][1])
    while rest:
        kind, v = last_shared
        for idx, (i, j) in enumerate(rest):
            if (kind == "chore" and j == v) or (kind == "agent" and i == v):
                out.append((i, j))
                rest.pop(idx)
                last_shared = ("agent", i) if kind == "chore" else ("chore", j)
                break
        else:  # pragma: no cover - cycle edges always chain
            raise AssertionError("cycle edges do not chain")
    return out


def forest_components(n: int, m: int, edges: Iterable[tuple[int, int]]) -> list[tuple[list[int], list[int]]]:
    """Connected components as (agents, chores), ordered by lowest agent index."""
    adj: list[list[int]] = [[] for _ in range(n + m)]
    for i, j in edges:
        adj[i].append(n + j)
        adj[n + j].append(i)
    seen = [False] * (n + m)
    comps = []
    for start in range(n + m):
        if seen[start] or not adj[start] and start >= n:
            continue
        seen[start] = True
        stack, nodes = [start], []
        while stack:
            v = stack.pop()
            nodes.append(v)
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append((sorted(v for v in nodes if v < n), sorted(v - n for v in nodes if v >= n)))
    return comps


def payment_graph_dot(eq: ErEquilibrium) -> str:
    lines = ["graph payment {"]
    for i in range(eq.n):
        lines.append(f'  a{i} [shape=box,label="a{i}"];')
    for j in range(eq.m):
        lines.append(f'  c{j} [label="c{j} p={eq.p[j]}"];')
    for i, j in eq.support():
        lines.append(f'  a{i} -- c{j} [label="{eq.q[i][j]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def allocation_dot(alloc: Allocation) -> str:
    lines = ["graph allocation {"]
    for i, bundle in enumerate(alloc.bundles):
        lines.append(f'  a{i} [shape=box];')
        for j in bundle:
            label = f' [label="{alloc.payments[j]}"]' if alloc.payments else ""
            lines.append(f"  a{i} -- c{j}{label};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def mpb_graph(inst: Instance, bundles: Sequence[Sequence[int]], p: Sequence[Fraction]) -> tuple[list[list[int]], list[list[int]]]:
    """Directed MPB graph: agent -> own chores, chore -> agents for whom it is MPB but not owned."""
    mpb = mpb_sets(inst, p)
    owner = [-1] * inst.m
    for i, b in enumerate(bundles):
        for j in b:
            owner[j] = i
    agent_out = [sorted(b) for b in bundles]
    chore_out = [[i for i in range(inst.n) if j in mpb[i] and owner[j] != i] for j in range(inst.m)]
    return agent_out, chore_out
