"""Exact equilibrium search for a handful of agents by consumption-graph enumeration.

Only bipartite forests are enumerated: any equilibrium can be made acyclic
without changing payments, so some equilibrium always has forest support.
Inside a connected component the MPB equalities fix every payment up to one
scale ``s``; the earning balance of the component then pins ``s`` (or, when
all chores are capped, bounds it from below).  Scales of different
components are tied together only by MPB inequalities, which are ratio
constraints solved with a multiplicative Bellman-Ford pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .errors import ExhaustedWithoutEquilibrium, InfeasibleEarning, TooManyAgents
from .instances import ErInstance
from .market import ErEquilibrium
from .verify import verify_er

MAX_AGENTS = 4
ZERO = Fraction(0)


@dataclass(frozen=True)
class ConsumptionGraph:
    n: int
    m: int
    masks: tuple[int, ...]  # masks[j] = bitmask of agents adjacent to chore j

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for j, mask in enumerate(self.masks) for i in range(self.n) if mask >> i & 1]


@dataclass(frozen=True)
class ComponentProgram:
    agents: tuple[int, ...]
    chores: tuple[int, ...]
    rep: int
    mu: dict[int, Fraction]
    edges: tuple[tuple[int, int], ...]


def _agents_of(mask: int, n: int) -> list[int]:
    return [i for i in range(n) if mask >> i & 1]


def _forest_dfs(n: int, m: int, accept=None) -> Iterator[tuple[int, ...]]:
    """Covered forests in lexicographic mask order; ``accept`` may prune partial graphs."""
    masks: list[int] = []
    comp = list(range(n))

    def rec(j: int) -> Iterator[tuple[int, ...]]:
        if j == m:
            yield tuple(masks)
            return
        for mask in range(1, 1 << n):
            members = _agents_of(mask, n)
            roots = [comp[i] for i in members]
            if len(set(roots)) != len(roots):
                continue  # two agents already connected: would close a cycle
            saved = comp[:]
            target = roots[0]
            for i in range(n):
                if comp[i] in roots:
                    comp[i] = target
            masks.append(mask)
            if accept is None or accept(masks):
                yield from rec(j + 1)
            masks.pop()
            comp[:] = saved

    yield from rec(0)


def enumerate_consumption_graphs(n: int, m: int, max_agents: int = MAX_AGENTS) -> Iterator[ConsumptionGraph]:
    """Every bipartite forest in which each chore has at least one agent, exactly once."""
    if n > max_agents:
        raise TooManyAgents(f"n = {n} exceeds the enumeration guard {max_agents}")
    for masks in _forest_dfs(n, m):
        yield ConsumptionGraph(n, m, masks)


def _components(n: int, masks: list[int] | tuple[int, ...], d) -> list[ComponentProgram]:
    """Components that contain at least one chore, with multipliers mu relative to the lowest chore."""
    adj_agent: list[list[int]] = [[] for _ in range(n)]
    adj_chore = [_agents_of(mask, n) for mask in masks]
    for j, members in enumerate(adj_chore):
        for i in members:
            adj_agent[i].append(j)
    seen = [False] * len(masks)
    out = []
    for rep in range(len(masks)):
        if seen[rep]:
            continue
        mu = {rep: Fraction(1)}
        seen[rep] = True
        agents: set[int] = set()
        edges = []
        stack = [rep]
        while stack:
            j = stack.pop()
            for i in adj_chore[j]:
                edges.append((i, j))
                if i in agents:
                    continue
                agents.add(i)
                for l in adj_agent[i]:
                    if not seen[l]:
                        seen[l] = True
                        mu[l] = mu[j] * d[i][l] / d[i][j]
                        stack.append(l)
        out.append(ComponentProgram(tuple(sorted(agents)), tuple(sorted(mu)), rep, mu, tuple(sorted(set(edges)))))
    return out


def _alpha_rel(cp: ComponentProgram, d) -> dict[int, Fraction]:
    """Per agent MPB ratio in units of 1/s."""
    out = {}
    for i, j in cp.edges:
        out.setdefault(i, d[i][j] / cp.mu[j])
    return out


def _ratio_constraints(comps: list[ComponentProgram], d) -> tuple[bool, dict[tuple[int, int], Fraction]]:
    """Check MPB inside components and collect s_b <= K * s_a constraints across them."""
    cons: dict[tuple[int, int], Fraction] = {}
    alphas = [_alpha_rel(cp, d) for cp in comps]
    for a, cp in enumerate(comps):
        for i, al in alphas[a].items():
            for b, other in enumerate(comps):
                for l in other.chores:
                    ratio = d[i][l] / other.mu[l] / al
                    if a == b:
                        if ratio < 1:
                            return False, {}
                    elif (a, b) not in cons or ratio < cons[(a, b)]:
                        cons[(a, b)] = ratio
    return True, cons


def _min_product_closure_ok(k: int, cons: dict[tuple[int, int], Fraction]) -> bool:
    """No cycle of ratio constraints with product below one."""
    dist: list[list[Fraction | None]] = [[None] * k for _ in range(k)]
    for (a, b), w in cons.items():
        dist[a][b] = w
    for mid in range(k):
        for a in range(k):
            if dist[a][mid] is None:
                continue
            for b in range(k):
                if dist[mid][b] is None:
                    continue
                cand = dist[a][mid] * dist[mid][b]  # type: ignore[operator]
                if dist[a][b] is None or cand < dist[a][b]:  # type: ignore[operator]
                    dist[a][b] = cand
    return all(dist[a][a] is None or dist[a][a] >= 1 for a in range(k))  # type: ignore[operator]


def _tree_flows(cp: ComponentProgram, er: ErInstance, pay: dict[int, Fraction]) -> dict[tuple[int, int], Fraction] | None:
    """Unique edge flows on the component tree; None if any flow is negative."""
    n = er.n
    resid: dict[int, Fraction] = {i: er.e[i] for i in cp.agents}
    resid.update({n + j: pay[j] for j in cp.chores})
    adj: dict[int, set[int]] = {v: set() for v in resid}
    for i, j in cp.edges:
        adj[i].add(n + j)
        adj[n + j].add(i)
    flows: dict[tuple[int, int], Fraction] = {}
    leaves = [v for v in adj if len(adj[v]) == 1]
    while leaves:
        v = leaves.pop()
        if len(adj[v]) != 1:
            continue
        (u,) = adj[v]
        f = resid[v]
        if f < 0:
            return None
        edge = (v, u - n) if v < n else (u, v - n)
        flows[edge] = f
        resid[v] = ZERO
        resid[u] -= f
        adj[v].clear()
        adj[u].discard(v)
        if len(adj[u]) == 1:
            leaves.append(u)
    if any(r != 0 for r in resid.values()):
        return None
    return flows


def _component_config(cp: ComponentProgram, er: ErInstance):
    """('fixed', s, flows) or ('interval', lower bound, flows), or None when infeasible."""
    demand = sum((er.e[i] for i in cp.agents), ZERO)
    supply = sum((er.c[j] for j in cp.chores), ZERO)
    if demand > supply:
        return None
    order = sorted(cp.chores, key=lambda j: (er.c[j] / cp.mu[j], j))
    breaks = [er.c[j] / cp.mu[j] for j in order]
    if demand == supply:
        # every chore capped: any s at or above the last breakpoint works
        flows = _tree_flows(cp, er, {j: er.c[j] for j in cp.chores})
        return None if flows is None else ("interval", breaks[-1], flows)
    for k in range(len(order)):
        capped, free = order[:k], order[k:]
        lo = breaks[k - 1] if k > 0 else ZERO
        cap_sum = sum((er.c[j] for j in capped), ZERO)
        if free:
            s = (demand - cap_sum) / sum((cp.mu[j] for j in free), ZERO)
            if s <= 0 or s < lo or s > breaks[k]:
                continue
            pay = {j: min(er.c[j], cp.mu[j] * s) for j in cp.chores}
            flows = _tree_flows(cp, er, pay)
            if flows is None:
                return None
            return ("fixed", s, flows)
    return None


def solve_component_program(cp: ComponentProgram, er: ErInstance) -> tuple[Fraction, dict[tuple[int, int], Fraction]] | None:
    """Smallest feasible scale p[rep] and the matching edge earnings, or None."""
    cfg = _component_config(cp, er)
    if cfg is None:
        return None
    return cfg[1], cfg[2]


def _solve_scales(configs, cons: dict[tuple[int, int], Fraction]) -> list[Fraction] | None:
    """Scales meeting fixed values, lower bounds and ratio constraints (multiplicative Bellman-Ford)."""
    k = len(configs)
    src = k
    edges: list[tuple[int, int, Fraction]] = [(a, b, w) for (a, b), w in cons.items()]
    bounds = [Fraction(1)]
    for c, (kind, val, _) in enumerate(configs):
        if kind == "fixed":
            edges.append((src, c, val))
            edges.append((c, src, 1 / val))
        elif val > 0:
            edges.append((c, src, 1 / val))
        bounds.append(val if val > 0 else Fraction(1))
    spread = max([max(w, 1 / w) for _, _, w in edges] + [Fraction(1)])
    big = max(bounds) * spread ** (k + 2)
    edges += [(src, c, big) for c in range(k)]
    dist: list[Fraction | None] = [None] * k + [Fraction(1)]
    for _ in range(k + 1):
        changed = False
        for a, b, w in edges:
            if dist[a] is not None and (dist[b] is None or dist[a] * w < dist[b]):  # type: ignore[operator]
                dist[b] = dist[a] * w  # type: ignore[operator]
                changed = True
        if not changed:
            break
    else:
        return None
    if dist[src] != 1:
        return None
    return dist[:k]  # type: ignore[return-value]


def _try_graph(masks: tuple[int, ...], er: ErInstance) -> ErEquilibrium | None:
    n, m = er.n, er.m
    covered = 0
    for mask in masks:
        covered |= mask
    if covered != (1 << n) - 1:
        return None
    comps = _components(n, masks, er.d)
    ok, cons = _ratio_constraints(comps, er.d)
    if not ok:
        return None
    configs = []
    for cp in comps:
        cfg = _component_config(cp, er)
        if cfg is None:
            return None
        configs.append(cfg)
    scales = _solve_scales(configs, cons)
    if scales is None:
        return None
    p = [ZERO] * m
    q = [[ZERO] * m for _ in range(n)]
    for cp, (kind, _, flows), s in zip(comps, configs, scales):
        for j in cp.chores:
            p[j] = cp.mu[j] * s
        for (i, j), f in flows.items():
            q[i][j] = f
    eq = ErEquilibrium.from_earnings(er.base, p, q)
    return eq if verify_er(eq, er)[0] else None


def find_er_equilibrium_enum(er: ErInstance, max_agents: int = MAX_AGENTS) -> ErEquilibrium:
    """First equilibrium in enumeration order whose support is a covered forest."""
    if er.n > max_agents:
        raise TooManyAgents(f"n = {er.n} exceeds the enumeration guard {max_agents}")
    if not er.feasible:
        raise InfeasibleEarning(f"sum(e) = {sum(er.e)} exceeds sum(c) = {sum(er.c)}")
    n = er.n

    def accept(masks: list[int]) -> bool:
        comps = _components(n, masks, er.d)
        ok, cons = _ratio_constraints(comps, er.d)
        return ok and _min_product_closure_ok(len(comps), cons)

    for masks in _forest_dfs(n, er.m, accept):
        eq = _try_graph(masks, er)
        if eq is not None:
            return eq
    raise ExhaustedWithoutEquilibrium(f"no equilibrium found for d = {er.d}, e = {er.e}, c = {er.c}")
