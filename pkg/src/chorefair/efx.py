"""EFX allocations: exact for m <= 2n, 4-approximate from a rounded equilibrium.

``efx_small`` runs a two-round picking sequence followed by chore swaps.
``four_efx`` reallocates the high-paying chores of a rounded equilibrium
with ``efx_small``, rematches the single-chore holders by a minimum-product
matching and then swaps in order of the matching payments.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import InvariantViolation, PreconditionViolated, TooManyChores
from .instances import Allocation, ErInstance, Instance
from .market import ErEquilibrium, bundle_payment
from .rounding import HALF, round_er_half
from .verify import efx_envied, is_efx

ONE = Fraction(1)


@dataclass(frozen=True)
class SwapStep:
    t: int
    agent: int
    target: int
    chores: tuple[int, ...]  # moved from agent to target
    key: Fraction  # q of the moved chore; 0 for efx_small


@dataclass(frozen=True)
class AgentClassification:
    n_low: tuple[int, ...]
    n_high1: tuple[int, ...]
    n_high2: tuple[int, ...]
    n_high: tuple[int, ...]  # agents holding a high-paying chore after rounding
    n_zero: tuple[int, ...]


@dataclass(frozen=True)
class Matching:
    sigma: dict[int, int]
    q: dict[int, Fraction]
    alpha: dict[int, Fraction]

    def product(self, d) -> Fraction:
        out = ONE
        for i, j in self.sigma.items():
            out *= d[i][j]
        return out


def _max_minus_one(inst: Instance, i: int, bundle: Sequence[int]) -> Fraction:
    if not bundle:
        return Fraction(0)
    return inst.cost(i, bundle) - min(inst.d[i][j] for j in bundle)


def efx_small(
    inst: Instance, agent_order: Sequence[int] | None = None, trace: list[SwapStep] | None = None
) -> Allocation:
    """EFX allocation for m <= 2n; the last n agents of ``agent_order`` end with one chore each."""
    n, m = inst.n, inst.m
    if m > 2 * n:
        raise TooManyChores(f"m = {m} exceeds 2n = {2 * n}")
    order = list(range(n)) if agent_order is None else list(agent_order)
    if sorted(order) != list(range(n)):
        raise PreconditionViolated("agent_order must be a permutation of the agents")
    r = max(0, m - n)
    left = set(range(m))
    bundles: list[list[int]] = [[] for _ in range(n)]

    def pick(i: int) -> int:
        j = min(left, key=lambda c: (inst.d[i][c], c))
        left.discard(j)
        bundles[i].append(j)
        return j

    for pos in range(r - 1, -1, -1):
        pick(order[pos])
    second: dict[int, int] = {}
    for pos in range(n):
        if left:
            second[order[pos]] = pick(order[pos])

    rank = {a: pos for pos, a in enumerate(order)}
    steps = trace if trace is not None else []
    start = len(steps)
    last_pos = -1
    while True:
        envious = [i for i in order if efx_envied(inst, bundles, i)]
        if not envious:
            break
        i = envious[0]
        if rank[i] <= last_pos or rank[i] >= r:
            raise InvariantViolation(f"swap order broken at agent {i}")
        ell = min((h for h in range(n) if h != i), key=lambda h: (inst.cost(i, bundles[h]), h))
        ji = second[i]
        if ji not in bundles[i]:
            raise InvariantViolation(f"agent {i} no longer holds its second pick {ji}")
        bundles[i] = [j for j in bundles[i] if j != ji] + bundles[ell]
        bundles[ell] = [ji]
        if not _max_minus_one(inst, i, bundles[i]) < inst.d[i][ji]:
            raise InvariantViolation(f"agent {i} is not strictly better off than its given-away chore")
        steps.append(SwapStep(len(steps) - start + 1, i, ell, (ji,), Fraction(0)))
        last_pos = rank[i]
    if len(steps) - start > r:
        raise InvariantViolation(f"{len(steps) - start} swaps exceed r = {r}")
    out = Allocation.from_bundles(bundles)
    if m > n and any(len(out.bundles[order[pos]]) != 1 for pos in range(r, n)):
        raise InvariantViolation("a trailing agent holds more than one chore")
    if not is_efx(inst, out):
        raise InvariantViolation("efx_small output is not EFX")
    return out


def matching_payments(agents: Sequence[int], chores: Sequence[int], d) -> Matching:
    """Minimum-product perfect matching with multiplicative duals alpha_i * q_j <= d_ij.

    Hungarian method on the product semiring: potentials multiply where the
    additive version adds, so every reduced cost d / (u * v) stays >= 1 and
    equals 1 on tight edges.
    """
    k = len(agents)
    if k != len(chores):
        raise PreconditionViolated(f"{k} agents but {len(chores)} chores")
    cost = [[Fraction(d[a][c]) for c in chores] for a in agents]
    if any(v <= 0 for row in cost for v in row):
        raise PreconditionViolated("disutilities must be positive")
    # 1-based arrays with a sentinel column 0
    u = [ONE] * (k + 1)
    v = [ONE] * (k + 1)
    match = [0] * (k + 1)  # match[col] = row
    way = [0] * (k + 1)
    for row in range(1, k + 1):
        match[0] = row
        col0 = 0
        best: list[Fraction | None] = [None] * (k + 1)
        used = [False] * (k + 1)
        while True:
            used[col0] = True
            r0 = match[col0]
            delta: Fraction | None = None
            col1 = 0
            for col in range(1, k + 1):
                if used[col]:
                    continue
                cur = cost[r0 - 1][col - 1] / (u[r0] * v[col])
                if best[col] is None or cur < best[col]:  # type: ignore[operator]
                    best[col] = cur
                    way[col] = col0
                if delta is None or best[col] < delta:  # type: ignore[operator]
                    delta = best[col]
                    col1 = col
            assert delta is not None
            for col in range(k + 1):
                if used[col]:
                    u[match[col]] *= delta
                    v[col] /= delta
                else:
                    best[col] /= delta  # type: ignore[operator]
            col0 = col1
            if match[col0] == 0:
                break
        while col0:
            col1 = way[col0]
            match[col0] = match[col1]
            col0 = col1
    sigma = {agents[match[col] - 1]: chores[col - 1] for col in range(1, k + 1)}
    q = {chores[col - 1]: v[col] for col in range(1, k + 1)}
    alpha = {agents[row - 1]: u[row] for row in range(1, k + 1)}
    for a in agents:
        for c in chores:
            lhs = alpha[a] * q[c]
            if lhs > d[a][c] or (sigma[a] == c and lhs != d[a][c]):
                raise InvariantViolation(f"dual certificate fails at ({a}, {c})")
    return Matching(sigma, q, alpha)


def classify(rounded: Allocation, high: set[int], realloc: Sequence[Sequence[int]]) -> AgentClassification:
    n = rounded.n
    n_high = tuple(i for i in range(n) if any(j in high for j in rounded.bundles[i]))
    return AgentClassification(
        tuple(i for i in range(n) if len(realloc[i]) == 0),
        tuple(i for i in range(n) if len(realloc[i]) == 1),
        tuple(i for i in range(n) if len(realloc[i]) >= 2),
        n_high,
        tuple(i for i in range(n) if i not in n_high),
    )


def four_efx(eq: ErEquilibrium, er: ErInstance, trace: list[SwapStep] | None = None) -> Allocation:
    """4-EFX allocation from an equilibrium with e = 1 and c = 1/2 (needs m >= 2n)."""
    inst = er.base
    n, m = inst.n, inst.m
    if m < 2 * n:
        raise PreconditionViolated(f"needs m >= 2n, got m = {m}")
    rounded = round_er_half(eq, er)
    p = rounded.payments
    assert p is not None
    high = {j for j in range(m) if p[j] > HALF}
    small = [[j for j in b if j not in high] for b in rounded.bundles]
    heavy = [[j for j in b if j in high] for b in rounded.bundles]
    n_high = [i for i in range(n) if heavy[i]]
    n_zero = [i for i in range(n) if not heavy[i]]
    for i in range(n):
        cap = ONE if heavy[i] else Fraction(3, 2)
        if bundle_payment(small[i], p) > cap:
            raise InvariantViolation(f"agent {i} earns {bundle_payment(small[i], p)} > {cap} from low chores")

    # reallocate the high chores with agents holding one first
    hs = sorted(high)
    z_sub = efx_small(inst.restrict(hs), n_high + n_zero)
    z_prime = [[hs[j] for j in b] for b in z_sub.bundles]
    cls = classify(rounded, high, z_prime)
    if cls.n_high2 and cls.n_low:
        raise InvariantViolation("reallocation of high chores is not EFX")
    if not set(cls.n_high2) <= set(cls.n_high):
        raise InvariantViolation("an agent without a rounded high chore received two")

    h1 = list(cls.n_high1)
    h_prime = [z_prime[i][0] for i in h1]
    mt = matching_payments(h1, h_prime, inst.d)
    bundles = [list(small[i]) + ([mt.sigma[i]] if i in mt.sigma else z_prime[i]) for i in range(n)]

    steps = trace if trace is not None else []
    start = len(steps)
    swapped: set[int] = set()
    last_key = Fraction(0)
    low2 = set(cls.n_low)
    high2 = set(cls.n_high2)
    while True:
        _check_four(inst, bundles, p, high2, low2)
        envious = [i for i in h1 if efx_envied(inst, bundles, i, 4)]
        if not envious:
            break
        i = min(envious, key=lambda a: (mt.q[mt.sigma[a]], a))
        zi = mt.sigma[i]
        key = mt.q[zi]
        if i in swapped:
            raise InvariantViolation(f"agent {i} needs a second swap")
        if key < last_key:
            raise InvariantViolation(f"swap key decreased from {last_key} to {key}")
        if len(steps) - start >= n:
            raise InvariantViolation(f"more than n = {n} swaps")
        if zi not in bundles[i]:
            raise InvariantViolation(f"agent {i} lost its matched chore before swapping")
        ell = min((h for h in range(n) if h != i), key=lambda h: (inst.cost(i, bundles[h]), h))
        bundles[i] = [j for j in bundles[i] if j != zi] + bundles[ell]
        bundles[ell] = [zi]
        if not inst.cost(i, bundles[i]) < 4 * inst.d[i][zi]:
            raise InvariantViolation(f"agent {i} costs {inst.cost(i, bundles[i])} >= 4 d(z_i) after its swap")
        if efx_envied(inst, bundles, i, 4):
            raise InvariantViolation(f"agent {i} is not 4-EFX right after its swap")
        swapped.add(i)
        last_key = key
        steps.append(SwapStep(len(steps) - start + 1, i, ell, (zi,), key))
    out = Allocation.from_bundles(bundles)
    if not is_efx(inst, out, 4):
        raise InvariantViolation("four_efx output is not 4-EFX")
    return out


def _check_four(inst: Instance, bundles, p, high2: set[int], low: set[int]) -> None:
    for i, b in enumerate(bundles):
        if bundle_payment(b, p) < HALF:
            raise InvariantViolation(f"agent {i} earns below 1/2 during swaps")
    for i in high2:
        if efx_envied(inst, bundles, i, 4):
            raise InvariantViolation(f"agent {i} with several high chores is not 4-EFX")
    for i in low:
        if efx_envied(inst, bundles, i, 3):
            raise InvariantViolation(f"agent {i} without high chores is not 3-EFX")
