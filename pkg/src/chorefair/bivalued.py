"""Approximate and exact EFX with MPB payments for {1, k} instances.

Both algorithms start from an MPB allocation whose payments take only a few
values (a low value, a high value k times larger, and for the rounded
equilibrium possibly some in between) and repair envy with two kinds of
swaps: a two-high-chore holder hands one high chore to an envied low-only
agent, and a one-high-chore holder trades it for the envied bundle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import InvariantViolation, PreconditionViolated
from .instances import Allocation, BivaluedForm, ErInstance, Instance
from .market import ErEquilibrium, bundle_payment, mpb_certificate, mpb_ratios, mpb_sets, payment_minus_k
from .rounding import HALF, balanced_po, round_er_half
from .verify import efx_envied, is_efk, is_efx

ONE = Fraction(1)


@dataclass(frozen=True)
class BivaluedClassification:
    rho: Fraction
    low: frozenset[int]
    high: frozenset[int]
    middle: frozenset[int]
    n_low: tuple[int, ...]
    n_high1: tuple[int, ...]
    n_high2: tuple[int, ...]
    n_zero: tuple[int, ...]

    @classmethod
    def of(cls, bundles, p, rho: Fraction, k: Fraction) -> "BivaluedClassification":
        low = frozenset(j for j, v in enumerate(p) if v == rho)
        high = frozenset(j for j, v in enumerate(p) if v == rho * k)
        middle = frozenset(range(len(p))) - low - high
        n_low, h1, h2, n_zero = [], [], [], []
        for i, b in enumerate(bundles):
            nh = sum(1 for j in b if j in high)
            if b and all(j in middle for j in b):
                n_zero.append(i)
            elif nh == 0:
                n_low.append(i)
            elif nh == 1:
                h1.append(i)
            elif nh == 2:
                h2.append(i)
            else:
                raise InvariantViolation(f"agent {i} holds {nh} high chores")
        return cls(rho, low, high, middle, tuple(n_low), tuple(h1), tuple(h2), tuple(n_zero))


@dataclass(frozen=True)
class BivaluedStep:
    phase: int
    agent: int
    target: int
    given: int  # high chore moved from agent to target
    taken: tuple[int, ...]  # chores moved from target to agent


def _require_form(inst: Instance, k: Fraction) -> None:
    if any(v not in (ONE, k) for row in inst.d for v in row):
        raise PreconditionViolated(f"instance is not in {{1, {k}}} form")


def _swap_phases(
    inst: Instance,
    bundles: list[list[int]],
    p,
    rho: Fraction,
    k: Fraction,
    alpha: int,
    invariants: Callable[[list[list[int]], int], None],
    steps: list[BivaluedStep],
) -> None:
    """Phase 1 splits two-high bundles, phase 2 trades single high chores."""
    n = inst.n

    def envy_source(i: int, ell: int, c: BivaluedClassification) -> None:
        if mpb_ratios(inst, p)[i] != 1 / rho:
            raise InvariantViolation(f"envious agent {i} has MPB ratio other than 1/rho")
        if ell not in c.n_low:
            raise InvariantViolation(f"envied agent {ell} holds more than low chores")
        if not set(bundles[ell]) <= mpb_sets(inst, p)[i]:
            raise InvariantViolation(f"bundle of {ell} is not MPB for {i}")

    invariants(bundles, 1)
    phase1 = 0
    while True:
        c = BivaluedClassification.of(bundles, p, rho, k)
        envious = [i for i in c.n_high2 if efx_envied(inst, bundles, i, alpha)]
        if not envious:
            break
        i = envious[0]
        ell = efx_envied(inst, bundles, i, alpha)[0]
        envy_source(i, ell, c)
        taken = [min(bundles[ell])] if bundle_payment(bundles[ell], p) > 1 else []
        j = min(x for x in bundles[i] if x in c.high)
        bundles[ell] = [x for x in bundles[ell] if x not in taken] + [j]
        bundles[i] = [x for x in bundles[i] if x != j] + taken
        steps.append(BivaluedStep(1, i, ell, j, tuple(taken)))
        phase1 += 1
        if 2 * phase1 > n:
            raise InvariantViolation(f"phase 1 exceeded n/2 = {Fraction(n, 2)} swaps")
        invariants(bundles, 1)

    phase2 = 0
    while True:
        c = BivaluedClassification.of(bundles, p, rho, k)
        envious = [i for i in c.n_high1 if efx_envied(inst, bundles, i, alpha)]
        if not envious:
            break
        i = envious[0]
        ell = min(efx_envied(inst, bundles, i, alpha), key=lambda h: (bundle_payment(bundles[h], p), h))
        envy_source(i, ell, c)
        (j,) = [x for x in bundles[i] if x in c.high]
        taken = list(bundles[ell])
        bundles[i] = [x for x in bundles[i] if x != j] + taken
        bundles[ell] = [j]
        steps.append(BivaluedStep(2, i, ell, j, tuple(taken)))
        phase2 += 1
        if phase2 > n:
            raise InvariantViolation(f"phase 2 exceeded n = {n} swaps")
        invariants(bundles, 2)


def _common_invariants(inst: Instance, bundles, p, rho: Fraction, k: Fraction) -> BivaluedClassification:
    alloc = Allocation.from_bundles(bundles)
    if not mpb_certificate(alloc, p, inst):
        raise InvariantViolation("allocation left the MPB set")
    c = BivaluedClassification.of(bundles, p, rho, k)
    alpha = mpb_ratios(inst, p)
    mpb = mpb_sets(inst, p)
    if c.high:
        for i in c.n_low:
            if alpha[i] != 1 / rho or not c.high <= mpb[i]:
                raise InvariantViolation(f"low-only agent {i} does not see every high chore as MPB")
    return c


def bivalued_3efx_po(
    eq: ErEquilibrium, er: ErInstance, bform: BivaluedForm, trace: list[BivaluedStep] | None = None
) -> tuple[Allocation, tuple[Fraction, ...]]:
    """3-EFX MPB allocation for m > 2n from an equilibrium with e = 1, c = 1/2."""
    inst = er.base
    n, m = inst.n, inst.m
    k = bform.k
    if m <= 2 * n:
        raise PreconditionViolated(f"needs m > 2n, got m = {m}")
    _require_form(inst, k)
    x0 = round_er_half(eq, er)
    p = x0.payments
    assert p is not None
    rho = min(p)
    if not rho < HALF:
        raise InvariantViolation(f"minimum payment {rho} is not below 1/2")
    if any(not rho <= v <= rho * k for v in p):
        raise InvariantViolation("payments leave [rho, rho k]")
    if rho * k <= HALF:
        if not is_efk(inst, x0, 0, 3):
            raise InvariantViolation("small payments but the rounding is not 3-EF")
        return x0, p
    bundles = [list(b) for b in x0.bundles]
    c0 = BivaluedClassification.of(bundles, p, rho, k)
    for i, b in enumerate(bundles):
        mids = {p[j] for j in b if j in c0.middle}
        if mids and (len(mids) > 1 or len(mids) != len({p[j] for j in b})):
            raise InvariantViolation(f"agent {i} mixes middle chores with other payments")
    if not c0.high:
        if not is_efx(inst, x0, 2):
            raise InvariantViolation("no high chores but the rounding is not 2-EFX")
        return x0, p
    cap = Fraction(4, 3) + rho * k / 3

    def invariants(bs, phase: int) -> None:
        c = _common_invariants(inst, bs, p, rho, k)
        for i, b in enumerate(bs):
            if bundle_payment(b, p) < HALF:
                raise InvariantViolation(f"agent {i} earns below 1/2")
        for i in c.n_low:
            if phase == 1 and payment_minus_k(bs[i], p, 1) > 1:
                raise InvariantViolation(f"low-only agent {i} has p_-1 > 1 in phase 1")
            if bundle_payment(bs[i], p) > cap:
                raise InvariantViolation(f"low-only agent {i} earns above 4/3 + rho k / 3")
        for i in c.n_high1:
            if payment_minus_k(bs[i], p, 1) > 1:
                raise InvariantViolation(f"agent {i} with one high chore has p_-1 > 1")
        for i in c.n_high2:
            if payment_minus_k(bs[i], p, 2) > HALF:
                raise InvariantViolation(f"agent {i} with two high chores has p_-2 > 1/2")

    steps = trace if trace is not None else []
    _swap_phases(inst, bundles, p, rho, k, 3, invariants, steps)
    out = Allocation.from_bundles(bundles, p)
    if not is_efx(inst, out, 3) or not mpb_certificate(out, p, inst):
        raise InvariantViolation("bivalued_3efx_po output is not 3-EFX with MPB payments")
    return out, p


def _power_of(x: Fraction, k: Fraction) -> int | None:
    r = 0
    while x > 1:
        x /= k
        r += 1
    return r if x == 1 else None


def bivalued_efx_po_small(
    bform: BivaluedForm, trace: list[BivaluedStep] | None = None
) -> tuple[Allocation, tuple[Fraction, ...]]:
    """EFX MPB allocation for m <= 2n, starting from a balanced allocation."""
    inst = bform.scaled
    n, m = inst.n, inst.m
    k = bform.k
    if m > 2 * n:
        raise PreconditionViolated(f"needs m <= 2n, got m = {m}")
    _require_form(inst, k)
    x0 = balanced_po(inst)
    raw = x0.payments
    assert raw is not None
    if m <= n:
        return x0, raw
    base = min(raw)
    r = _power_of(base, k)
    if r is None or any(v not in (base, base * k) for v in raw):
        raise InvariantViolation("balanced payments are not k^r and k^(r+1)")
    p = tuple(v / base for v in raw)
    bundles = [list(b) for b in x0.bundles]
    if all(v == 1 for v in p):
        out = Allocation.from_bundles(bundles, p)
        if not is_efx(inst, out):
            raise InvariantViolation("no high chores but the balanced allocation is not EFX")
        return out, p

    def invariants(bs, phase: int) -> None:
        c = _common_invariants(inst, bs, p, ONE, k)
        for i, b in enumerate(bs):
            if bundle_payment(b, p) < 1:
                raise InvariantViolation(f"agent {i} earns below 1")
        for i in c.n_low:
            if phase == 1 and payment_minus_k(bs[i], p, 1) > 1:
                raise InvariantViolation(f"low-only agent {i} has p_-1 > 1 in phase 1")
            if not bundle_payment(bs[i], p) < 1 + k:
                raise InvariantViolation(f"low-only agent {i} earns at least 1 + k")
        for i in c.n_high1:
            if not sum(1 for j in bs[i] if j not in c.high) <= 1:
                raise InvariantViolation(f"agent {i} with one high chore holds two low chores")
        for i in c.n_high2:
            if len(bs[i]) != 2:
                raise InvariantViolation(f"agent {i} with two high chores holds other chores")

    steps = trace if trace is not None else []
    _swap_phases(inst, bundles, p, ONE, k, 1, invariants, steps)
    out = Allocation.from_bundles(bundles, p)
    if not is_efx(inst, out) or not mpb_certificate(out, p, inst):
        raise InvariantViolation("bivalued_efx_po_small output is not EFX with MPB payments")
    return out, p
