"""Invariants checked on generated instances."""

from fractions import Fraction as F

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from chorefair.efx import efx_small, matching_payments
from chorefair.enumeration import find_er_equilibrium_enum
from chorefair.instances import Allocation, ErInstance, Instance
from chorefair.lcp import solve_er
from chorefair.market import bundle_payment, make_acyclic, mpb_certificate, payment_minus_k
from chorefair.rounding import HALF, balanced_po, round_er_half, round_er_one
from chorefair.verify import FairnessQuery, check_fairness, efx_factor, is_efk, verify_er

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

values = st.fractions(min_value=F(1, 4), max_value=12, max_denominator=4).filter(lambda v: v > 0)


@st.composite
def instances(draw, n_max=3, m_min=1, m_max=6, min_ratio=0):
    n = draw(st.integers(1, n_max))
    m = draw(st.integers(max(m_min, min_ratio * n), max(m_max, min_ratio * n)))
    rows = draw(st.lists(st.lists(values, min_size=m, max_size=m), min_size=n, max_size=n))
    return Instance.from_matrix(rows)


@SETTINGS
@given(instances(n_max=3, m_max=6))
def test_solvers_agree_on_verification(inst):
    er = ErInstance.uniform(inst, 1, max(F(1), F(inst.n, inst.m)))
    a, _ = solve_er(er)
    b = find_er_equilibrium_enum(er)
    assert verify_er(a, er)[0] and verify_er(b, er)[0]
    flat = make_acyclic(a, er)
    assert verify_er(flat, er)[0]
    assert len(flat.support()) <= inst.n + inst.m - 1


@SETTINGS
@given(instances(n_max=3, m_max=4, min_ratio=2))
def test_half_rounding_bounds(inst):
    er = ErInstance.uniform(inst, 1, HALF)
    alloc = round_er_half(find_er_equilibrium_enum(er), er)
    alloc.check(inst)
    p = alloc.payments
    assert mpb_certificate(alloc, p, inst)
    assert all(bundle_payment(b, p) >= HALF for b in alloc.bundles)
    assert is_efk(inst, alloc, 2)


@SETTINGS
@given(instances(n_max=4, m_min=1, m_max=7))
def test_one_rounding_bounds(inst):
    if inst.m < inst.n:
        return
    er = ErInstance.uniform(inst, 1, 1)
    eq, _ = solve_er(er)
    alloc = round_er_one(eq, er)
    assert all(payment_minus_k(b, alloc.payments, 1) <= 1 for b in alloc.bundles)
    assert is_efk(inst, alloc, 1, max(1, 2 * (inst.n - 1)))


@SETTINGS
@given(instances(n_max=4, m_min=0, m_max=8))
def test_balanced_is_balanced_and_certified(inst):
    alloc = balanced_po(inst)
    sizes = [len(b) for b in alloc.bundles]
    assert max(sizes) - min(sizes) <= 1
    assert mpb_certificate(alloc, alloc.payments, inst)


@SETTINGS
@given(instances(n_max=4, m_min=0, m_max=8))
def test_efx_small_is_efx(inst):
    if inst.m > 2 * inst.n:
        return
    alloc = efx_small(inst)
    alloc.check(inst)
    assert efx_factor(inst, alloc) == 1


@SETTINGS
@given(instances(n_max=3, m_min=1, m_max=5), st.data())
def test_payment_verdicts_imply_cost_verdicts(inst, data):
    """With MPB payments, a pass on payments is a pass on costs."""
    alloc = balanced_po(inst)
    alpha = data.draw(st.sampled_from([F(1), F(3, 2), F(2)]))
    k = data.draw(st.integers(0, 2))
    for pc, c in (("pEFk", "EFk"), ("pEFX", "EFX")):
        if check_fairness(FairnessQuery(pc, inst, alloc, alpha, k)).ok:
            assert check_fairness(FairnessQuery(c, inst, alloc, alpha, k)).ok


@SETTINGS
@given(instances(n_max=3, m_min=1, m_max=5), st.data())
def test_witness_is_a_real_violation(inst, data):
    owner = data.draw(st.lists(st.integers(0, inst.n - 1), min_size=inst.m, max_size=inst.m))
    alloc = Allocation.from_owner(owner, inst.n)
    v = check_fairness(FairnessQuery("EFk", inst, alloc, F(1), 1))
    if not v.ok:
        w = v.witness
        kept = [j for j in alloc.bundles[w.agent] if j not in w.removed]
        assert inst.cost(w.agent, kept) > inst.cost(w.agent, alloc.bundles[w.target])


@SETTINGS
@given(st.integers(1, 5).flatmap(lambda k: st.lists(st.lists(values, min_size=k, max_size=k), min_size=k, max_size=k)))
def test_matching_duals(d):
    k = len(d)
    mt = matching_payments(list(range(k)), list(range(k)), d)
    for i in range(k):
        assert mt.alpha[i] * mt.q[mt.sigma[i]] == d[i][mt.sigma[i]]
        assert all(mt.alpha[i] * mt.q[j] <= d[i][j] for j in range(k))
