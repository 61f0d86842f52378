from fractions import Fraction as F

from conftest import three_by_four, three_by_four_equilibrium

from chorefair.instances import Allocation, ErInstance, Instance
from chorefair.market import (
    ErEquilibrium,
    bundle_payment,
    forest_components,
    make_acyclic,
    mpb_certificate,
    mpb_ratios,
    mpb_sets,
    payment_minus_k,
    payment_minus_x,
)
from chorefair.verify import verify_er


def test_mpb_ratios_and_sets():
    eq = three_by_four_equilibrium()
    assert mpb_ratios(three_by_four(), eq.p) == (F(3, 2), F(3, 2), F(3, 2))
    assert mpb_sets(three_by_four(), eq.p)[1] == {1, 2}


def test_payment_helpers():
    p = [F(1), F(2), F(3, 2)]
    assert bundle_payment([0, 1, 2], p) == F(9, 2)
    assert payment_minus_k([0, 1, 2], p, 1) == F(5, 2)
    assert payment_minus_k([0, 1, 2], p, 2) == 1
    assert payment_minus_x([0, 1, 2], p) == F(7, 2)


def test_certificate_rejects_non_mpb_edge():
    inst = three_by_four()
    p = three_by_four_equilibrium().p
    assert mpb_certificate(Allocation.from_bundles([[0], [1, 2], [3]]), p, inst)
    assert not mpb_certificate(Allocation.from_bundles([[1], [0, 2], [3]]), p, inst)


def test_make_acyclic_cancels_a_cycle():
    # two agents share two identical chores: the payment graph is a 4-cycle
    inst = Instance.from_matrix([[1, 1], [1, 1]])
    er = ErInstance.uniform(inst, 1, 1)
    half = F(1, 2)
    eq = ErEquilibrium.from_earnings(inst, [1, 1], [[half, half], [half, half]])
    assert verify_er(eq, er)[0]
    flat = make_acyclic(eq, er)
    assert verify_er(flat, er)[0]
    # symmetric cycle: cancelling it empties two edges at once
    assert len(flat.support()) == 2
    assert sorted(len(a) for a, _ in forest_components(2, 2, flat.support())) == [1, 1]
