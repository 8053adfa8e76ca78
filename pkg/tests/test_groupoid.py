import numpy as np
import pytest

from fellbundles.errors import (
    BadInverse,
    BadUnit,
    ComposabilityMismatch,
    MorphismInvalid,
    NonAssociative,
    NotAGroup,
    NotClosed,
)
from fellbundles.groupoid import (
    DELTA_ARROW,
    DELTA_ARROW_INV,
    ArrowSubset,
    cyclic_group_table,
    delta,
    find_isomorphism,
    from_group,
    identity_morphism,
    is_full_morphism,
    is_gamma_set,
    klein_four_table,
    morphism,
    pair_groupoid,
    product_with_delta,
    subgroupoid,
    trivial_groupoid,
    validate_groupoid,
)


def test_delta_shape():
    d = delta()
    assert d.n_arrows == 4
    assert d.units == (0, 1)
    assert d.source[DELTA_ARROW] == 0 and d.range[DELTA_ARROW] == 1


def test_delta_inverse_and_composition():
    d = delta()
    assert d.inv(DELTA_ARROW) == DELTA_ARROW_INV
    assert d.compose(DELTA_ARROW_INV, DELTA_ARROW) == 0


def test_trivial_groupoid_three_points():
    t = trivial_groupoid(3)
    assert t.n_arrows == 3 and t.units == (0, 1, 2)


def test_perturbed_delta_reports_bad_inverse():
    # redirect delta . delta* to the wrong unit: the inverse law breaks at delta
    d = delta()
    table = d.compose_table.copy()
    table[DELTA_ARROW, DELTA_ARROW_INV] = 0
    with pytest.raises((BadInverse, ComposabilityMismatch)) as exc:
        validate_groupoid(d.units, d.range, d.source, d.inverse, table)
    assert exc.type is not NonAssociative


def test_nonassociative_table_detected():
    # four elements with a deliberately broken "group" law: start from Z/4 and
    # corrupt one product so that associativity (not the other axioms) fails
    t = cyclic_group_table(4)
    t[1, 2] = 0  # now (1+1)+2 = 0 vs 1+(1+2) = ...: some triple must fail
    with pytest.raises((NonAssociative, BadInverse, BadUnit, NotAGroup, ComposabilityMismatch)):
        g = validate_groupoid([0], np.zeros(4, dtype=int), np.zeros(4, dtype=int),
                              [0, 3, 2, 1], t)


def test_associativity_error_carries_witness():
    # corrupt a product away from any unit or inverse pair on Z/5
    t = cyclic_group_table(5)
    t[1, 1] = 3
    with pytest.raises(NonAssociative) as exc:
        validate_groupoid([0], np.zeros(5, dtype=int), np.zeros(5, dtype=int),
                          [0, 4, 3, 2, 1], t)
    w = exc.value.witness()
    a, b, c = w["triple"]
    tt = cyclic_group_table(5)
    tt[1, 1] = 3
    assert tt[tt[a, b], c] != tt[a, tt[b, c]]


def test_from_group_z2():
    g = from_group(cyclic_group_table(2))
    assert g.n_arrows == 2 and len(g.units) == 1


def test_from_group_z4():
    g = from_group(cyclic_group_table(4))
    assert g.n_arrows == 4 and len(g.units) == 1


def test_from_group_missing_inverse():
    table = [[0, 1], [1, 1]]  # 1 has no inverse
    with pytest.raises(NotAGroup):
        from_group(table)


def test_pair_groupoid_counts():
    g = pair_groupoid(3)
    assert g.n_arrows == 9 and len(g.units) == 3


def test_pair_groupoid_one_point():
    g = pair_groupoid(1)
    assert g.n_arrows == 1 and g.units == (0,)


def test_pair_groupoid_rejects_zero():
    with pytest.raises(ValueError):
        pair_groupoid(0)


def test_pair_groupoid_2_isomorphic_to_delta():
    iso = find_isomorphism(pair_groupoid(2), delta())
    assert iso is not None
    # the bijection is a genuine morphism both ways
    m = morphism(pair_groupoid(2), delta(), iso)
    assert sorted(int(v) for v in m.map) == [0, 1, 2, 3]


def test_product_with_delta_trivial_base():
    prod, proj = product_with_delta(trivial_groupoid(1))
    assert find_isomorphism(prod, delta()) is not None
    assert is_full_morphism(proj)


def test_product_with_delta_z2():
    z2 = from_group(cyclic_group_table(2))
    prod, proj = product_with_delta(z2)
    assert prod.n_arrows == 8 and len(prod.units) == 2
    assert is_full_morphism(proj)


def test_inverse_is_involution_everywhere():
    for g in (delta(), pair_groupoid(3), from_group(cyclic_group_table(4))):
        assert np.array_equal(g.inverse[g.inverse], np.arange(g.n_arrows))


def test_morphism_preserves_inverse():
    z4 = from_group(cyclic_group_table(4))
    z2 = from_group(cyclic_group_table(2))
    quot = morphism(z4, z2, [0, 1, 0, 1])
    for g in range(4):
        assert quot(z4.inv(g)) == z2.inv(quot(g))


def test_morphism_accepts_trivial_and_rejects_unit_swap():
    z2 = from_group(cyclic_group_table(2))
    morphism(z2, z2, [0, 0])  # collapse onto the unit is a valid morphism
    with pytest.raises(MorphismInvalid):
        morphism(z2, z2, [1, 0])  # sends the unit to a non-unit


def test_subgroupoid_units_only():
    g = pair_groupoid(2)
    sub, incl = subgroupoid(g, g.units)
    assert sub.n_arrows == 2 and sub.units == (0, 1)
    assert [incl(a) for a in range(2)] == list(g.units)


def test_subgroupoid_second_factor_zero():
    z2 = from_group(cyclic_group_table(2))
    prod, proj = product_with_delta(z2)
    members = proj.preimage([0])
    sub, incl = subgroupoid(prod, members)
    assert find_isomorphism(sub, z2) is not None


def test_subgroupoid_not_closed():
    d = delta()
    with pytest.raises(NotClosed):
        subgroupoid(d, [0, 1, DELTA_ARROW])  # missing the inverse arrow


def test_full_morphism_projection_and_constant():
    z2 = from_group(cyclic_group_table(2))
    prod, proj = product_with_delta(z2)
    assert is_full_morphism(proj)
    const = morphism(prod, delta(), np.zeros(prod.n_arrows, dtype=int))
    assert not is_full_morphism(const)


def test_full_morphism_identity_on_delta():
    assert is_full_morphism(identity_morphism(delta()))


def test_full_morphism_rejects_wrong_codomain():
    z2 = from_group(cyclic_group_table(2))
    with pytest.raises(MorphismInvalid):
        is_full_morphism(identity_morphism(z2))


def test_gamma_sets():
    d = delta()
    assert is_gamma_set(ArrowSubset(d, d.units))
    assert is_gamma_set(ArrowSubset(d, (DELTA_ARROW, DELTA_ARROW_INV)))
    z2 = from_group(cyclic_group_table(2))
    assert not is_gamma_set(ArrowSubset(z2, (0, 1)))


def test_orbits_and_transitivity():
    assert pair_groupoid(3).is_transitive()
    assert not trivial_groupoid(2).is_transitive()
    assert len(trivial_groupoid(4).orbits()) == 4


def test_principality():
    assert pair_groupoid(3).is_principal()
    assert not from_group(cyclic_group_table(2)).is_principal()


def test_klein_four_table_is_a_group():
    g = from_group(klein_four_table())
    assert g.n_arrows == 4 and len(g.units) == 1
