import numpy as np
import pytest

from fellbundles.bimodule import diagonal_algebra, full_matrix_algebra, scalars, star_algebra
from fellbundles.bundle import (
    ConcreteFellBundle,
    GroupoidAction,
    abstract_from_concrete,
    compacts_bundle,
    concretize,
    from_bimodule,
    from_cocycle,
    is_nondegenerate,
    is_saturated,
    pullback,
    restrict_to_units,
    semidirect,
    spot_check,
    swap_action_on_two_scalars,
    trivial_cocycle,
    validate_action,
    validate_fell_bundle,
)
from fellbundles.errors import (
    ActionInvalid,
    ClosureViolation,
    CocycleIdentityViolated,
    InvolutionViolation,
    NotFull,
    NotNormalized,
)
from fellbundles.groupoid import (
    cyclic_group_table,
    delta,
    from_group,
    identity_morphism,
    morphism,
    pair_groupoid,
    trivial_groupoid,
)
from fellbundles.matrixcore import span, spectral_norm


def delta_scalar_bundle():
    """Scalar fibers over the two-point transitive groupoid (a stock fixture)."""
    return from_bimodule(scalars(), scalars(), [np.eye(1)])


def line_bundle_over_group(table):
    g = from_group(table)
    return from_cocycle(g, trivial_cocycle(g))


def z2_line_bundle():
    return line_bundle_over_group(cyclic_group_table(2))


# -- validation --------------------------------------------------------------


def test_compacts_bundle_over_three_points_validates():
    b = compacts_bundle([1, 2, 3])
    report = validate_fell_bundle(b)
    assert report.closure_residual <= 1e-12


def test_bimodule_bundle_over_delta_validates():
    b = delta_scalar_bundle()
    validate_fell_bundle(b)
    assert b.fiber_dim(2) == 1 and b.fiber_dim(3) == 1


def test_closure_violation_detected():
    # enlarge E_delta so that E_delta . E_delta* escapes E_1
    d = delta()
    fibers = {
        0: span([np.eye(1)]),
        1: span([np.eye(2)]),  # unit fiber too small: scalars inside M2
        2: span([np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])]),
        3: span([np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])]),
    }
    b = ConcreteFellBundle(d, {0: 1, 1: 2}, fibers)
    with pytest.raises(ClosureViolation) as exc:
        validate_fell_bundle(b)
    assert {exc.value.alpha, exc.value.beta} == {2, 3}


def test_involution_violation_detected():
    # fiber at the arrow and at its inverse have mismatched spans
    d = delta()
    fibers = {
        0: span([np.eye(1)]),
        1: span([np.eye(1)]),
        2: span([np.eye(1)]),
        3: span([], shape=(1, 1)),
    }
    b = ConcreteFellBundle(d, {0: 1, 1: 1}, fibers)
    with pytest.raises(InvolutionViolation):
        validate_fell_bundle(b)


def test_spot_checks_pass_on_compacts_bundle():
    rng = np.random.default_rng(0)
    rep = spot_check(compacts_bundle([2, 3]), rng, samples=50)
    assert rep.positivity_failures == 0
    assert rep.cstar_identity_residual <= 1e-9
    assert rep.involution_residual <= 1e-9


# -- predicates ----------------------------------------------------------------


def z2_bundle_with_zero_fiber():
    z2 = from_group(cyclic_group_table(2))
    e = z2.units[0]
    g = 1 - e
    fibers = {e: span([np.eye(1)]), g: span([], shape=(1, 1))}
    b = ConcreteFellBundle(z2, {e: 1}, fibers)
    validate_fell_bundle(b)
    return b


def test_nondegeneracy():
    assert is_nondegenerate(z2_line_bundle())
    assert is_nondegenerate(compacts_bundle([1, 2]))
    assert not is_nondegenerate(z2_bundle_with_zero_fiber())


def test_saturation():
    assert is_saturated(compacts_bundle([1, 2]))
    assert is_saturated(z2_line_bundle())
    assert not is_saturated(z2_bundle_with_zero_fiber())


def test_restrict_to_units():
    b = compacts_bundle([1, 2])
    algs = restrict_to_units(b)
    dims = sorted(a.dim for a in algs.values())
    assert dims == [1, 4]


# -- constructors ---------------------------------------------------------------


def test_from_bimodule_column_case():
    # A = scalars, C = column space C^2, B = M2: saturated bundle over delta
    a = scalars()
    b_alg = full_matrix_algebra(2)
    cols = [np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])]
    bundle = from_bimodule(a, b_alg, cols)
    assert is_saturated(bundle)
    assert bundle.fiber_dim(2) == 2


def test_from_bimodule_rejects_non_full():
    a = scalars()
    b_alg = full_matrix_algebra(2)
    with pytest.raises(NotFull):
        from_bimodule(a, b_alg, [np.array([[1.0], [0.0]])])  # c c* misses M2


def test_compacts_bundle_dims():
    b = compacts_bundle([1, 2])
    got = sorted(b.fiber_dim(a) for a in range(4))
    assert got == [1, 2, 2, 4]
    assert is_saturated(b) and is_nondegenerate(b)


def test_compacts_bundle_one_one_is_delta_like():
    b = compacts_bundle([1, 1])
    assert all(b.fiber_dim(a) == 1 for a in range(4))


def test_pullback_identity_is_same_bundle():
    b = compacts_bundle([1, 2])
    p = pullback(identity_morphism(b.groupoid), b)
    for a in range(4):
        assert p.fiber_dim(a) == b.fiber_dim(a)


def test_pullback_quotient_line_bundle():
    # pull the Z/2 line bundle back along Z/4 -> Z/2: a line bundle over Z/4
    z4 = from_group(cyclic_group_table(4))
    z2 = from_group(cyclic_group_table(2))
    quot = morphism(z4, z2, [0, 1, 0, 1])
    e = z2_line_bundle()
    pb = pullback(quot, e)
    assert pb.groupoid.n_arrows == 4
    assert all(pb.fiber_dim(a) == e.fiber_dim(int(quot.map[a])) for a in range(4))
    validate_fell_bundle(pb)


# -- cocycle bundles --------------------------------------------------------------


def test_trivial_cocycle_on_z2_gives_regular_representation():
    # explicit oracle: the regular representation sends the unit to C.I and
    # the flip to C.swap inside 2x2 matrices
    b = z2_line_bundle()
    z2 = b.groupoid
    e = z2.units[0]
    g = 1 - e
    assert b.unit_dims[e] == 2
    ident = b.fibers[e]
    swap = b.fibers[g]
    assert ident.dim == swap.dim == 1
    assert ident.contains(np.eye(2))
    assert swap.contains(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_cocycle_identity_violation_detected():
    z4 = from_group(cyclic_group_table(4))
    sigma = trivial_cocycle(z4)
    sigma[(1, 1)] = -1.0 + 0.0j  # breaks the identity but not unit normalization
    with pytest.raises(CocycleIdentityViolated):
        from_cocycle(z4, sigma)


def test_cocycle_normalization_enforced():
    z2 = from_group(cyclic_group_table(2))
    sigma = trivial_cocycle(z2)
    e = z2.units[0]
    sigma[(e, e)] = -1.0 + 0.0j
    with pytest.raises((NotNormalized, CocycleIdentityViolated)):
        from_cocycle(z2, sigma)


def test_pauli_cocycle_on_klein_four():
    # sigma((a,b),(c,d)) = (-1)^{b c} twists Z/2 x Z/2; elements encoded 2a + b
    from fellbundles.groupoid import klein_four_table

    g = from_group(klein_four_table())

    def sigma(u, v):
        return (-1.0) ** ((u & 1) * ((v >> 1) & 1))

    b = from_cocycle(g, sigma)
    assert is_saturated(b)
    assert all(b.fiber_dim(a) == 1 for a in range(4))


# -- abstract bundles and concretize ----------------------------------------------


def test_concretize_roundtrip_preserves_fiber_norms():
    # norms from a second regular representation agree with the original fibers
    for bundle in (compacts_bundle([1, 2]), z2_line_bundle(), delta_scalar_bundle()):
        ab = abstract_from_concrete(bundle)
        again = concretize(ab)
        rng = np.random.default_rng(5)
        for a in range(bundle.groupoid.n_arrows):
            d = bundle.fiber_dim(a)
            if d == 0:
                continue
            for _ in range(5):
                c = rng.standard_normal(d) + 1j * rng.standard_normal(d)
                before = spectral_norm(bundle.fibers[a].from_coords(c))
                after = spectral_norm(
                    np.einsum("k,kmn->mn", c, again.abstract_images[a]))
                assert after == pytest.approx(before, rel=1e-9, abs=1e-9)


def test_concretize_one_point_scalar():
    b = from_cocycle(trivial_groupoid(1), {(0, 0): 1.0})
    assert b.unit_dims[0] == 1
    assert b.fibers[0].contains(np.eye(1))


# -- actions and semi-direct products ----------------------------------------------


def test_swap_action_validates():
    z2, action = swap_action_on_two_scalars()
    validate_action(action)


def test_semidirect_swap_gives_dimension_four():
    z2, action = swap_action_on_two_scalars()
    b = semidirect(z2, action)
    assert b.total_fiber_dim() == 4
    assert is_saturated(b)
    validate_fell_bundle(b)


def test_semidirect_trivial_action_is_line_bundle():
    z2 = from_group(cyclic_group_table(2))
    alg = scalars()
    maps = {a: np.eye(1, dtype=np.complex128) for a in range(2)}
    action = GroupoidAction(groupoid=z2, algebras={z2.units[0]: alg}, maps=maps)
    b = semidirect(z2, action)
    assert all(b.fiber_dim(a) == 1 for a in range(2))


def test_action_composition_law_enforced():
    z4 = from_group(cyclic_group_table(4))
    alg = diagonal_algebra(2)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    flip = np.zeros((2, 2), dtype=np.complex128)
    for i in range(2):
        flip[:, i] = alg.carrier.coords(swap @ alg.carrier.basis_matrix(i) @ swap)
    ident = np.eye(2, dtype=np.complex128)
    # generator acts by flip, but flip^2 = id while the relation needs order 4
    maps = {0: ident, 1: flip, 2: flip, 3: ident}
    action = GroupoidAction(groupoid=z4, algebras={0: alg}, maps=maps)
    with pytest.raises(ActionInvalid) as exc:
        validate_action(action)
    assert exc.value.condition in ("c", "d")


def test_semidirect_restricted_to_units_is_input_bundle():
    z2, action = swap_action_on_two_scalars()
    b = semidirect(z2, action)
    e = z2.units[0]
    alg = b.unit_algebra(e)
    assert alg.dim == action.algebras[e].dim
