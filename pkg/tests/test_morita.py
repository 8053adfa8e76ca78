import numpy as np
import pytest

from fellbundles.algebra import Section, algebra_image, operator_norm, unit_section
from fellbundles.bimodule import full_matrix_algebra, scalars
from fellbundles.bundle import (
    compacts_bundle,
    from_bimodule,
    from_cocycle,
    semidirect,
    trivial_cocycle,
    trivial_line_bundle,
    validate_fell_bundle,
)
from fellbundles.errors import (
    FullnessFailed,
    MorphismNotFull,
    NotAProjection,
    NotSaturated,
    NotTransitive,
)
from fellbundles.groupoid import (
    cyclic_group_table,
    delta,
    find_isomorphism,
    from_group,
    morphism,
    pair_groupoid,
    trivial_groupoid,
)
from fellbundles.matrixcore import span, spectral_norm
from fellbundles.morita import (
    build_d_bundle,
    build_f_bundle,
    corner_projections,
    decompose_full_morphism,
    derive_action_sigma,
    is_full_corner,
    kv_isomorphism,
    linking_algebra,
    morita_via_full_morphism,
    stabilization_equivalence,
)


def delta_scalar_bundle():
    return from_bimodule(scalars(), scalars(), [np.eye(1)])


def z2_line_bundle():
    return trivial_line_bundle(from_group(cyclic_group_table(2)))


def delta_identity():
    return morphism(delta(), delta(), np.arange(4))


# -- linking algebras -------------------------------------------------------


def test_linking_algebra_of_scalars_is_m2():
    img, cert = linking_algebra(scalars(), scalars(), [np.eye(1)])
    assert img.dim == 4
    assert img.center_dim() == 1
    assert cert.corner_dims == (1, 1)


def test_linking_algebra_of_m2_over_itself():
    a = full_matrix_algebra(2)
    img, cert = linking_algebra(a, a, a.carrier)
    assert img.dim == 16
    assert cert.corner_dims == (4, 4)


def test_linking_algebra_rejects_zero_bimodule():
    from fellbundles.errors import NotFull

    with pytest.raises(NotFull):
        linking_algebra(scalars(), scalars(), span([], shape=(1, 1)))


# -- corners -----------------------------------------------------------------


def test_corner_projections_on_delta_bundle():
    b = delta_scalar_bundle()
    dec = decompose_full_morphism(delta_identity(), b)
    m0, m1 = corner_projections(dec)
    assert m0.values == {0: 1.0, 1: 0.0}
    assert m1.values == {0: 0.0, 1: 1.0}


def test_corner_projection_non_full_rejected():
    z2 = from_group(cyclic_group_table(2))
    b = z2_line_bundle()
    const = morphism(z2, delta(), np.zeros(2, dtype=int))
    with pytest.raises(MorphismNotFull):
        decompose_full_morphism(const, b)


def test_is_full_corner_unit_projection():
    img = algebra_image(delta_scalar_bundle())
    ok, wit = is_full_corner(img, img.unit_matrix())
    assert ok and len(wit) >= 1


def test_is_full_corner_m2_rank_one():
    # inside M2, the corner at e11 is full: e_i1 p e_1j span everything
    b = compacts_bundle([2])
    img = algebra_image(b)
    assert img.dim == 4
    p = np.diag([1.0, 0.0]).astype(np.complex128)
    ok, wit = is_full_corner(img, p)
    assert ok


def test_is_full_corner_detects_non_full():
    # two disconnected points: the indicator of one is a central projection
    g = trivial_groupoid(2)
    b = trivial_line_bundle(g)
    img = algebra_image(b)
    p = np.diag([1.0, 0.0]).astype(np.complex128)
    ok, _ = is_full_corner(img, p)
    assert not ok


def test_is_full_corner_rejects_non_projection():
    img = algebra_image(delta_scalar_bundle())
    with pytest.raises(NotAProjection):
        is_full_corner(img, 0.5 * img.unit_matrix())


# -- the corner theorem ---------------------------------------------------------


def test_theorem_on_compacts_bundle_dims_one_two():
    b = compacts_bundle([1, 2])
    iso = find_isomorphism(b.groupoid, delta())
    phi = morphism(b.groupoid, delta(), iso)
    rng = np.random.default_rng(3)
    cert = morita_via_full_morphism(phi, b, rng=rng, samples=5)
    assert cert.ambient.dim == 9
    assert sorted(cert.corner_dims) == [1, 4]
    assert cert.projection_residual() <= 1e-9


def test_theorem_on_delta_scalar_bundle():
    cert = morita_via_full_morphism(delta_identity(), delta_scalar_bundle())
    assert cert.ambient.dim == 4
    assert cert.corner_dims == (1, 1)


def test_theorem_rejects_unsaturated_bundle():
    from fellbundles.bundle import ConcreteFellBundle

    d = delta()
    fibers = {0: span([np.eye(1)]), 1: span([np.eye(1)]),
              2: span([], shape=(1, 1)), 3: span([], shape=(1, 1))}
    b = ConcreteFellBundle(d, {0: 1, 1: 1}, fibers)
    validate_fell_bundle(b)
    with pytest.raises(NotSaturated):
        morita_via_full_morphism(delta_identity(), b)


def test_certificate_witnesses_respan_the_ambient(tmp_path):
    b = compacts_bundle([1, 2])
    phi = morphism(b.groupoid, delta(), find_isomorphism(b.groupoid, delta()))
    cert = morita_via_full_morphism(phi, b)
    mats = cert.ambient.carrier.matrices()
    for i, p in enumerate(cert.projections):
        gens = [mats[j] @ p @ mats[k] for j, k in cert.witnesses[i]]
        regained = span(gens, shape=(cert.ambient.total, cert.ambient.total))
        assert regained.dim == cert.ambient.dim


# -- the action on module compacts ------------------------------------------------


def test_sigma_on_z2_line_bundle_is_swap_conjugation():
    b = z2_line_bundle()
    sigma = derive_action_sigma(b)
    z2 = b.groupoid
    e = z2.units[0]
    g = 1 - e
    assert max(sigma.residuals.values()) <= 1e-9
    # sigma at the unit is the identity
    m2 = sigma.algebras[e]
    for i in range(m2.dim):
        basis = m2.carrier.basis_matrix(i)
        assert np.allclose(sigma.apply(e, basis), basis, atol=1e-9)
    # sigma at the flip conjugates by the block swap of V_e = E_e + E_g
    vr = sigma.modules[e]
    swap = np.zeros((2, 2), dtype=np.complex128)
    pos_e, pos_g = vr.block_position(e), vr.block_position(g)
    swap[int(vr.row_offsets[pos_e]), int(vr.row_offsets[pos_g])] = 1.0
    swap[int(vr.row_offsets[pos_g]), int(vr.row_offsets[pos_e])] = 1.0
    for i in range(m2.dim):
        basis = m2.carrier.basis_matrix(i)
        assert np.allclose(sigma.apply(g, basis), swap @ basis @ swap, atol=1e-9)
    # involutive: applying the flip twice is the identity
    comp = sigma.maps[g] @ sigma.maps[g]
    assert np.allclose(comp, np.eye(m2.dim), atol=1e-9)


def test_sigma_composition_law_on_pair_groupoid():
    g = pair_groupoid(3)
    b = trivial_line_bundle(g)
    sigma = derive_action_sigma(b)
    for a, c in g.composable_pairs:
        p = int(g.compose_table[a, c])
        lhs = sigma.maps[p]
        rhs = sigma.maps[int(a)] @ sigma.maps[int(c)]
        assert np.allclose(lhs, rhs, atol=1e-8)


def test_sigma_preserves_products_and_adjoints():
    rng = np.random.default_rng(11)
    b = z2_line_bundle()
    sigma = derive_action_sigma(b)
    z2 = b.groupoid
    e = z2.units[0]
    g = 1 - e
    alg = sigma.algebras[e]
    for _ in range(10):
        c1 = rng.standard_normal(alg.dim) + 1j * rng.standard_normal(alg.dim)
        c2 = rng.standard_normal(alg.dim) + 1j * rng.standard_normal(alg.dim)
        m1, m2 = alg.carrier.from_coords(c1), alg.carrier.from_coords(c2)
        assert np.allclose(sigma.apply(g, m1 @ m2),
                           sigma.apply(g, m1) @ sigma.apply(g, m2), atol=1e-8)
        assert np.allclose(sigma.apply(g, m1.conj().T),
                           sigma.apply(g, m1).conj().T, atol=1e-8)


# -- the compacts bundle and the double ---------------------------------------------


def test_f_bundle_of_z2_line_has_m2_fibers():
    b = z2_line_bundle()
    f = build_f_bundle(b)
    assert all(f.fiber_dim(a) == 4 for a in range(2))
    assert f.unit_dims[b.groupoid.units[0]] == 2


def test_f_bundle_over_trivial_groupoid_is_unit_compacts():
    g = trivial_groupoid(2)
    b = trivial_line_bundle(g)
    f = build_f_bundle(b)
    assert all(f.fiber_dim(x) == 1 for x in range(2))


def test_f_fiber_dims_product_of_module_dims_for_line_bundles():
    g = pair_groupoid(2)
    b = trivial_line_bundle(g)
    f = build_f_bundle(b)
    from fellbundles.algebra import fiber_module

    heights = {x: fiber_module(b, x).module.dim for x in g.units}
    for a in range(g.n_arrows):
        xr, xs = int(g.range[a]), int(g.source[a])
        assert f.fiber_dim(a) == heights[xr] * heights[xs]


def test_d_bundle_restrictions():
    b = z2_line_bundle()
    d, proj = build_d_bundle(b)
    f = build_f_bundle(b)
    g = b.groupoid
    for gamma in range(g.n_arrows):
        # second coordinate 0 restricts to the original bundle
        assert d.fiber_dim(gamma * 4 + 0) == b.fiber_dim(gamma)
        for m in b.fibers[gamma].matrices():
            assert d.fibers[gamma * 4 + 0].contains(m)
        # second coordinate 1 restricts to the compacts bundle
        assert d.fiber_dim(gamma * 4 + 1) == f.fiber_dim(gamma)
        for m in f.fibers[gamma].matrices():
            assert d.fibers[gamma * 4 + 1].contains(m)


def test_d_bundle_connecting_fiber_dims_match_balanced_tensor():
    from fellbundles.algebra import fiber_module
    from fellbundles.bimodule import balanced_tensor, make_module

    b = z2_line_bundle()
    d, _ = build_d_bundle(b)
    g = b.groupoid
    e = g.units[0]
    vr = fiber_module(b, e)
    for gamma in range(g.n_arrows):
        got = d.fiber_dim(gamma * 4 + 2)
        # independent route: Gram-quotient dimension of V (x) E_gamma
        fiber_as_module = make_module(b.fibers[gamma], b.unit_algebra(e))
        t = balanced_tensor(vr.module, fiber_as_module)
        assert got == t.dim


# -- stabilization ------------------------------------------------------------------


def test_stabilization_of_z2_line_bundle():
    rng = np.random.default_rng(17)
    res = stabilization_equivalence(z2_line_bundle(), rng=rng, samples=5)
    cert = res.certificate
    assert cert.ambient.dim == 18
    assert sorted(cert.corner_dims) == [2, 8]
    assert cert.residuals["sigma_residual"] <= 1e-9
    assert res.compacts_iso.ok()


def test_stabilization_of_one_point_scalar_degenerates_to_linking():
    b = from_cocycle(trivial_groupoid(1), {(0, 0): 1.0})
    res = stabilization_equivalence(b)
    cert = res.certificate
    assert cert.ambient.dim == 4
    assert cert.corner_dims == (1, 1)
    assert cert.ambient.center_dim() == 1  # the linking algebra M2


def test_stabilization_of_compacts_bundle():
    res = stabilization_equivalence(compacts_bundle([1, 2]))
    cert = res.certificate
    assert cert.corner_dims[0] == 9
    # corner 1 collects the compacts of the two fiber modules
    f = res.semidirect_bundle
    assert cert.corner_dims[1] == sum(f.fiber_dim(a)
                                      for a in range(f.groupoid.n_arrows))


# -- transitive case ------------------------------------------------------------------


def test_kv_isomorphism_on_pair3_line_bundle():
    g = pair_groupoid(3)
    b = trivial_line_bundle(g)
    mat, target, inv_res = kv_isomorphism(b, g.units[0])
    assert target.dim == 9
    assert mat.shape == (9, 9)
    assert inv_res <= 1e-9


def test_kv_isomorphism_on_delta_bundle():
    b = delta_scalar_bundle()
    mat, target, _ = kv_isomorphism(b, 0)
    assert target.dim == 4


def test_kv_isomorphism_rejects_disconnected():
    g = trivial_groupoid(2)
    b = trivial_line_bundle(g)
    with pytest.raises(NotTransitive):
        kv_isomorphism(b, 0)
