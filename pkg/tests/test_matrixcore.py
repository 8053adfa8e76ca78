import numpy as np
import pytest

from fellbundles.matrixcore import (
    EPS,
    MatrixSubspace,
    SpanBuilder,
    Tolerance,
    is_positive,
    random_matrix,
    solve_on_span,
    span,
    spectral_norm,
)


def test_spectral_norm_identity():
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0)


def test_spectral_norm_nilpotent():
    assert spectral_norm([[0, 2], [0, 0]]) == pytest.approx(2.0)


def test_spectral_norm_against_eigenvalue_oracle():
    # |M| should match sqrt(largest eigenvalue of M^* M), computed independently
    rng = np.random.default_rng(7)
    for n in (2, 5, 11, 20):
        m = random_matrix(rng, n, n)
        oracle = float(np.sqrt(np.linalg.eigvalsh(m.conj().T @ m)[-1]))
        assert spectral_norm(m) == pytest.approx(oracle, rel=1e-10)


def test_cstar_identity_of_spectral_norm():
    rng = np.random.default_rng(11)
    for n in (3, 8, 20):
        m = random_matrix(rng, n, n)
        assert spectral_norm(m.conj().T @ m) == pytest.approx(
            spectral_norm(m) ** 2, rel=1e-10)


def test_is_positive_psd_by_construction():
    rng = np.random.default_rng(3)
    a = random_matrix(rng, 4, 4)
    assert is_positive(a.conj().T @ a)


def test_is_positive_rejects_indefinite():
    assert not is_positive(np.diag([1.0, -1.0]))


def test_is_positive_zero_matrix():
    assert is_positive(np.zeros((3, 3)))


def test_is_positive_requires_square():
    with pytest.raises(ValueError):
        is_positive(np.zeros((2, 3)))


def test_span_collinear_generators():
    s = span([np.eye(2), 2 * np.eye(2)])
    assert s.dim == 1


def test_span_matrix_units():
    units = [np.zeros((2, 2)) for _ in range(4)]
    for k, (i, j) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        units[k][i, j] = 1.0
    assert span(units).dim == 4


def test_span_zero():
    assert span([np.zeros((2, 2))]).dim == 0
    assert span([], shape=(2, 2)).dim == 0


def test_span_orthonormal_and_idempotent():
    rng = np.random.default_rng(5)
    s = span([random_matrix(rng, 3, 4) for _ in range(6)])
    gram = s.basis.conj() @ s.basis.T
    assert np.allclose(gram, np.eye(s.dim), atol=1e-12)
    again = span(s.matrices())
    assert again.dim == s.dim


def test_projection_is_idempotent():
    rng = np.random.default_rng(9)
    s = span([random_matrix(rng, 3, 3) for _ in range(4)])
    m = random_matrix(rng, 3, 3)
    once = s.project(m)
    twice = s.project(once)
    assert np.linalg.norm(once - twice) <= 1e-12 * max(1.0, np.linalg.norm(m))


def test_contains_basis_element_and_orthogonal_complement():
    rng = np.random.default_rng(13)
    mats = [random_matrix(rng, 2, 3) for _ in range(2)]
    s = span(mats)
    assert s.contains(s.basis_matrix(0))
    # build a unit-norm matrix orthogonal to s by projecting out
    m = random_matrix(rng, 2, 3)
    m = m - s.project(m)
    m /= np.linalg.norm(m)
    assert not s.contains(m)


def test_contains_perturbed_basis_element():
    # residual computed directly: a 1e-12 bump passes at eps = 1e-9
    s = span([np.eye(2)])
    bumped = s.basis_matrix(0) + 1e-12
    residual = np.linalg.norm(bumped - s.project(bumped))
    assert residual <= 1e-9
    assert s.contains(bumped, eps=1e-9)


def test_contains_shape_mismatch():
    s = span([np.eye(2)])
    with pytest.raises(ValueError):
        s.contains(np.eye(3))


def test_contains_against_lstsq_oracle():
    rng = np.random.default_rng(17)
    mats = [random_matrix(rng, 3, 3) for _ in range(3)]
    s = span(mats)
    m = random_matrix(rng, 3, 3)
    stack = np.stack([x.reshape(-1) for x in mats]).T
    coef, *_ = np.linalg.lstsq(stack, m.reshape(-1), rcond=None)
    oracle = float(np.linalg.norm(stack @ coef - m.reshape(-1)))
    assert s.residual(m) == pytest.approx(oracle, abs=1e-10)


def test_solve_on_span_consistent():
    sm = solve_on_span([np.eye(2), 2 * np.eye(2)], [np.eye(2), 2 * np.eye(2)])
    assert sm.residual <= 1e-12
    assert np.allclose(sm.apply(3 * np.eye(2)), 3 * np.eye(2))


def test_solve_on_span_inconsistent_residual():
    # least squares sends I to 1.5 I, so each equation misses by 0.5 |I|;
    # relative to max(1, |out|) the worst equation sits at exactly 0.5 for 1x1
    sm = solve_on_span([np.eye(1), np.eye(1)], [np.eye(1), 2 * np.eye(1)])
    assert sm.residual >= 0.5 - 1e-12


def test_solve_on_span_empty():
    with pytest.raises(ValueError):
        solve_on_span([], [])


def test_span_builder_matches_span_dim():
    rng = np.random.default_rng(23)
    mats = [random_matrix(rng, 2, 2) for _ in range(3)]
    mats.append(mats[0] + mats[1])  # dependent
    builder = SpanBuilder((2, 2))
    hits = [builder.add(m) for m in mats]
    assert builder.dim == span(mats).dim == 3
    assert hits == [True, True, True, False]


def test_tolerance_validation():
    with pytest.raises(ValueError):
        Tolerance(eps=0.0)


def test_subspace_coords_roundtrip():
    rng = np.random.default_rng(29)
    s = span([random_matrix(rng, 2, 2) for _ in range(2)])
    m = s.from_coords(np.array([1.0 + 2.0j, -0.5j]))
    assert np.allclose(s.coords(m), [1.0 + 2.0j, -0.5j])
