import numpy as np
import pytest

from sphere_sw import harmonics
from sphere_sw.exceptions import BasisConstructionError, HarmonicsError, SphereDomainError
from sphere_sw.harmonics import (
    build_basis,
    build_fundamental_set,
    gegenbauer_eval,
    harmonic_dim,
    harmonic_dims,
    jacobi_eval,
    polynomial_space_asymptotic,
    polynomial_space_dim,
    zonal_from_inner,
    zonal_kernel,
)
from sphere_sw.quadratures import nodes_grid_circle
from sphere_sw.sphere import sample_uniform_sphere


def test_harmonic_dimensions():
    assert [harmonic_dim(3, ell) for ell in range(5)] == [1, 3, 5, 7, 9]
    assert harmonic_dims(3, 2) == ([1, 3, 5], 9)
    assert harmonic_dims(2, 3) == ([1, 2, 2, 2], 7)
    assert polynomial_space_dim(4, 2) == 1 + 4 + 9


def test_polynomial_space_growth():
    ratio = polynomial_space_dim(3, 200) / polynomial_space_asymptotic(3, 200)
    assert ratio == pytest.approx(1.0, rel=0.02)


def test_gegenbauer_and_jacobi_at_one():
    assert gegenbauer_eval(2, 1.0, 1.0) == pytest.approx(3.0)
    assert jacobi_eval(3, 2.0, 1.0, 1.0) == pytest.approx(10.0)
    assert gegenbauer_eval(3, 0.0, 0.5) == pytest.approx((2 / 3) * np.cos(3 * np.arccos(0.5)))


def test_inner_product_outside_range():
    with pytest.raises(SphereDomainError):
        gegenbauer_eval(2, 1.0, 1.5)
    with pytest.raises(HarmonicsError):
        jacobi_eval(2, -1.0, 0.0, 0.3)


def test_zonal_diagonal_equals_dimension():
    assert zonal_from_inner(3, 2, 1.0) == pytest.approx(5.0)
    assert zonal_from_inner(5, 3, 1.0) == pytest.approx(harmonic_dim(5, 3))
    assert zonal_from_inner(2, 4, 1.0) == pytest.approx(2.0)


def test_zonal_kernel_is_symmetric():
    x, y = sample_uniform_sphere(4, 5, 0), sample_uniform_sphere(4, 5, 1)
    assert np.allclose(zonal_kernel(4, 3, x, y), zonal_kernel(4, 3, y, x))


def test_basis_is_orthonormal_on_s2(product_rule):
    rule = product_rule(8, 16)
    basis = build_basis(3, 3, seed=0)
    y = basis.eval_all(rule.nodes, include_constant=True)
    gram = y.T @ (rule.weights[:, None] * y)
    assert y.shape == (rule.size, 16)
    assert np.allclose(gram, np.eye(16), atol=1e-9)


def test_addition_formula():
    basis = build_basis(4, 2, seed=3)
    x, y = sample_uniform_sphere(4, 6, 0), sample_uniform_sphere(4, 6, 1)
    for ell in (1, 2):
        lhs = np.sum(basis.eval(ell, x) * basis.eval(ell, y), axis=1)
        assert np.allclose(lhs, zonal_kernel(4, ell, x, y), atol=1e-9)


def test_circle_basis_is_fourier():
    basis = build_basis(2, 3)
    rule = nodes_grid_circle(32, 0)
    y = basis.eval_all(rule.nodes, include_constant=True)
    assert y.shape == (32, 7)
    assert np.allclose(y.T @ y / 32, np.eye(7), atol=1e-12)


def test_single_vector_evaluation():
    basis = build_basis(3, 2)
    assert basis.eval(2, np.array([0.0, 0.0, 1.0])).shape == (5,)
    with pytest.raises(HarmonicsError):
        basis.eval(3, np.array([0.0, 0.0, 1.0]))


def test_degenerate_candidates_are_rejected():
    with pytest.raises(BasisConstructionError):
        build_fundamental_set(3, 1, 0, candidates=np.tile([0.0, 0.0, 1.0], (10, 1)))


def test_fundamental_set_from_candidates():
    fset = build_fundamental_set(3, 2, 0, candidates=sample_uniform_sphere(3, 100, 4))
    assert fset.size == 5
    assert fset.condition >= 1.0


def test_disk_cache_round_trip(tmp_path, monkeypatch):
    monkeypatch.setattr(harmonics, "_memory_cache", {})
    first = build_basis(3, 2, seed=5, cache_dir=tmp_path)
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["fundamental-d3-l1-s5-v1.npz", "fundamental-d3-l2-s5-v1.npz"]

    monkeypatch.setattr(harmonics, "_memory_cache", {})
    second = build_basis(3, 2, seed=5, cache_dir=tmp_path)
    assert second is not first
    assert np.array_equal(first.sets[2].points, second.sets[2].points)


def test_memory_cache_returns_the_same_basis():
    assert build_basis(3, 1, seed=9) is build_basis(3, 1, seed=9)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_squared_basis_sums_to_the_harmonic_dimension(d):
    basis = build_basis(d, 6, seed=1)
    x = sample_uniform_sphere(d, 25, 7)
    for ell in range(7):
        y = basis.eval(ell, x)
        assert np.allclose(np.sum(y**2, axis=1), harmonic_dim(d, ell), atol=1e-6)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_basis_parity(d):
    basis = build_basis(d, 5, seed=2)
    x = sample_uniform_sphere(d, 10, 8)
    for ell in range(1, 6):
        assert np.allclose(basis.eval(ell, -x), (-1) ** ell * basis.eval(ell, x), atol=1e-9)


def test_polynomial_space_approaches_its_leading_order():
    ratios = [polynomial_space_dim(3, L) / polynomial_space_asymptotic(3, L) for L in (10, 20, 40)]
    assert ratios == sorted(ratios, reverse=True)
    assert all(r > 1.0 for r in ratios)
    assert ratios[-1] == pytest.approx(1.0, rel=0.1)
    assert polynomial_space_dim(3, 2) == 9
