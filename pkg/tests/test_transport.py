from itertools import permutations

import numpy as np
import pytest
from scipy.stats import wasserstein_distance

from sphere_sw.exceptions import DimensionError, TransportError
from sphere_sw.measure import DiscreteMeasure, Projected1D
from sphere_sw.quadratures import make_nodes
from sphere_sw.sphere import sample_haar_orthogonal, sample_uniform_sphere
from sphere_sw.transport import SWIntegrand, estimate_sw, project_measure, wasserstein_1d


def test_w1_between_shifted_pairs():
    a = Projected1D.uniform(np.array([0.0, 2.0]))
    b = Projected1D.uniform(np.array([1.0, 3.0]))
    assert wasserstein_1d(a, b, p=1) == pytest.approx(1.0)


def test_dirac_against_two_atoms():
    a = Projected1D(positions=np.array([0.0]), weights=np.array([1.0]))
    b = Projected1D.uniform(np.array([2.0, 0.0]))
    assert wasserstein_1d(a, b, p=2) == pytest.approx(2.0)


@pytest.mark.parametrize("size", [1, 3, 6])
@pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
def test_uniform_matches_brute_force_assignment(size, p):
    rng = np.random.default_rng(size)
    xa, xb = rng.normal(size=size), rng.normal(size=size)
    best = min(np.mean(np.abs(xa - xb[list(perm)]) ** p) for perm in permutations(range(size)))
    assert wasserstein_1d(Projected1D.uniform(xa), Projected1D.uniform(xb), p) == pytest.approx(best, rel=1e-12)


def test_weighted_w1_matches_scipy():
    rng = np.random.default_rng(3)
    xa, xb = rng.normal(size=7), rng.normal(size=4) + 1.0
    wa, wb = rng.random(7), rng.random(4)
    wa, wb = wa / wa.sum(), wb / wb.sum()
    expected = wasserstein_distance(xa, xb, wa, wb)
    got = wasserstein_1d(Projected1D(positions=xa, weights=wa), Projected1D(positions=xb, weights=wb), p=1)
    assert got == pytest.approx(expected, rel=1e-10)


def test_order_below_one_is_rejected():
    a = Projected1D.uniform(np.zeros(2))
    with pytest.raises(TransportError):
        wasserstein_1d(a, a, p=0.5)


def test_ties_give_zero_self_distance():
    a = Projected1D.uniform(np.array([1.0, 1.0, 0.0]))
    assert wasserstein_1d(a, a) == 0.0


def test_dirac_sliced_distance_on_the_circle_grid():
    a, b = np.array([1.0, -2.0]), np.array([0.5, 1.0])
    mu, nu = DiscreteMeasure.dirac(a), DiscreteMeasure.dirac(b)
    nodes = make_nodes("grid2d", 2, 64, 0)
    result = estimate_sw(mu, nu, 2.0, nodes)
    expected = float(np.sum((a - b) ** 2)) / 2
    assert result.value == pytest.approx(expected, abs=1e-12)
    assert result.sw_value == pytest.approx(np.sqrt(expected), abs=1e-12)
    assert result.evaluations == 64


def test_batched_evaluation_matches_per_direction_transport():
    rng = np.random.default_rng(5)
    mu = DiscreteMeasure.uniform(rng.normal(size=(4, 3)))
    nu = DiscreteMeasure.uniform(rng.normal(size=(6, 3)))
    f = SWIntegrand(mu, nu, p=1.5)
    thetas = sample_uniform_sphere(3, 25, 1)
    batch = f(thetas)
    single = [wasserstein_1d(project_measure(mu, t), project_measure(nu, t), 1.5) for t in thetas]
    assert batch.shape == (25,)
    assert np.allclose(batch, single, rtol=1e-12)
    assert isinstance(f(thetas[0]), float)


def test_weighted_measures_use_the_quantile_coupling():
    rng = np.random.default_rng(8)
    w = rng.random(5)
    mu = DiscreteMeasure(atoms=rng.normal(size=(5, 3)), weights=w / w.sum())
    nu = DiscreteMeasure.uniform(rng.normal(size=(5, 3)))
    f = SWIntegrand(mu, nu, p=2)
    theta = sample_uniform_sphere(3, 1, 2)[0]
    expected = wasserstein_1d(project_measure(mu, theta), project_measure(nu, theta), 2)
    assert f(theta) == pytest.approx(expected)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        SWIntegrand(DiscreteMeasure.dirac(np.zeros(2)), DiscreteMeasure.dirac(np.zeros(3)))
    f = SWIntegrand(DiscreteMeasure.dirac(np.zeros(3)), DiscreteMeasure.dirac(np.ones(3)))
    with pytest.raises(DimensionError):
        f(np.array([[1.0, 0.0]]))


def test_lipschitz_bound_holds_for_diracs():
    x, y = np.array([1.0, -2.0, 0.5]), np.array([3.0, 1.0, -1.0])
    f = SWIntegrand(DiscreteMeasure.dirac(x), DiscreteMeasure.dirac(y))
    lip = f.lipschitz_constant()
    # p W (|x| + |y|) with W = |x - y|
    assert lip == pytest.approx(2 * np.linalg.norm(x - y) * (np.linalg.norm(x) + np.linalg.norm(y)))
    a, b = sample_uniform_sphere(3, 200, 1), sample_uniform_sphere(3, 200, 2)
    assert np.all(np.abs(f(a) - f(b)) <= lip * np.linalg.norm(a - b, axis=1) + 1e-12)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_sliced_distance_satisfies_the_triangle_inequality(p):
    rng = np.random.default_rng(11)
    mu, nu, rho = (DiscreteMeasure.uniform(rng.normal(size=(6, 3)) + shift) for shift in (0.0, 1.0, -0.5))
    nodes = make_nodes("iid", 3, 300, 2)

    def sw(a, b):
        return estimate_sw(a, b, p, nodes).sw_value

    assert sw(mu, nu) <= sw(mu, rho) + sw(rho, nu) + 1e-12
    assert sw(mu, rho) <= sw(mu, nu) + sw(nu, rho) + 1e-12


def test_sliced_distance_is_invariant_under_a_common_rotation():
    rng = np.random.default_rng(12)
    mu = DiscreteMeasure.uniform(rng.normal(size=(7, 3)))
    nu = DiscreteMeasure.uniform(rng.normal(size=(5, 3)) + 1.0)
    o = sample_haar_orthogonal(3, 4).matrix
    nodes = make_nodes("spiral3d", 3, 200, 0)
    rotated = nodes.replace(nodes=nodes.nodes @ o.T)
    base = estimate_sw(mu, nu, 2.0, nodes).value
    moved = estimate_sw(DiscreteMeasure.uniform(mu.atoms @ o.T), DiscreteMeasure.uniform(nu.atoms @ o.T), 2.0, rotated)
    assert moved.value == pytest.approx(base, rel=1e-10)


def test_integrand_is_even_in_the_direction():
    rng = np.random.default_rng(13)
    mu = DiscreteMeasure.uniform(rng.normal(size=(4, 3)))
    nu = DiscreteMeasure.uniform(rng.normal(size=(6, 3)))
    f = SWIntegrand(mu, nu, p=1.5)
    thetas = sample_uniform_sphere(3, 40, 3)
    assert np.allclose(f(-thetas), f(thetas), rtol=1e-12)


def test_iid_estimate_of_a_dirac_pair_is_within_three_standard_errors():
    a, b = np.array([1.0, 2.0, -1.0]), np.array([-0.5, 0.0, 2.0])
    f = SWIntegrand(DiscreteMeasure.dirac(a), DiscreteMeasure.dirac(b), p=2)
    nodes = make_nodes("iid", 3, 10_000, 21)
    values = f(nodes.nodes)
    se = values.std(ddof=1) / np.sqrt(values.size)
    result = estimate_sw(DiscreteMeasure.dirac(a), DiscreteMeasure.dirac(b), 2.0, nodes)
    assert result.value == pytest.approx(values.mean())
    assert abs(result.value - np.sum((a - b) ** 2) / 3) <= 3 * se
