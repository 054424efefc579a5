import numpy as np
import pytest

from sphere_sw.exceptions import DimensionError, QuadratureError, UnknownMethodError
from sphere_sw.estimators import is_estimate, mc_mean, repelled_estimate
from sphere_sw.nodes import QuadratureNodes
from sphere_sw.quadratures import (
    coulomb_force,
    make_nodes,
    nodes_grid_circle,
    nodes_iid,
    nodes_isvmf,
    nodes_poisson,
    nodes_unifortho,
    repel,
    sample_cue_circle,
    sample_spherical_ensemble,
    spiral_points,
)
from sphere_sw.sphere import PHASE_NODES, PHASE_REFERENCE, Seed, geodesic_nearest_neighbor
from sphere_sw.stats import bonferroni, ci_variance_chi2


def halfsphere(x):
    return (x[:, 0] > 0).astype(float)


def test_iid_nodes():
    nodes = nodes_iid(4, 30, 0)
    assert nodes.nodes.shape == (30, 4)
    assert nodes.is_uniform
    assert nodes.seed.phase == PHASE_NODES
    assert np.array_equal(nodes.nodes, nodes_iid(4, 30, 0).nodes)
    assert not np.array_equal(nodes.nodes, nodes_iid(4, 30, Seed(value=0, replication=1)).nodes)


def test_reference_phase_seed_is_kept():
    nodes = nodes_iid(3, 5, Seed(value=2, phase=PHASE_REFERENCE))
    assert nodes.seed.phase == PHASE_REFERENCE


def test_node_count_must_be_positive():
    with pytest.raises(ValueError):
        nodes_iid(3, 0, 0)


def test_grid_is_equally_spaced():
    x = nodes_grid_circle(12, 3).nodes
    steps = np.sum(x[1:] * x[:-1], axis=1)
    assert np.allclose(steps, np.cos(2 * np.pi / 12))


def test_spiral_single_point():
    x = spiral_points(1)
    azimuth = 1.8 * np.pi / 2
    assert azimuth == pytest.approx(2.8274, abs=1e-4)
    assert np.allclose(x, [[np.cos(azimuth), np.sin(azimuth), 0.0]])


def test_spiral_heights_are_equally_spaced():
    x = spiral_points(10)
    assert np.allclose(np.diff(x[:, 2]), -0.2)
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0)


def test_unifortho_frames():
    nodes = nodes_unifortho(3, 7, 5)
    assert nodes.size == 7
    assert nodes.params == {"frames": 2, "remainder": 1}
    frame = nodes.nodes[:3]
    assert np.allclose(frame @ frame.T, np.eye(3), atol=1e-12)


def test_poisson_nodes_carry_intensity_weights():
    nodes = nodes_poisson(3, 50.0, 0)
    assert nodes.importance
    assert nodes.intensity == 50.0
    assert nodes.params["process"] == "poisson"
    assert np.allclose(nodes.weights, 1 / 50)


def test_coulomb_forces_cancel_in_total():
    x = nodes_iid(3, 20, 1).nodes
    force, coincident = coulomb_force(x, 3.0)
    assert coincident == 0
    assert np.allclose(force.sum(axis=0), 0.0, atol=1e-9)


def test_repel_with_zero_step_keeps_positions():
    base = nodes_iid(3, 10, 2)
    moved = repel(base, epsilon=0.0)
    assert np.array_equal(moved.nodes, base.nodes)
    assert moved.method == "repelled:iid"
    assert moved.params["process"] == "binomial"
    assert moved.params["epsilon"] == 0.0


def test_antipodal_pair_is_a_fixed_point():
    base = QuadratureNodes.uniform(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]), "iid")
    moved = repel(base)
    assert np.allclose(moved.nodes, base.nodes)
    assert moved.params["s"] == 3.0
    assert moved.params["epsilon"] == 0.5


def test_coincident_pairs_are_reported():
    base = QuadratureNodes.uniform(np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), "iid")
    moved = repel(base)
    assert moved.params["coincident_pairs"] == 1
    assert "coincident_pairs=1" in moved.flags


def test_repel_keeps_poisson_metadata():
    moved = repel(nodes_poisson(3, 40.0, 1))
    assert moved.params["process"] == "poisson"
    assert moved.intensity == 40.0


def test_isvmf_self_normalized_weights_sum_to_one():
    nodes, values = nodes_isvmf(lambda x: np.ones(len(x)), 3, 50, 0, self_normalized=True)
    assert nodes.size == 50
    assert np.count_nonzero(nodes.phase == 0) == 10
    assert np.allclose(values, 1.0)
    assert is_estimate(None, nodes, values=values).value == pytest.approx(1.0, abs=1e-12)


def test_isvmf_fits_towards_the_support():
    nodes, _ = nodes_isvmf(halfsphere, 3, 200, 1)
    assert nodes.params["kappa"] > 0
    assert np.all(nodes.density > 0)
    assert np.allclose(nodes.weights[:40], 0.2 / 40)


def test_isvmf_rejects_negative_integrands():
    with pytest.raises(QuadratureError):
        nodes_isvmf(lambda x: -np.ones(len(x)), 3, 20, 0)


@pytest.mark.slow
def test_isvmf_is_unbiased():
    estimates = []
    for r in range(200):
        nodes, values = nodes_isvmf(halfsphere, 3, 100, Seed(value=4, replication=r))
        estimates.append(is_estimate(halfsphere, nodes, values=values).value)
    assert np.mean(estimates) == pytest.approx(0.5, abs=0.03)


def test_spherical_ensemble_on_s2():
    nodes = sample_spherical_ensemble(15, 0)
    assert nodes.nodes.shape == (15, 3)
    assert nodes.params["attempts"] >= 1
    assert np.allclose(np.linalg.norm(nodes.nodes, axis=1), 1.0, atol=1e-10)


def test_cue_on_the_circle():
    nodes = sample_cue_circle(12, 3)
    assert nodes.nodes.shape == (12, 2)
    assert nodes.is_uniform


def test_make_nodes_registry():
    assert make_nodes("repelled:iid", 3, 10, 0).method == "repelled:iid"
    harmonic = make_nodes("harmonic:2", 3, 5, 0)
    assert harmonic.size == 9
    assert harmonic.method == "harmonic:2"
    assert make_nodes("harmonic", 3, 10, 0).size == 16
    assert make_nodes("poisson", 3, 30, 0, rho=25.0).intensity == 25.0


def test_make_nodes_errors():
    with pytest.raises(UnknownMethodError):
        make_nodes("sobol", 3, 10, 0)
    with pytest.raises(DimensionError):
        make_nodes("grid2d", 3, 10, 0)
    with pytest.raises(DimensionError):
        make_nodes("spherical", 4, 10, 0)
    with pytest.raises(QuadratureError):
        make_nodes("isvmf", 3, 10, 0)


def test_repel_rejects_weighted_bases():
    from sphere_sw.dpp import nodes_ope

    with pytest.raises(QuadratureError):
        repel(nodes_ope(3, 6, 1))
    isvmf, _ = nodes_isvmf(halfsphere, 3, 200, 1)
    with pytest.raises(QuadratureError):
        repel(isvmf)
    with pytest.raises(QuadratureError):
        make_nodes("repelled:ope", 3, 6, 0)


def test_repel_pushes_a_tight_cluster_apart():
    points = np.array([[1.0, 0.0, 0.0], [1.0, 0.1, 0.0], [1.0, 0.0, 0.1]])
    base = QuadratureNodes.uniform(points / np.linalg.norm(points, axis=1, keepdims=True), "iid")
    moved = repel(base, epsilon=1e-5)
    assert geodesic_nearest_neighbor(moved.nodes).min() > geodesic_nearest_neighbor(base.nodes).min()


def test_repelled_iid_keeps_a_uniform_marginal():
    x = np.vstack([make_nodes("repelled:iid", 3, 100, Seed(value=6, replication=r)).nodes for r in range(200)])
    assert np.allclose(np.mean(x**2, axis=0), 1 / 3, atol=0.02)
    assert np.allclose(np.mean(x, axis=0), 0.0, atol=0.02)


@pytest.mark.slow
def test_single_point_spherical_ensemble_is_uniform():
    x = np.vstack([sample_spherical_ensemble(1, Seed(value=8, replication=r)).nodes for r in range(20_000)])
    assert np.allclose(np.mean(x**2, axis=0), 1 / 3, atol=0.01)
    assert np.allclose(np.mean(x, axis=0), 0.0, atol=0.015)


@pytest.mark.slow
def test_cue_pairs_sit_further_apart_than_independent_ones():
    def mean_gap(sampler):
        gaps = []
        for r in range(10_000):
            x = sampler(Seed(value=9, replication=r)).nodes
            gaps.append(np.arccos(np.clip(x[0] @ x[1], -1.0, 1.0)))
        return np.mean(gaps)

    # gap densities: (1 - cos t) / pi for CUE, 1 / pi for independent points on [0, pi]
    assert mean_gap(lambda seed: sample_cue_circle(2, seed)) == pytest.approx(np.pi / 2 + 2 / np.pi, abs=0.03)
    assert mean_gap(lambda seed: nodes_iid(2, 2, seed)) == pytest.approx(np.pi / 2, abs=0.04)


@pytest.mark.slow
def test_spherical_ensemble_spreads_more_than_iid():
    def mean_spacing(sampler):
        return np.mean([
            geodesic_nearest_neighbor(sampler(Seed(value=10, replication=r)).nodes).mean() for r in range(100)
        ])

    assert mean_spacing(lambda seed: sample_spherical_ensemble(200, seed)) > mean_spacing(
        lambda seed: nodes_iid(3, 200, seed)
    )


@pytest.mark.slow
def test_repulsion_lowers_the_halfsphere_variance():
    sizes = (100, 1000)
    level = bonferroni(0.969, 2 * len(sizes))
    for n in sizes:
        plain, repelled = [], []
        for r in range(1000):
            base = nodes_iid(3, n, Seed(value=12, replication=r))
            plain.append(mc_mean(halfsphere, base).value)
            repelled.append(repelled_estimate(halfsphere, repel(base, epsilon=1 / n)).value)
        assert np.var(repelled, ddof=1) < np.var(plain, ddof=1)
        assert not ci_variance_chi2(repelled, level).overlaps(ci_variance_chi2(plain, level))
