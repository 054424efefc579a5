from __future__ import annotations

import logging
import time
from typing import Callable

import numpy as np
import scipy.linalg

from sphere_sw.exceptions import DimensionError, NumericalDegeneracyError, QuadratureError, UnknownMethodError
from sphere_sw.nodes import QuadratureNodes
from sphere_sw.sphere import (
    PHASE_NODES,
    PHASE_PROBLEM,
    Seed,
    check_dimension,
    as_seed,
    haar_orthogonal_batch,
    stereographic_inverse,
    uniform_sphere,
)
from sphere_sw.vmf import KAPPA_MAX, fit_symmetric_vmf

logger = logging.getLogger(__name__)

SPIRAL_CONSTANT = 1.8
COINCIDENT_TOL = 1e-12
SPHERICAL_RETRIES = 3


def node_seed(seed: Seed | int) -> Seed:
    """Move a problem-phase seed to the node phase; other phases are kept."""
    seed = as_seed(seed)
    return seed.with_phase(PHASE_NODES) if seed.phase == PHASE_PROBLEM else seed


def _check_count(n: int) -> None:
    if n < 1:
        raise ValueError(f"Node count must be >= 1, got {n}")


def nodes_iid(d: int, n: int, seed: Seed | int) -> QuadratureNodes:
    """Plain Monte Carlo: n i.i.d. uniform directions."""
    check_dimension(d)
    _check_count(n)
    seed = node_seed(seed)
    start = time.perf_counter()
    x = uniform_sphere(seed.rng(), d, n)
    return QuadratureNodes.uniform(x, "iid", seed=seed, generation_time=time.perf_counter() - start)


def nodes_grid_circle(n: int, seed: Seed | int) -> QuadratureNodes:
    """Randomly shifted regular grid on the circle: angles -pi + 2 pi k / n + U."""
    _check_count(n)
    seed = node_seed(seed)
    start = time.perf_counter()
    shift = seed.rng().uniform(-np.pi, np.pi)
    angles = -np.pi + 2.0 * np.pi * np.arange(n) / n + shift
    x = np.column_stack([np.cos(angles), np.sin(angles)])
    return QuadratureNodes.uniform(x, "grid2d", seed=seed, generation_time=time.perf_counter() - start)


def spiral_points(n: int) -> np.ndarray:
    """Generalized spiral on S^2 before rotation.

    z_i = 1 - (2i - 1)/n, polar angle arccos(z_i), azimuth 1.8 sqrt(n) times the
    polar angle modulo 2 pi.
    """
    _check_count(n)
    z = 1.0 - (2.0 * np.arange(1, n + 1) - 1.0) / n
    polar = np.arccos(z)
    azimuth = np.mod(SPIRAL_CONSTANT * np.sqrt(n) * polar, 2.0 * np.pi)
    s = np.sin(polar)
    return np.column_stack([np.cos(azimuth) * s, np.sin(azimuth) * s, z])


def nodes_spiral_sphere(n: int, seed: Seed | int) -> QuadratureNodes:
    """Spiral points on S^2 with one shared Haar rotation."""
    seed = node_seed(seed)
    start = time.perf_counter()
    q = haar_orthogonal_batch(seed.rng(), 3, 1)[0]
    x = spiral_points(n) @ q.T
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return QuadratureNodes.uniform(x, "spiral3d", seed=seed, generation_time=time.perf_counter() - start)


def nodes_unifortho(d: int, n: int, seed: Seed | int) -> QuadratureNodes:
    """Columns of floor(n/d) i.i.d. Haar frames, plus the first n mod d columns of one more."""
    check_dimension(d)
    _check_count(n)
    seed = node_seed(seed)
    start = time.perf_counter()
    frames = -(-n // d)
    q = haar_orthogonal_batch(seed.rng(), d, frames)
    x = np.transpose(q, (0, 2, 1)).reshape(frames * d, d)[:n]
    return QuadratureNodes.uniform(
        x,
        "unifortho",
        seed=seed,
        params={"frames": n // d, "remainder": n % d},
        generation_time=time.perf_counter() - start,
    )


def nodes_poisson(d: int, rho: float, seed: Seed | int) -> QuadratureNodes:
    """Poisson(rho) many uniform points, carrying intensity weights 1/rho."""
    check_dimension(d)
    if not rho > 0:
        raise ValueError(f"Intensity must be positive, got {rho}")
    seed = node_seed(seed)
    start = time.perf_counter()
    rng = seed.rng()
    count = int(rng.poisson(rho))
    if count == 0:
        raise QuadratureError(f"Poisson draw with intensity {rho} produced no points")
    x = uniform_sphere(rng, d, count)
    return QuadratureNodes(
        nodes=x,
        weights=np.full(count, 1.0 / rho),
        method="poisson",
        seed=seed,
        importance=True,
        intensity=float(rho),
        params={"process": "poisson"},
        generation_time=time.perf_counter() - start,
    )


def coulomb_force(x: np.ndarray, s: float) -> tuple[np.ndarray, int]:
    """F(x_i) = sum_{j != i} (x_i - x_j) / ||x_i - x_j||^s.

    Pairs closer than COINCIDENT_TOL contribute nothing; their count is returned.
    """
    diff = x[:, None, :] - x[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(dist, np.inf)
    close = dist < COINCIDENT_TOL
    coincident = int(np.count_nonzero(close) // 2)
    dist[close] = np.inf
    return np.einsum("ijk,ij->ik", diff, dist ** (-s)), coincident


def repel(nodes: QuadratureNodes, epsilon: float | None = None, s: float | None = None) -> QuadratureNodes:
    """One simultaneous Coulomb step x -> (x + eps F(x)) / ||x + eps F(x)||.

    Defaults: eps = 1/N, s = d. Weights and the base process metadata are kept.
    Only equal-weight bases (and Poisson initializations) can be repelled.
    """
    n, d = nodes.size, nodes.dimension
    if n < 2:
        raise QuadratureError(f"Repulsion needs at least two nodes, got {n}")
    eps = 1.0 / n if epsilon is None else float(epsilon)
    power = float(d) if s is None else float(s)
    if eps < 0:
        raise ValueError(f"Repulsion step must be >= 0, got {eps}")
    if not power > 0:
        raise ValueError(f"Force exponent must be positive, got {power}")

    process = nodes.params.get("process")
    if process != "poisson" and (nodes.density is not None or not nodes.is_uniform):
        raise QuadratureError(
            f"Cannot repel {nodes.method!r} nodes: the repelled estimator needs a uniform-intensity base, "
            "these carry importance or density weights"
        )

    start = time.perf_counter()
    force, coincident = coulomb_force(nodes.nodes, power)
    if eps == 0:
        moved = nodes.nodes.copy()
    else:
        moved = nodes.nodes + eps * force
        moved /= np.linalg.norm(moved, axis=1, keepdims=True)
    flags = list(nodes.flags)
    if coincident:
        logger.info("Repulsion dropped %d coincident pairs", coincident)
        flags.append(f"coincident_pairs={coincident}")
    params = dict(nodes.params)
    params.update({"epsilon": eps, "s": power, "base": nodes.method, "coincident_pairs": coincident})
    params.setdefault("process", "binomial")
    return nodes.replace(
        nodes=moved,
        method=f"repelled:{nodes.method}",
        params=params,
        flags=flags,
        generation_time=nodes.generation_time + time.perf_counter() - start,
    )


def nodes_isvmf(
    integrand: Callable[[np.ndarray], np.ndarray],
    d: int,
    n: int,
    seed: Seed | int,
    r: float = 0.2,
    *,
    kappa_max: float = KAPPA_MAX,
    self_normalized: bool = False,
) -> tuple[QuadratureNodes, np.ndarray]:
    """Two-phase fitted importance sampling.

    floor(r n) uniform pilots fit a symmetrized vMF proposal g; the remaining
    n2 = n - floor(r n) nodes come from g. Pilot weights are r / floor(r n) and
    adaptive weights (1 - r) / (n2 g(x)), so sum w_i f(x_i) is unbiased.
    With ``self_normalized`` the adaptive weights are rescaled to sum to 1 - r;
    only then is a constant integrand recovered exactly. The default weights are
    unbiased but reproduce constants only in expectation.

    Returns the nodes and the integrand values at every node (the pilots are
    evaluated during the fit and are not re-evaluated).
    """
    check_dimension(d)
    if not 0 < r < 1:
        raise ValueError(f"Pilot fraction must lie in (0, 1), got {r}")
    if n < 2:
        raise ValueError(f"Two-phase sampling needs n >= 2, got {n}")
    n1 = int(np.floor(r * n))
    if n1 < 1 or n1 >= n:
        raise QuadratureError(f"Pilot fraction {r} leaves no room for both phases with n={n}")
    n2 = n - n1
    seed = node_seed(seed)
    rng = seed.rng()

    start = time.perf_counter()
    pilots = uniform_sphere(rng, d, n1)
    gen_time = time.perf_counter() - start
    pilot_values = np.asarray(integrand(pilots), dtype=float)
    if np.any(pilot_values < 0):
        raise QuadratureError("Importance sampling requires a nonnegative integrand")

    start = time.perf_counter()
    fit = fit_symmetric_vmf(pilots, pilot_values, kappa_max)
    adaptive = fit.proposal.sample(rng, n2)
    density = fit.proposal.density(adaptive)
    gen_time += time.perf_counter() - start
    if np.any(density <= 0) or not np.all(np.isfinite(density)):
        raise NumericalDegeneracyError("Proposal density vanished at a sampled node")

    adaptive_weights = (1.0 - r) / (n2 * density)
    if self_normalized:
        adaptive_weights *= (1.0 - r) / adaptive_weights.sum()
    flags = ["uniform_fallback"] if fit.degenerate else []
    if fit.proposal.kappa >= kappa_max:
        flags.append("kappa_capped")

    nodes = QuadratureNodes(
        nodes=np.vstack([pilots, adaptive]),
        weights=np.concatenate([np.full(n1, r / n1), adaptive_weights]),
        method="isvmf",
        seed=seed,
        importance=True,
        density=np.concatenate([np.ones(n1), density]),
        phase=np.concatenate([np.zeros(n1), np.ones(n2)]),
        params={"r": r, "kappa": fit.proposal.kappa, "resultant": fit.resultant, "self_normalized": self_normalized},
        flags=flags,
        generation_time=gen_time,
    )
    adaptive_values = np.asarray(integrand(adaptive), dtype=float)
    return nodes, np.concatenate([pilot_values, adaptive_values])


def _complex_gaussian(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_spherical_ensemble(n: int, seed: Seed | int) -> QuadratureNodes:
    """Spherical ensemble on S^2: generalized eigenvalues of (B, A), lifted stereographically.

    A singular or non-finite pencil is redrawn on a fresh substream, at most
    SPHERICAL_RETRIES times.
    """
    _check_count(n)
    seed = node_seed(seed)
    start = time.perf_counter()
    for attempt in range(SPHERICAL_RETRIES + 1):
        rng = seed.child(attempt).rng()
        a = _complex_gaussian(rng, (n, n))
        b = _complex_gaussian(rng, (n, n))
        pivots = np.abs(np.diag(scipy.linalg.qr(a, mode="r")[0]))
        if pivots.min() < 1e-12 * np.linalg.norm(a, 2):
            logger.info("Spherical ensemble: singular pencil, redrawing (attempt %d)", attempt + 1)
            continue
        eig = scipy.linalg.eigvals(b, a)
        if eig.shape[0] == n and np.all(np.isfinite(eig)):
            x = stereographic_inverse(eig)
            return QuadratureNodes.uniform(
                x,
                "spherical",
                seed=seed,
                params={"attempts": attempt + 1},
                generation_time=time.perf_counter() - start,
            )
        logger.info("Spherical ensemble: non-finite eigenvalues, redrawing (attempt %d)", attempt + 1)
    raise NumericalDegeneracyError(f"Spherical ensemble pencil stayed singular after {SPHERICAL_RETRIES} retries")


def haar_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar unitary matrix: QR of a complex Gaussian matrix with R's diagonal phases removed."""
    q, r = np.linalg.qr(_complex_gaussian(rng, (n, n)))
    diag = np.diag(r)
    phases = diag / np.abs(diag)
    return q * phases[None, :]


def sample_cue_circle(n: int, seed: Seed | int) -> QuadratureNodes:
    """Eigenvalue phases of a Haar unitary, as points of S^1."""
    _check_count(n)
    seed = node_seed(seed)
    start = time.perf_counter()
    eig = np.linalg.eigvals(haar_unitary(seed.rng(), n))
    angles = np.angle(eig)
    x = np.column_stack([np.cos(angles), np.sin(angles)])
    return QuadratureNodes.uniform(x, "cue", seed=seed, generation_time=time.perf_counter() - start)


def _require_dimension(name: str, d: int, expected: int) -> None:
    if d != expected:
        raise DimensionError(f"Method {name!r} is defined for d={expected}, got d={d}")


METHODS = ("iid", "grid2d", "spiral3d", "unifortho", "isvmf", "spherical", "cue", "harmonic", "ope", "poisson")


def make_nodes(
    name: str,
    d: int,
    n: int,
    seed: Seed | int,
    *,
    integrand: Callable[[np.ndarray], np.ndarray] | None = None,
    **params: float | int | bool,
) -> QuadratureNodes:
    """Generate nodes by registry name.

    Names: iid | grid2d | spiral3d | unifortho | repelled:<base> | isvmf | spherical |
    cue | harmonic[:<L>] | ope | poisson. ``harmonic`` without a degree uses the smallest
    L with pi_L >= n. ``isvmf`` needs the integrand and returns nodes only; use
    :func:`nodes_isvmf` directly to reuse the pilot evaluations.
    """
    from sphere_sw import dpp

    if name.startswith("repelled:"):
        base = make_nodes(name.split(":", 1)[1], d, n, seed, integrand=integrand, **params)
        return repel(base, params.get("epsilon"), params.get("s"))
    if name == "iid":
        return nodes_iid(d, n, seed)
    if name == "grid2d":
        _require_dimension(name, d, 2)
        return nodes_grid_circle(n, seed)
    if name == "spiral3d":
        _require_dimension(name, d, 3)
        return nodes_spiral_sphere(n, seed)
    if name == "unifortho":
        return nodes_unifortho(d, n, seed)
    if name == "poisson":
        return nodes_poisson(d, float(params.get("rho", n)), seed)
    if name == "isvmf":
        if integrand is None:
            raise QuadratureError("Method 'isvmf' needs the integrand to fit its proposal")
        return nodes_isvmf(
            integrand, d, n, seed, float(params.get("r", 0.2)), self_normalized=bool(params.get("self_normalized", False))
        )[0]
    if name == "spherical":
        _require_dimension(name, d, 3)
        return sample_spherical_ensemble(n, seed)
    if name == "cue":
        _require_dimension(name, d, 2)
        return sample_cue_circle(n, seed)
    if name == "harmonic" or name.startswith("harmonic:"):
        degree = int(name.split(":", 1)[1]) if ":" in name else dpp.degree_for_size(d, n)
        return dpp.nodes_harmonic(d, degree, seed, max_rank=int(params.get("max_rank", dpp.MAX_RANK)))
    if name == "ope":
        return dpp.nodes_ope(d, n, seed, self_normalized=bool(params.get("self_normalized", False)))
    raise UnknownMethodError(f"Unknown quadrature method {name!r}; known: {', '.join(METHODS)}, repelled:<base>")
