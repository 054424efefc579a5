from __future__ import annotations

import logging
import time

import numpy as np
from scipy.special import eval_legendre, gammaln

from sphere_sw.exceptions import NumericalDegeneracyError, QuadratureError, RejectionBudgetError
from sphere_sw.harmonics import jacobi_eval, polynomial_space_dim
from sphere_sw.nodes import QuadratureNodes
from sphere_sw.quadratures import node_seed
from sphere_sw.sphere import Seed, check_dimension, coordinate_box, spherical_coords_map, uniform_sphere

logger = logging.getLogger(__name__)

PROPOSAL_BUDGET = 1_000_000
MAX_RANK = 2000
DEGENERACY_TOL = 1e-8


class ProjectionKernel:
    """Rank-N projection kernel relative to a reference probability measure.

    Subclasses provide ``kernel``, ``diagonal`` and ``propose``, the latter drawing
    from the normalized diagonal K(x, x)/N against the reference measure.
    """

    reference = "sphere"

    def __init__(self, rank: int, dimension: int) -> None:
        if rank < 1:
            raise QuadratureError(f"Projection kernel rank must be >= 1, got {rank}")
        self.rank = rank
        self.dimension = dimension

    @property
    def space_dimension(self) -> int:
        return self.dimension

    @property
    def constant_diagonal(self) -> bool:
        return False

    def kernel(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def diagonal(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def propose(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def to_sphere(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map sampled points to S^{d-1} with the density of the reference w.r.t. uniform."""
        return points, np.ones(points.shape[0])


class HarmonicKernel(ProjectionKernel):
    """Projection onto polynomials of degree <= L restricted to S^{d-1}.

    K(x, y) = pi_L / binom(L + (d-1)/2, L) * P_L^{((d-1)/2, (d-1)/2 - 1)}(<x, y>).
    """

    def __init__(self, d: int, degree: int) -> None:
        check_dimension(d)
        if degree < 0:
            raise QuadratureError(f"Harmonic ensemble degree must be >= 0, got {degree}")
        super().__init__(polynomial_space_dim(d, degree), d)
        self.degree = degree
        self._a = (d - 1) / 2
        log_binom = gammaln(degree + self._a + 1) - gammaln(self._a + 1) - gammaln(degree + 1)
        self._scale = self.rank * np.exp(-log_binom)

    @property
    def constant_diagonal(self) -> bool:
        return True

    def _of_inner(self, t: np.ndarray) -> np.ndarray:
        return self._scale * jacobi_eval(self.degree, self._a, self._a - 1, np.clip(t, -1.0, 1.0))

    def kernel(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.asarray(self._of_inner(np.atleast_2d(x) @ np.atleast_2d(y).T), dtype=float)

    def diagonal(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(x).shape[0], float(self._of_inner(np.array(1.0))))

    def propose(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return uniform_sphere(rng, self.dimension, n)


def harmonic_ensemble_kernel(d: int, degree: int, *, max_rank: int = MAX_RANK) -> HarmonicKernel:
    """Harmonic-ensemble kernel of rank pi_L; checks K(x, x) = pi_L."""
    kernel = HarmonicKernel(d, degree)
    if kernel.rank > max_rank:
        raise QuadratureError(f"Harmonic ensemble rank {kernel.rank} exceeds the maximum {max_rank}")
    e1 = np.zeros((1, d))
    e1[0, 0] = 1.0
    diag = float(kernel.kernel(e1, e1)[0, 0])
    if abs(diag - kernel.rank) > 1e-8 * kernel.rank:
        raise NumericalDegeneracyError(f"Harmonic kernel diagonal {diag} differs from its rank {kernel.rank}")
    return kernel


def degree_for_size(d: int, n: int) -> int:
    """Smallest L with pi_L >= n."""
    degree = 0
    while polynomial_space_dim(d, degree) < n:
        degree += 1
    return degree


def graded_multi_indices(m: int, count: int) -> np.ndarray:
    """First ``count`` multi-indices of length m in graded lexicographic order."""

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in compositions(total - first, parts - 1):
                yield (first, *rest)

    out: list[tuple[int, ...]] = []
    degree = 0
    while len(out) < count:
        out.extend(compositions(degree, m))
        degree += 1
    return np.array(out[:count], dtype=int).reshape(count, m)


class LegendreProductKernel(ProjectionKernel):
    """Orthogonal-polynomial ensemble on the spherical chart box.

    Eigenfunctions are products of normalized Legendre polynomials in the box
    coordinates rescaled to [-1, 1]; the reference is the uniform law on the box.
    """

    reference = "box"

    def __init__(self, d: int, rank: int) -> None:
        check_dimension(d)
        super().__init__(rank, d)
        self.upper = coordinate_box(d)
        self.orders = graded_multi_indices(d - 1, rank)
        self._norms = np.sqrt(2.0 * self.orders + 1.0)

    @property
    def space_dimension(self) -> int:
        return self.dimension - 1

    def _rescale(self, u: np.ndarray) -> np.ndarray:
        return 2.0 * np.atleast_2d(u) / self.upper - 1.0

    def eigenfunctions(self, u: np.ndarray) -> np.ndarray:
        """(phi_k(u))_k as an (n, rank) array."""
        t = self._rescale(u)
        out = np.ones((t.shape[0], self.rank))
        for j in range(t.shape[1]):
            out *= self._norms[:, j] * eval_legendre(self.orders[:, j][None, :], t[:, j][:, None])
        return out

    def kernel(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.eigenfunctions(x) @ self.eigenfunctions(y).T

    def diagonal(self, x: np.ndarray) -> np.ndarray:
        return np.sum(self.eigenfunctions(x) ** 2, axis=1)

    def _legendre_coordinate(self, rng: np.random.Generator, order: int, n: int) -> np.ndarray:
        """Draw n points from (2 order + 1) P_order(t)^2 dt/2 on [-1, 1] by rejection."""
        out = np.empty(n)
        filled = 0
        tries = 0
        while filled < n:
            batch = max(2 * (n - filled) * (2 * order + 1), 16)
            t = rng.uniform(-1.0, 1.0, batch)
            keep = t[rng.random(batch) < eval_legendre(order, t) ** 2]
            take = min(keep.size, n - filled)
            out[filled : filled + take] = keep[:take]
            filled += take
            tries += batch
            if tries > PROPOSAL_BUDGET * max(n, 1):
                raise RejectionBudgetError(f"Legendre coordinate sampler of order {order} exhausted its budget")
        return out

    def propose(self, rng: np.random.Generator, n: int) -> np.ndarray:
        picks = rng.integers(0, self.rank, size=n)
        t = np.empty((n, self.space_dimension))
        for j in range(self.space_dimension):
            orders = self.orders[picks, j]
            for order in np.unique(orders):
                rows = np.flatnonzero(orders == order)
                t[rows, j] = self._legendre_coordinate(rng, int(order), rows.size)
        return (t + 1.0) * self.upper / 2.0

    def to_sphere(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return spherical_coords_map(points)


def ope_spherical_kernel(d: int, n_target: int) -> LegendreProductKernel:
    """Legendre product kernel of rank exactly ``n_target`` on the chart box."""
    if n_target < 1:
        raise ValueError(f"Target rank must be >= 1, got {n_target}")
    return LegendreProductKernel(d, n_target)


def _batch_size(rank: int, k: int) -> int:
    return int(min(4096, max(16, 2 * rank // max(rank - k, 1))))


def sample_projection_dpp(
    kernel: ProjectionKernel,
    seed: Seed | int,
    *,
    budget: int = PROPOSAL_BUDGET,
    self_normalized: bool = False,
) -> QuadratureNodes:
    """Exact sampling by the chain rule.

    Point k is proposed from K(x, x)/N and accepted with probability
    (K(x, x) - k_x^T G^{-1} k_x) / K(x, x), where G is the kernel Gram matrix of the
    accepted points; G^{-1} is updated by Schur complements. Weights are
    J(x)/K(x, x) with J the reference-to-uniform density (1/N for a constant diagonal).
    For a non-constant diagonal these weights are unbiased; ``self_normalized``
    rescales them to sum to 1, which makes constants exact at the price of a bias.
    """
    seed = node_seed(seed)
    rng = seed.rng()
    n = kernel.rank
    start = time.perf_counter()
    points = np.empty((n, kernel.space_dimension))
    ginv = np.zeros((0, 0))
    total = 0

    for k in range(n):
        used = 0
        while True:
            batch = _batch_size(n, k)
            cand = kernel.propose(rng, batch)
            diag = kernel.diagonal(cand)
            if k:
                kx = kernel.kernel(cand, points[:k])
                cond = diag - np.einsum("ij,jk,ik->i", kx, ginv, kx)
            else:
                kx = None
                cond = diag.copy()
            scale = np.maximum(diag, 1.0)
            if np.any(cond < -DEGENERACY_TOL * scale) or np.any(cond > diag + 1e-10 * scale):
                raise NumericalDegeneracyError(
                    f"Conditional density outside [0, K(x, x)] at step {k + 1} of {n} "
                    f"(min {float(cond.min()):.3e})"
                )
            hits = np.flatnonzero(rng.random(batch) * diag < cond)
            if hits.size:
                i = int(hits[0])
                used += i + 1
                break
            used += batch
            if used >= budget:
                raise RejectionBudgetError(f"Chain rule used {used} proposals for point {k + 1} of {n}")
        total += used
        points[k] = cand[i]
        schur = cond[i]
        if k:
            g_b = ginv @ kx[i]
            top = ginv + np.outer(g_b, g_b) / schur
            ginv = np.block([[top, -g_b[:, None] / schur], [-g_b[None, :] / schur, np.array([[1.0 / schur]])]])
        else:
            ginv = np.array([[1.0 / schur]])

    logger.debug("Chain rule: %d points from %d proposals", n, total)
    sphere_points, jac = kernel.to_sphere(points)
    params: dict[str, float | int | str | bool] = {"rank": n, "proposals": total}
    elapsed = time.perf_counter() - start
    if kernel.constant_diagonal:
        return QuadratureNodes.uniform(sphere_points, "dpp", seed=seed, params=params, generation_time=elapsed)
    weights = jac / kernel.diagonal(points)
    if self_normalized:
        weights = weights / weights.sum()
    params["self_normalized"] = self_normalized
    return QuadratureNodes(
        nodes=sphere_points,
        weights=weights,
        method="dpp",
        seed=seed,
        importance=not self_normalized,
        params=params,
        generation_time=elapsed,
    )


def nodes_harmonic(d: int, degree: int, seed: Seed | int, *, max_rank: int = MAX_RANK) -> QuadratureNodes:
    nodes = sample_projection_dpp(harmonic_ensemble_kernel(d, degree, max_rank=max_rank), seed)
    return nodes.replace(method=f"harmonic:{degree}", params={**nodes.params, "degree": degree})


def nodes_ope(d: int, n: int, seed: Seed | int, *, self_normalized: bool = False) -> QuadratureNodes:
    """Multivariate OPE pulled back to the sphere. f = 1 integrates to exactly 1 only with ``self_normalized``."""
    nodes = sample_projection_dpp(ope_spherical_kernel(d, n), seed, self_normalized=self_normalized)
    return nodes.replace(method="ope")
