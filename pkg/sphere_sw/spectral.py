from __future__ import annotations

import csv
import logging
import warnings
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg
from pydantic import BaseModel, computed_field
from scipy.special import gammaln

from sphere_sw.estimators import evaluate
from sphere_sw.exceptions import SpectralError, SphereSWWarning
from sphere_sw.harmonics import HarmonicBasis
from sphere_sw.nodes import QuadratureNodes
from sphere_sw.quadratures import nodes_spiral_sphere, nodes_unifortho
from sphere_sw.sphere import PHASE_INTEGRATION, Seed, check_dimension, as_seed, uniform_sphere

logger = logging.getLogger(__name__)

PROFILE_NODES = 100_000
FUNK_MC_NODES = 10_000
TAIL_TOL = 1e-3


def lambda_coeff(d: int, ell: int) -> float:
    """lambda_{2 ell} = Gamma((d-1)/2) Gamma(ell + 1/2) / (sqrt(pi) Gamma(ell + (d-1)/2))."""
    check_dimension(d)
    if ell < 0:
        raise SpectralError(f"Degree index must be >= 0, got {ell}")
    a = (d - 1) / 2
    return float(np.exp(gammaln(a) + gammaln(ell + 0.5) - 0.5 * np.log(np.pi) - gammaln(ell + a)))


def alpha_coeff(d: int, ell: int) -> float:
    """alpha_ell = (2 ell + 1) / (2 ell + d - 1); lambda_{2 ell} = alpha_{ell - 1} lambda_{2 ell - 2}."""
    check_dimension(d)
    if ell < 0:
        raise SpectralError(f"Degree index must be >= 0, got {ell}")
    return (2 * ell + 1) / (2 * ell + d - 1)


def lambda_table(d: int, count: int) -> np.ndarray:
    """lambda_0, lambda_2, ..., lambda_{2(count-1)} by the recurrence."""
    out = np.ones(count)
    for ell in range(1, count):
        out[ell] = alpha_coeff(d, ell - 1) * out[ell - 1]
    return out


def _orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """(d, d-1) matrix whose columns span u^perp."""
    return scipy.linalg.null_space(u[None, :])


def funk_transform_numeric(
    f: Callable[[np.ndarray], object],
    u: np.ndarray,
    m: int = 64,
    *,
    seed: Seed | int = 0,
    mc_nodes: int = FUNK_MC_NODES,
) -> float:
    """Average of f over the great subsphere orthogonal to u.

    d = 3: m-point trapezoidal rule on the great circle (exact for trigonometric
    polynomials of degree < m). d > 3: Monte Carlo with ``mc_nodes`` uniform points
    of the subsphere. d = 2: the two points orthogonal to u.
    """
    if m < 8:
        raise SpectralError(f"Circle resolution must be >= 8, got {m}")
    u = np.asarray(u, dtype=float).ravel()
    u = u / np.linalg.norm(u)
    d = u.shape[0]
    check_dimension(d)
    basis = _orthonormal_complement(u)
    if d == 2:
        v = basis[:, 0]
        points = np.vstack([v, -v])
    elif d == 3:
        angles = 2.0 * np.pi * np.arange(m) / m
        points = np.outer(np.cos(angles), basis[:, 0]) + np.outer(np.sin(angles), basis[:, 1])
    else:
        rng = as_seed(seed).with_phase(PHASE_INTEGRATION).rng()
        points = uniform_sphere(rng, d - 1, mc_nodes) @ basis.T
    return float(np.mean(evaluate(f, points)))


class SpectralProfile(BaseModel):
    """Per-degree energies mu_ell(f) = sum_k fhat(ell, k)^2 with the Funk coefficient tables."""

    dimension: int
    max_degree: int
    energies: list[float]
    coefficients: list[list[float]]
    mean: float
    variance: float

    @computed_field  # type: ignore[prop-decorator]
    @property
    def lambdas(self) -> list[float]:
        """lambda_{2 ell} for ell = 0..floor(max_degree / 2)."""
        return lambda_table(self.dimension, self.max_degree // 2 + 1).tolist()

    @computed_field  # type: ignore[prop-decorator]
    @property
    def alphas(self) -> list[float]:
        return [alpha_coeff(self.dimension, ell) for ell in range(self.max_degree + 1)]

    @property
    def tail(self) -> float:
        """Var f minus the captured energy sum_{ell >= 1} mu_ell."""
        return self.variance - float(sum(self.energies[1:]))

    def energy(self, ell: int) -> float:
        return self.energies[ell] if ell <= self.max_degree else 0.0

    def to_csv(self, path: str | Path) -> Path:
        """Write rows (degree, energy, lambda_{2 degree}, alpha_degree)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["degree", "energy", "lambda", "alpha"])
            for ell in range(self.max_degree + 1):
                writer.writerow([ell, repr(self.energies[ell]), repr(lambda_coeff(self.dimension, ell)), repr(self.alphas[ell])])
        return path


def profile_nodes(d: int, seed: Seed | int, n: int = PROFILE_NODES) -> QuadratureNodes:
    """Default integration rule: rotated spiral on S^2, UnifOrtho frames elsewhere."""
    seed = as_seed(seed).with_phase(PHASE_INTEGRATION)
    if d == 3:
        return nodes_spiral_sphere(n, seed)
    return nodes_unifortho(d, max(d, n - n % d), seed)


def spectral_profile(
    f: Callable[[np.ndarray], object],
    basis: HarmonicBasis,
    max_degree: int | None = None,
    nodes: QuadratureNodes | None = None,
    *,
    seed: Seed | int = 0,
    values: np.ndarray | None = None,
) -> SpectralProfile:
    """Estimate fhat(ell, k) = sum_i w_i f(x_i) Y_k^ell(x_i) and mu_ell = sum_k fhat(ell, k)^2."""
    top = basis.max_degree if max_degree is None else max_degree
    if top > basis.max_degree:
        raise SpectralError(f"Basis covers degree {basis.max_degree}, profile needs {top}")
    if nodes is None:
        nodes = profile_nodes(basis.dimension, seed)
    if nodes.dimension != basis.dimension:
        raise SpectralError(f"Nodes live on S^{nodes.dimension - 1}, basis on S^{basis.dimension - 1}")
    if values is None:
        values = evaluate(f, nodes.nodes)
    w = nodes.weights
    mean = float(w @ values)
    variance = max(float(w @ values**2) - mean**2, 0.0)
    coefficients = [[mean]]
    for ell in range(1, top + 1):
        coefficients.append((w * values @ basis.eval(ell, nodes.nodes)).tolist())
    energies = [float(np.sum(np.square(c))) for c in coefficients]
    profile = SpectralProfile(
        dimension=basis.dimension,
        max_degree=top,
        energies=energies,
        coefficients=coefficients,
        mean=mean,
        variance=variance,
    )
    if profile.tail < -TAIL_TOL * max(variance, 1e-300):
        logger.info("Profile energies exceed the variance estimate by %.3g", -profile.tail)
    return profile


class VariancePrediction(BaseModel):
    per_frame: float
    per_frame_check: float
    full: float
    frames: int
    remainder: int
    pair_covariance: float
    tail_bound: float


def _pair_covariance(profile: SpectralProfile) -> float:
    """Cov(f(X), f(Y)) for two orthogonal uniform directions: sum_{ell >= 1} (-1)^ell lambda_{2 ell} mu_{2 ell}."""
    return float(
        sum((-1) ** ell * lambda_coeff(profile.dimension, ell) * profile.energy(2 * ell) for ell in range(1, profile.max_degree // 2 + 1))
    )


def per_frame_alternative(profile: SpectralProfile) -> float:
    """Per-frame variance with consecutive even degrees paired.

    (1/d) Var f - ((d-1)/d) sum_{j>=1} lambda_{4j-2} (mu_{4j-2} - alpha_{2j-1} mu_{4j}),
    using lambda_{4j} = alpha_{2j-1} lambda_{4j-2}.
    """
    d = profile.dimension
    acc = 0.0
    j = 1
    while 4 * j - 2 <= profile.max_degree:
        acc += lambda_coeff(d, 2 * j - 1) * (
            profile.energy(4 * j - 2) - alpha_coeff(d, 2 * j - 1) * profile.energy(4 * j)
        )
        j += 1
    return profile.variance / d - (d - 1) / d * acc


def unifortho_variance_predict(profile: SpectralProfile, n: int | None = None) -> VariancePrediction:
    """Variance of the UnifOrtho estimator predicted from the spectral profile.

    One frame: (1/d) Var f - ((d-1)/d) sum_{ell>=1} (-1)^{ell-1} lambda_{2 ell} mu_{2 ell}.
    For N = k d + r nodes (k full frames, r columns of one more frame):
    [k (d Var f + d(d-1) c) + (r Var f + r(r-1) c)] / N^2 with c the pair covariance.
    """
    d = profile.dimension
    n = d if n is None else n
    if n < 1:
        raise SpectralError(f"Node count must be >= 1, got {n}")
    c = _pair_covariance(profile)
    per_frame = profile.variance / d + (d - 1) / d * c
    check = per_frame_alternative(profile)
    if abs(per_frame - check) > 1e-10 * max(1.0, abs(per_frame)):
        raise SpectralError(f"Variance forms disagree: {per_frame!r} vs {check!r}")
    tail = max(profile.tail, 0.0)
    # |lambda_{2 ell}| <= lambda at the first untracked even degree bounds the missing terms
    next_ell = profile.max_degree // 2 + 1
    tail_bound = lambda_coeff(d, next_ell) * tail
    if tail_bound > TAIL_TOL * max(profile.variance, 1e-300):
        warnings.warn(
            f"Spectral tail beyond degree {profile.max_degree} may shift the prediction by up to {tail_bound:.3g}",
            SphereSWWarning,
            stacklevel=2,
        )
    k, r = divmod(n, d)
    var = profile.variance
    full = (k * (d * var + d * (d - 1) * c) + (r * var + r * (r - 1) * c)) / n**2
    return VariancePrediction(
        per_frame=per_frame,
        per_frame_check=check,
        full=full,
        frames=k,
        remainder=r,
        pair_covariance=c,
        tail_bound=tail_bound,
    )
