from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import gammaln

from sphere_sw.exceptions import DimensionError, SphereDomainError

UNIT_TOL = 1e-12

# substream phases
PHASE_PROBLEM = 0
PHASE_NODES = 1
PHASE_REFERENCE = 2
PHASE_BASIS = 3
PHASE_INTEGRATION = 4


class Seed(BaseModel):
    """Counter-style seed: (value, replication, phase, substream) names one random stream.

    Streams are built from ``numpy.random.SeedSequence`` over the full key, so
    replication ``r`` of an experiment is reproducible regardless of execution order.
    """

    model_config = ConfigDict(frozen=True)

    value: int = Field(ge=0)
    replication: int = Field(default=0, ge=0)
    phase: int = Field(default=0, ge=0)
    substream: int = Field(default=0, ge=0)

    def replicate(self, r: int) -> Seed:
        return self.model_copy(update={"replication": r})

    def with_phase(self, phase: int) -> Seed:
        return self.model_copy(update={"phase": phase, "substream": 0})

    def child(self, substream: int) -> Seed:
        return self.model_copy(update={"substream": substream})

    def rng(self) -> np.random.Generator:
        key = [self.value, self.replication, self.phase, self.substream]
        return np.random.default_rng(np.random.SeedSequence(key))


def as_seed(seed: Seed | int) -> Seed:
    if isinstance(seed, Seed):
        return seed
    return Seed(value=int(seed))


class OrthogonalFrame(BaseModel):
    """A d x d orthogonal matrix; its columns are unit vectors."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray

    @field_validator("matrix")
    @classmethod
    def _check_orthogonal(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        if value.ndim != 2 or value.shape[0] != value.shape[1] or value.shape[0] < 2:
            raise DimensionError(f"Frame must be a square matrix of size >= 2, got shape {value.shape}")
        gram = value.T @ value
        if not np.allclose(gram, np.eye(value.shape[0]), atol=1e-10):
            raise DimensionError("Frame columns are not orthonormal within 1e-10")
        return value

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def columns(self) -> np.ndarray:
        """Columns as rows of an (d, d) array, i.e. the d unit vectors."""
        return self.matrix.T


def check_unit_vectors(x: np.ndarray, *, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate an (n, d) array of unit vectors and return it as float."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] < 2:
        raise DimensionError(f"Unit vectors need dimension d >= 2, got d={x.shape[1]}")
    norms = np.linalg.norm(x, axis=1)
    if np.any(np.abs(norms - 1.0) > tol):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise SphereDomainError(f"Vectors are not unit-norm (max deviation {worst:.3e})")
    return x


def check_dimension(d: int) -> None:
    if d < 2:
        raise DimensionError(f"Sphere dimension parameter d must be >= 2, got {d}")


def uniform_sphere(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_uniform_sphere(d: int, n: int, seed: Seed | int) -> np.ndarray:
    """Draw ``n`` i.i.d. uniform points on S^{d-1} as an (n, d) array."""
    check_dimension(d)
    if n < 1:
        raise ValueError(f"Sample count must be >= 1, got {n}")
    return uniform_sphere(as_seed(seed).rng(), d, n)


def haar_orthogonal_batch(rng: np.random.Generator, d: int, k: int) -> np.ndarray:
    """Draw ``k`` Haar orthogonal matrices, shape (k, d, d).

    QR of a Gaussian matrix, with the columns of Q flipped so that R has a positive
    diagonal; without this correction the law of Q is not Haar.
    """
    g = rng.standard_normal((k, d, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diagonal(r, axis1=1, axis2=2))
    signs[signs == 0] = 1.0
    return q * signs[:, None, :]


def sample_haar_orthogonal(d: int, seed: Seed | int) -> OrthogonalFrame:
    check_dimension(d)
    return OrthogonalFrame(matrix=haar_orthogonal_batch(as_seed(seed).rng(), d, 1)[0])


def apply_random_rotation(nodes: np.ndarray, seed: Seed | int) -> np.ndarray:
    """Rotate every node by one shared Haar-distributed orthogonal matrix."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if nodes.shape[0] == 0:
        raise DimensionError("Cannot rotate an empty node set")
    d = nodes.shape[1]
    check_dimension(d)
    q = sample_haar_orthogonal(d, seed).matrix
    return nodes @ q.T


def stereographic_inverse(z: complex | np.ndarray) -> np.ndarray:
    """Lift complex numbers to S^2; inverse of (x, y, w) -> (x + iy) / (1 - w).

    Returns shape (3,) for a scalar input and (n, 3) for an array input.
    """
    z_arr = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z_arr)):
        raise SphereDomainError("Stereographic lift requires finite complex numbers")
    r2 = np.abs(z_arr) ** 2
    out = np.stack([2.0 * z_arr.real, 2.0 * z_arr.imag, r2 - 1.0], axis=-1) / (r2 + 1.0)[..., None]
    return out


def stereographic(x: np.ndarray) -> np.ndarray:
    """Stereographic projection from the North pole, S^2 minus North -> C."""
    x = np.asarray(x, dtype=float)
    return (x[..., 0] + 1j * x[..., 1]) / (1.0 - x[..., 2])


def _mean_sine_power(k: int) -> float:
    """E[sin^k T] for T uniform on [0, pi]."""
    return float(np.exp(gammaln((k + 1) / 2) - gammaln(k / 2 + 1)) / np.sqrt(np.pi))


def coordinate_box(d: int) -> np.ndarray:
    """Upper corners of the chart box: phi in [0, 2pi], then d-2 polar angles in [0, pi]."""
    check_dimension(d)
    return np.array([2.0 * np.pi] + [np.pi] * (d - 2))


def spherical_coords_map(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map chart coordinates to S^{d-1} together with the change-of-measure factor.

    ``u`` has rows (phi, theta_1, ..., theta_{d-2}). The returned jacobian J satisfies
    E_box[g(u) J(u)] = integral of f over the uniform sphere measure when g = f o Phi,
    i.e. J is the product of sine powers normalized to have box average 1.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    d = u.shape[1] + 1
    upper = coordinate_box(d)
    if np.any(u < -UNIT_TOL) or np.any(u > upper + UNIT_TOL):
        raise SphereDomainError(f"Chart coordinates outside the box [0, {upper.tolist()}]")

    phi = u[:, 0]
    thetas = u[:, 1:]
    n = u.shape[0]
    x = np.empty((n, d))
    jac = np.ones(n)
    radius = np.ones(n)
    # polar angles fill coordinates from the last one down
    for j in range(d - 2):
        x[:, d - 1 - j] = radius * np.cos(thetas[:, j])
        s = np.sin(thetas[:, j])
        power = d - 2 - j
        jac *= s**power / _mean_sine_power(power)
        radius = radius * s
    x[:, 0] = radius * np.cos(phi)
    x[:, 1] = radius * np.sin(phi)
    return x, jac


def geodesic_nearest_neighbor(nodes: np.ndarray) -> np.ndarray:
    """Geodesic distance from each node to its nearest other node."""
    nodes = np.asarray(nodes, dtype=float)
    gram = np.clip(nodes @ nodes.T, -1.0, 1.0)
    np.fill_diagonal(gram, -np.inf)
    return np.arccos(np.clip(gram.max(axis=1), -1.0, 1.0))
