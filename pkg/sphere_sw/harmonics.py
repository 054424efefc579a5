from __future__ import annotations

import logging
import os
import threading
from math import comb
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.linalg import solve_triangular
from scipy.special import eval_chebyt, eval_gegenbauer, eval_jacobi, gammaln

from sphere_sw.exceptions import BasisConstructionError, DimensionError, HarmonicsError, SphereDomainError
from sphere_sw.sphere import PHASE_BASIS, Seed, as_seed, check_unit_vectors, uniform_sphere

logger = logging.getLogger(__name__)

CACHE_ENV = "SPHERE_SW_CACHE_DIR"
CACHE_VERSION = 1
POOL_FACTOR = 20
PIVOT_RTOL = 1e-8
# above this many pool-by-h kernel entries the greedy search is skipped
_GREEDY_LIMIT = 20_000_000


def _as_inner(t: float | np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1 + 1e-12):
        raise SphereDomainError(f"Inner products must lie in [-1, 1], got max |t| = {float(np.max(np.abs(t))):.6g}")
    return np.clip(t, -1.0, 1.0)


def gegenbauer_eval(ell: int, lam: float, t: float | np.ndarray) -> float | np.ndarray:
    """C_ell^lam(t). At lam = 0 the normalized limit (2/ell) T_ell is returned (1 for ell = 0)."""
    if ell < 0:
        raise HarmonicsError(f"Degree must be >= 0, got {ell}")
    if lam < 0:
        raise HarmonicsError(f"Gegenbauer parameter must be >= 0, got {lam}")
    t = _as_inner(t)
    if lam == 0:
        out = np.ones_like(t) if ell == 0 else (2.0 / ell) * eval_chebyt(ell, t)
    else:
        out = eval_gegenbauer(ell, lam, t)
    return float(out) if out.ndim == 0 else out


def jacobi_eval(degree: int, a: float, b: float, t: float | np.ndarray) -> float | np.ndarray:
    """P_degree^{(a, b)}(t)."""
    if a <= -1 or b <= -1:
        raise HarmonicsError(f"Jacobi parameters must exceed -1, got a={a}, b={b}")
    out = eval_jacobi(degree, a, b, np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def harmonic_dim(d: int, ell: int) -> int:
    """Dimension h_ell of the degree-ell spherical harmonics on S^{d-1}."""
    if d < 2:
        raise DimensionError(f"Sphere dimension parameter d must be >= 2, got {d}")
    if ell == 0:
        return 1
    if ell == 1:
        return d
    return comb(ell + d - 1, d - 1) - comb(ell + d - 3, d - 1)


def harmonic_dims(d: int, max_degree: int) -> tuple[list[int], int]:
    """(h_0, ..., h_L) and pi_L = sum h_ell, checked against the closed form."""
    if max_degree < 0:
        raise HarmonicsError(f"Maximal degree must be >= 0, got {max_degree}")
    dims = [harmonic_dim(d, ell) for ell in range(max_degree + 1)]
    pi_l = comb(max_degree + d - 1, d - 1) + comb(max_degree + d - 2, d - 1)
    if sum(dims) != pi_l:
        raise HarmonicsError(f"Harmonic dimension mismatch at d={d}, L={max_degree}: {sum(dims)} != {pi_l}")
    return dims, pi_l


def polynomial_space_dim(d: int, max_degree: int) -> int:
    return harmonic_dims(d, max_degree)[1]


def polynomial_space_asymptotic(d: int, max_degree: int) -> float:
    """Leading-order growth 2/Gamma(d) L^{d-1} of pi_L."""
    return float(np.exp(np.log(2.0) - gammaln(d) + (d - 1) * np.log(max_degree)))


def zonal_from_inner(d: int, ell: int, t: float | np.ndarray) -> np.ndarray:
    """Z_ell as a function of t = <x, y>."""
    t = _as_inner(t)
    if ell == 0:
        return np.ones_like(t)
    if d == 2:
        return 2.0 * eval_chebyt(ell, t)
    lam = (d - 2) / 2
    return ((ell + lam) / lam) * eval_gegenbauer(ell, lam, t)


def zonal_kernel(d: int, ell: int, x: np.ndarray, y: np.ndarray) -> float | np.ndarray:
    """Z_ell(x, y) for unit vectors; rows of ``x`` and ``y`` are paired by broadcasting."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != d or y.shape[-1] != d:
        raise DimensionError(f"Expected vectors of dimension {d}, got {x.shape[-1]} and {y.shape[-1]}")
    out = zonal_from_inner(d, ell, np.sum(x * y, axis=-1))
    return float(out) if out.ndim == 0 else out


class FundamentalSet(BaseModel):
    """h_ell points with the lower Cholesky factor of their zonal Gram matrix."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dimension: int
    degree: int
    points: np.ndarray
    factor: np.ndarray
    pivots: np.ndarray

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def condition(self) -> float:
        return float((self.pivots.max() / self.pivots.min()) ** 2)


def _greedy_cholesky(d: int, ell: int, pool: np.ndarray, h: int) -> tuple[np.ndarray, np.ndarray] | None:
    """Pick h pool indices by pivoted Cholesky (greedy determinant maximization).

    Returns the chosen indices and the pivots, or None when the residual diagonal
    drops below PIVOT_RTOL times the leading pivot first.
    """
    m = pool.shape[0]
    residual = np.full(m, float(harmonic_dim(d, ell)))
    columns = np.zeros((m, h))
    chosen = np.empty(h, dtype=int)
    pivots = np.empty(h)
    lead = None
    for k in range(h):
        j = int(np.argmax(residual))
        pivot = residual[j]
        if lead is None:
            lead = pivot
        if not pivot > PIVOT_RTOL * lead:
            return None
        kernel_col = zonal_from_inner(d, ell, pool @ pool[j])
        col = (kernel_col - columns[:, :k] @ columns[j, :k]) / np.sqrt(pivot)
        columns[:, k] = col
        residual = residual - col**2
        residual[chosen[:k]] = 0.0
        residual[j] = 0.0
        chosen[k] = j
        pivots[k] = np.sqrt(pivot)
    return chosen, pivots


def _factor(d: int, ell: int, points: np.ndarray) -> np.ndarray:
    gram = zonal_from_inner(d, ell, np.clip(points @ points.T, -1.0, 1.0))
    return np.linalg.cholesky(0.5 * (gram + gram.T))


def build_fundamental_set(
    d: int,
    ell: int,
    seed: Seed | int,
    *,
    candidates: np.ndarray | None = None,
    max_attempts: int = 5,
) -> FundamentalSet:
    """Build a fundamental set of degree ``ell`` on S^{d-1}.

    Greedy determinant maximization over a pool of POOL_FACTOR * h_ell uniform
    candidates (or the supplied ``candidates``), retried on fresh pools. When the
    pool would be too large for the greedy search, random h_ell-point sets are
    drawn and accepted once their Gram factorizes with all pivots above tolerance.
    """
    if d < 2:
        raise DimensionError(f"Sphere dimension parameter d must be >= 2, got {d}")
    if ell < 1:
        raise HarmonicsError(f"Fundamental sets are built for degree >= 1, got {ell}")
    h = harmonic_dim(d, ell)
    base = as_seed(seed).with_phase(PHASE_BASIS)

    if candidates is not None:
        pool = check_unit_vectors(candidates)
        picked = _greedy_cholesky(d, ell, pool, h) if pool.shape[0] >= h else None
        if picked is None:
            raise BasisConstructionError(
                f"Supplied candidates do not contain a fundamental set of degree {ell} (need {h} points)"
            )
        return _finish(d, ell, pool[picked[0]])

    greedy = POOL_FACTOR * h * h <= _GREEDY_LIMIT
    for attempt in range(max_attempts):
        rng = base.child(ell * 1000 + attempt).rng()
        if greedy:
            pool = uniform_sphere(rng, d, POOL_FACTOR * h)
            picked = _greedy_cholesky(d, ell, pool, h)
            if picked is not None:
                return _finish(d, ell, pool[picked[0]])
        else:
            try:
                return _finish(d, ell, uniform_sphere(rng, d, h))
            except BasisConstructionError:
                pass
        logger.info("Fundamental set attempt %d failed (d=%d, degree=%d)", attempt + 1, d, ell)
    raise BasisConstructionError(f"No fundamental set of degree {ell} on S^{d - 1} after {max_attempts} attempts")


def _finish(d: int, ell: int, points: np.ndarray) -> FundamentalSet:
    try:
        factor = _factor(d, ell, points)
    except np.linalg.LinAlgError as exc:
        raise BasisConstructionError(f"Zonal Gram matrix of degree {ell} is not positive definite") from exc
    pivots = np.abs(np.diag(factor))
    if not pivots.min() > PIVOT_RTOL * pivots.max():
        raise BasisConstructionError(f"Zonal Gram matrix of degree {ell} is numerically singular")
    return FundamentalSet(dimension=d, degree=ell, points=points, factor=factor, pivots=pivots)


class HarmonicBasis(BaseModel):
    """Orthonormal spherical harmonics up to ``max_degree`` on S^{d-1}.

    Degree ell is evaluated as Y^ell(x) = L_ell^{-1} (Z_ell(x, x_i))_i with L_ell the
    Cholesky factor of the zonal Gram matrix on a fundamental set; d = 2 uses the
    Fourier basis sqrt(2) cos(ell phi), sqrt(2) sin(ell phi).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dimension: int
    max_degree: int
    seed: int
    sets: dict[int, FundamentalSet] = {}

    @property
    def dims(self) -> list[int]:
        return harmonic_dims(self.dimension, self.max_degree)[0]

    def size(self, max_degree: int | None = None) -> int:
        return polynomial_space_dim(self.dimension, self.max_degree if max_degree is None else max_degree)

    def eval(self, ell: int, x: np.ndarray) -> np.ndarray:
        """Evaluate (Y_k^ell(x))_k; returns (n, h_ell) for (n, d) input, (h_ell,) for one vector."""
        if not 0 <= ell <= self.max_degree:
            raise HarmonicsError(f"Degree {ell} outside the basis range 0..{self.max_degree}")
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        x2 = np.atleast_2d(arr)
        if x2.shape[1] != self.dimension:
            raise DimensionError(f"Basis lives on S^{self.dimension - 1}, got vectors of dimension {x2.shape[1]}")
        if ell == 0:
            out = np.ones((x2.shape[0], 1))
        elif self.dimension == 2:
            phi = np.arctan2(x2[:, 1], x2[:, 0])
            out = np.sqrt(2.0) * np.column_stack([np.cos(ell * phi), np.sin(ell * phi)])
        else:
            fset = self.sets[ell]
            kernel = zonal_from_inner(self.dimension, ell, np.clip(x2 @ fset.points.T, -1.0, 1.0))
            out = solve_triangular(fset.factor, kernel.T, lower=True).T
        return out[0] if single else out

    def eval_all(self, x: np.ndarray, max_degree: int | None = None, *, include_constant: bool = False) -> np.ndarray:
        """Stack degrees (1 or 0)..max_degree in lexicographic (ell, k) order, shape (n, s)."""
        top = self.max_degree if max_degree is None else max_degree
        if top > self.max_degree:
            raise HarmonicsError(f"Degree {top} exceeds the basis maximum {self.max_degree}")
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        start = 0 if include_constant else 1
        blocks = [self.eval(ell, x2) for ell in range(start, top + 1)]
        if not blocks:
            return np.zeros((x2.shape[0], 0))
        return np.hstack(blocks)


_memory_cache: dict[tuple[int, int, int], HarmonicBasis] = {}
_cache_lock = threading.Lock()


def _cache_file(directory: Path, d: int, ell: int, seed: int) -> Path:
    return directory / f"fundamental-d{d}-l{ell}-s{seed}-v{CACHE_VERSION}.npz"


def _load_set(path: Path, d: int, ell: int) -> FundamentalSet | None:
    try:
        with np.load(path) as data:
            header = (int(data["dimension"]), int(data["degree"]), int(data["size"]), int(data["version"]))
            if header != (d, ell, harmonic_dim(d, ell), CACHE_VERSION):
                logger.info("Ignoring stale basis cache %s (header %s)", path, header)
                return None
            points = data["points"]
    except (OSError, KeyError, ValueError) as exc:
        logger.info("Ignoring unreadable basis cache %s: %s", path, exc)
        return None
    return _finish(d, ell, points)


def _save_set(path: Path, fset: FundamentalSet) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        dimension=fset.dimension,
        degree=fset.degree,
        size=fset.size,
        version=CACHE_VERSION,
        points=fset.points,
        factor=fset.factor,
    )


def build_basis(d: int, max_degree: int, seed: Seed | int = 0, *, cache_dir: str | Path | None = None) -> HarmonicBasis:
    """Build (or fetch from cache) the harmonic basis keyed by (d, max_degree, seed).

    ``cache_dir`` defaults to the SPHERE_SW_CACHE_DIR environment variable; without
    it only the in-process cache is used.
    """
    if d < 2:
        raise DimensionError(f"Sphere dimension parameter d must be >= 2, got {d}")
    if max_degree < 0:
        raise HarmonicsError(f"Maximal degree must be >= 0, got {max_degree}")
    seed_value = as_seed(seed).value
    key = (d, max_degree, seed_value)
    with _cache_lock:
        if key in _memory_cache:
            return _memory_cache[key]

        directory = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
        directory = Path(directory) if directory else None
        sets: dict[int, FundamentalSet] = {}
        if d > 2:
            for ell in range(1, max_degree + 1):
                fset = None
                path = _cache_file(directory, d, ell, seed_value) if directory else None
                if path is not None and path.exists():
                    fset = _load_set(path, d, ell)
                if fset is None:
                    fset = build_fundamental_set(d, ell, Seed(value=seed_value))
                    logger.debug("Built fundamental set d=%d degree=%d, condition %.3g", d, ell, fset.condition)
                    if path is not None:
                        _save_set(path, fset)
                sets[ell] = fset
        basis = HarmonicBasis(dimension=d, max_degree=max_degree, seed=seed_value, sets=sets)
        _memory_cache[key] = basis
        logger.info("Harmonic basis ready: d=%d, max degree %d, %d functions", d, max_degree, basis.size())
        return basis


def eval_basis(basis: HarmonicBasis, ell: int, x: np.ndarray) -> np.ndarray:
    return basis.eval(ell, x)
