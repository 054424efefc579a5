from __future__ import annotations

import csv
import logging
import warnings
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict

from sphere_sw.exceptions import DimensionError, PointCloudFormatError, SphereSWWarning
from sphere_sw.measure import DiscreteMeasure
from sphere_sw.sphere import PHASE_PROBLEM, Seed, as_seed

logger = logging.getLogger(__name__)

WEIGHT_COLUMN = "weight"
RENORMALIZE_TOL = 1e-6


def _problem_rng(seed: Seed | int, substream: int) -> np.random.Generator:
    return as_seed(seed).with_phase(PHASE_PROBLEM).child(substream).rng()


class GaussianPairParameters(BaseModel):
    """Means and covariances of the two Gaussian laws; covariances are U^T U for Gaussian U."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean_x: np.ndarray
    mean_y: np.ndarray
    factor_x: np.ndarray
    factor_y: np.ndarray

    @property
    def cov_x(self) -> np.ndarray:
        return self.factor_x.T @ self.factor_x

    @property
    def cov_y(self) -> np.ndarray:
        return self.factor_y.T @ self.factor_y


def gaussian_pair_parameters(d: int, seed: Seed | int) -> GaussianPairParameters:
    if d < 2:
        raise DimensionError(f"Dimension must be >= 2, got {d}")
    rng = _problem_rng(seed, 0)
    return GaussianPairParameters(
        mean_x=rng.standard_normal(d),
        mean_y=rng.standard_normal(d),
        factor_x=rng.standard_normal((d, d)),
        factor_y=rng.standard_normal((d, d)),
    )


def gen_gaussian_pair(d: int, m: int, seed: Seed | int) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Two empirical measures of m i.i.d. draws from N(m_X, U^T U) and N(m_Y, V^T V)."""
    if m < 1:
        raise ValueError(f"Atom count must be >= 1, got {m}")
    params = gaussian_pair_parameters(d, seed)
    rng = _problem_rng(seed, 1)
    x = params.mean_x + rng.standard_normal((m, d)) @ params.factor_x
    y = params.mean_y + rng.standard_normal((m, d)) @ params.factor_y
    return DiscreteMeasure.uniform(x), DiscreteMeasure.uniform(y)


def banana_map(z: np.ndarray) -> np.ndarray:
    """Odd slots kept, even slots mapped to -x_{2j+2} + (x_{2j+1} - 5)^2."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] % 2:
        raise DimensionError(f"The banana map needs an even dimension, got {z.shape[1]}")
    out = z.copy()
    out[:, 1::2] = -z[:, 1::2] + (z[:, 0::2] - 5.0) ** 2
    return out


def gen_banana_sample(d: int, m: int, seed: Seed | int, substream: int = 2) -> DiscreteMeasure:
    """m i.i.d. standard Gaussian vectors pushed through :func:`banana_map`."""
    if d < 2 or d % 2:
        raise DimensionError(f"The banana target needs an even dimension >= 2, got {d}")
    if m < 1:
        raise ValueError(f"Atom count must be >= 1, got {m}")
    rng = _problem_rng(seed, substream)
    return DiscreteMeasure.uniform(banana_map(rng.standard_normal((m, d))))


def _parse_row(row: list[str], line: int, path: Path) -> list[float]:
    try:
        return [float(cell) for cell in row]
    except ValueError as exc:
        raise PointCloudFormatError(f"{path}:{line}: non-numeric entry in {row!r}") from exc


def load_point_cloud(path: str | Path, *, weighted: bool | None = None) -> DiscreteMeasure:
    """Read a CSV point cloud: one atom per row, optional trailing weight column.

    A header row is optional; a last header cell named ``weight`` marks the weight
    column. Without a header, ``weighted=True`` declares one. Weights off by more
    than 1e-6 from summing to 1 are renormalized with a warning.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]
    except OSError as exc:
        raise PointCloudFormatError(f"Cannot read point cloud {path}: {exc}") from exc
    if not rows:
        raise PointCloudFormatError(f"Point cloud {path} is empty")

    has_weights = bool(weighted)
    try:
        float(rows[0][0])
    except ValueError:
        header = [cell.strip().lower() for cell in rows.pop(0)]
        if weighted is None:
            has_weights = header[-1] == WEIGHT_COLUMN
    if not rows:
        raise PointCloudFormatError(f"Point cloud {path} has a header but no rows")

    width = len(rows[0])
    data = []
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise PointCloudFormatError(f"{path}:{i}: expected {width} columns, got {len(row)}")
        data.append(_parse_row(row, i, path))
    table = np.array(data)

    if not has_weights:
        return DiscreteMeasure.uniform(table)
    if width < 2:
        raise PointCloudFormatError(f"{path}: a weight column needs at least one coordinate column")
    atoms, weights = table[:, :-1], table[:, -1]
    if np.any(weights < 0):
        raise PointCloudFormatError(f"{path}: negative weights")
    total = float(weights.sum())
    if total <= 0:
        raise PointCloudFormatError(f"{path}: weights sum to {total}")
    if abs(total - 1.0) > RENORMALIZE_TOL:
        warnings.warn(f"Weights in {path} sum to {total:.9g}; renormalizing", SphereSWWarning, stacklevel=2)
    return DiscreteMeasure(atoms=atoms, weights=weights / total)


def save_point_cloud(m: DiscreteMeasure, path: str | Path, *, weighted: bool = True) -> Path:
    """Write a point cloud with a header and 17 significant digits per value."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"x{j}" for j in range(m.dimension)]
    if weighted:
        header.append(WEIGHT_COLUMN)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for atom, weight in zip(m.atoms, m.weights):
            cells = [f"{v:.17g}" for v in atom]
            if weighted:
                cells.append(f"{weight:.17g}")
            writer.writerow(cells)
    logger.debug("Saved %d atoms to %s", m.size, path)
    return path
