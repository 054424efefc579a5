from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, computed_field, field_validator, model_validator

from sphere_sw.exceptions import MeasureError

WEIGHT_TOL = 1e-12


class MeasureMoments(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean: np.ndarray
    covariance: np.ndarray

    @computed_field  # type: ignore[prop-decorator]
    @property
    def trace(self) -> float:
        return float(np.trace(self.covariance))


class DiscreteMeasure(BaseModel):
    """Weighted atoms in R^d: ``atoms`` is (M, d), ``weights`` is (M,) and sums to 1."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    atoms: np.ndarray
    weights: np.ndarray

    @field_validator("atoms", mode="before")
    @classmethod
    def _as_atoms(cls, value: object) -> np.ndarray:
        atoms = np.asarray(value, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise MeasureError(f"A measure needs at least one atom, got shape {atoms.shape}")
        if not np.all(np.isfinite(atoms)):
            raise MeasureError("Atoms must be finite")
        return atoms

    @field_validator("weights", mode="before")
    @classmethod
    def _as_weights(cls, value: object) -> np.ndarray:
        weights = np.asarray(value, dtype=float).ravel()
        if np.any(weights < 0):
            raise MeasureError("Weights must be nonnegative")
        return weights

    @model_validator(mode="after")
    def _check(self) -> DiscreteMeasure:
        if self.weights.shape[0] != self.atoms.shape[0]:
            raise MeasureError(f"{self.atoms.shape[0]} atoms but {self.weights.shape[0]} weights")
        total = float(self.weights.sum())
        if abs(total - 1.0) > WEIGHT_TOL * max(1, self.atoms.shape[0]):
            raise MeasureError(f"Weights must sum to 1, got {total:.15g}")
        return self

    @classmethod
    def uniform(cls, atoms: np.ndarray) -> DiscreteMeasure:
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        return cls(atoms=atoms, weights=np.full(atoms.shape[0], 1.0 / max(atoms.shape[0], 1)))

    @classmethod
    def dirac(cls, point: np.ndarray) -> DiscreteMeasure:
        return cls(atoms=np.atleast_2d(np.asarray(point, dtype=float)), weights=np.ones(1))

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def dimension(self) -> int:
        return self.atoms.shape[1]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def moments(self) -> MeasureMoments:
        mean = self.weights @ self.atoms
        centered = self.atoms - mean
        cov = (centered * self.weights[:, None]).T @ centered
        return MeasureMoments(mean=mean, covariance=0.5 * (cov + cov.T))

    def absolute_moment(self, p: float) -> float:
        """m_p = sum_i w_i ||x_i||^p."""
        return float(self.weights @ np.linalg.norm(self.atoms, axis=1) ** p)

    def transform(self, matrix: np.ndarray) -> DiscreteMeasure:
        """Push forward by x -> matrix @ x."""
        return DiscreteMeasure(atoms=self.atoms @ np.asarray(matrix).T, weights=self.weights)


class Projected1D(BaseModel):
    """Push-forward of a measure on a line: positions and the parent weights."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    positions: np.ndarray
    weights: np.ndarray

    @field_validator("positions", "weights", mode="before")
    @classmethod
    def _as_vector(cls, value: object) -> np.ndarray:
        return np.asarray(value, dtype=float).ravel()

    @model_validator(mode="after")
    def _check(self) -> Projected1D:
        if self.positions.shape != self.weights.shape:
            raise MeasureError(f"{self.positions.size} positions but {self.weights.size} weights")
        return self

    @classmethod
    def uniform(cls, positions: np.ndarray) -> Projected1D:
        positions = np.asarray(positions, dtype=float).ravel()
        return cls(positions=positions, weights=np.full(positions.size, 1.0 / max(positions.size, 1)))
