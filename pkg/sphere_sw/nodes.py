from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sphere_sw.exceptions import QuadratureError
from sphere_sw.sphere import Seed, check_unit_vectors

NODE_TOL = 1e-10
WEIGHT_SUM_TOL = 1e-9


class QuadratureNodes(BaseModel):
    """A node set on S^{d-1} with its quadrature weights and provenance.

    ``importance`` marks weights that are unbiased but do not form a partition of
    unity (importance sampling, Poisson intensity normalization, DPP weights on a
    chart). ``density`` holds proposal-density values relative to the uniform
    sphere measure when nodes were drawn from a non-uniform law; ``phase`` labels
    pilot (0) and adaptive (1) draws of a two-phase sampler.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    nodes: np.ndarray
    weights: np.ndarray
    method: str
    seed: Seed | None = None
    params: dict[str, float | int | str | bool] = Field(default_factory=dict)
    generation_time: float = 0.0
    importance: bool = False
    density: np.ndarray | None = None
    phase: np.ndarray | None = None
    intensity: float | None = None
    flags: list[str] = Field(default_factory=list)

    @field_validator("nodes", mode="before")
    @classmethod
    def _as_nodes(cls, value: object) -> np.ndarray:
        nodes = np.atleast_2d(np.asarray(value, dtype=float))
        if nodes.shape[0] < 1:
            raise QuadratureError("A node set needs at least one node")
        return check_unit_vectors(nodes, tol=NODE_TOL)

    @field_validator("weights", "density", "phase", mode="before")
    @classmethod
    def _as_vector(cls, value: object) -> np.ndarray | None:
        if value is None:
            return None
        return np.asarray(value, dtype=float).ravel()

    @model_validator(mode="after")
    def _check(self) -> QuadratureNodes:
        n = self.nodes.shape[0]
        for name in ("weights", "density", "phase"):
            arr = getattr(self, name)
            if arr is not None and arr.shape[0] != n:
                raise QuadratureError(f"{n} nodes but {arr.shape[0]} {name}")
        if not self.importance:
            total = float(self.weights.sum())
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                raise QuadratureError(f"Node weights must sum to 1, got {total:.12g}")
        return self

    @classmethod
    def uniform(cls, nodes: np.ndarray, method: str, **kwargs: object) -> QuadratureNodes:
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        return cls(nodes=nodes, weights=np.full(nodes.shape[0], 1.0 / nodes.shape[0]), method=method, **kwargs)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def dimension(self) -> int:
        return self.nodes.shape[1]

    @property
    def is_uniform(self) -> bool:
        """True when every weight equals 1/N (the plain Monte Carlo form)."""
        if self.importance:
            return False
        return bool(np.allclose(self.weights, 1.0 / self.size, rtol=0.0, atol=1e-15))

    def replace(self, **update: object) -> QuadratureNodes:
        """Copy with updated fields, re-running validation."""
        data = {name: getattr(self, name) for name in type(self).model_fields}
        data.update(update)
        return type(self)(**data)
