from __future__ import annotations

from typing import Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class EstimatorDiagnostics(BaseModel):
    beta: list[float] | None = None
    controls: int = 0
    rank: int | None = None
    condition: float | None = None
    dropped_columns: list[int] = []
    flags: list[str] = []


class EstimatorResult(BaseModel):
    """An integral estimate with its bookkeeping.

    ``value`` estimates the integral of the integrand over the uniform sphere
    measure (SW_p^p for the sliced Wasserstein integrand); ``sw_value`` is its
    p-th root when an order p is attached.
    """

    value: float
    sw_value: float | None = None
    p: float | None = None
    method: str = ""
    estimator: str = "mean"
    evaluations: int = 0
    generation_time: float = 0.0
    eval_time: float = 0.0
    diagnostics: EstimatorDiagnostics = Field(default_factory=EstimatorDiagnostics)

    @property
    def wall_time(self) -> float:
        return self.generation_time + self.eval_time


class ControlFamily(BaseModel):
    """s centered functions on S^{d-1}, evaluated together.

    ``evaluate`` maps an (n, d) array of directions to an (n, s) design matrix.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    tag: str
    size: int = Field(ge=0)
    dimension: int = Field(ge=2)
    evaluate: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.size == 0:
            return np.zeros((x.shape[0], 0))
        return np.asarray(self.evaluate(x), dtype=float).reshape(x.shape[0], self.size)
