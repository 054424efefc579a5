from __future__ import annotations

import logging
import warnings

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import gammaln, logsumexp
from scipy.stats import vonmises_fisher

from sphere_sw.exceptions import SphereSWWarning
from sphere_sw.sphere import check_unit_vectors, uniform_sphere

logger = logging.getLogger(__name__)

KAPPA_MAX = 1e4
# below this concentration the mixture is indistinguishable from uniform
KAPPA_UNIFORM = 1e-8


def log_sphere_area(d: int) -> float:
    """log |S^{d-1}| = log(2 pi^{d/2} / Gamma(d/2))."""
    return float(np.log(2.0) + 0.5 * d * np.log(np.pi) - gammaln(d / 2))


def kappa_from_resultant(resultant: float, d: int, kappa_max: float = KAPPA_MAX) -> float:
    """Concentration estimate R(d - R^2) / (1 - R^2), capped at ``kappa_max``."""
    if not 0 <= resultant <= 1:
        raise ValueError(f"Mean resultant length must lie in [0, 1], got {resultant}")
    if resultant >= 1 - 1e-9:
        warnings.warn(f"Resultant length {resultant:.12g} is degenerate; kappa capped at {kappa_max:g}", SphereSWWarning, stacklevel=2)
        return kappa_max
    kappa = resultant * (d - resultant**2) / (1 - resultant**2)
    if kappa > kappa_max:
        warnings.warn(f"Concentration {kappa:.6g} capped at {kappa_max:g}", SphereSWWarning, stacklevel=2)
        return kappa_max
    return float(kappa)


class VmfProposal(BaseModel):
    """Symmetrized von Mises-Fisher mixture 1/2 vmf(eps, kappa) + 1/2 vmf(-eps, kappa)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    direction: np.ndarray
    kappa: float = Field(ge=0)

    @field_validator("direction", mode="before")
    @classmethod
    def _as_direction(cls, value: object) -> np.ndarray:
        return check_unit_vectors(np.asarray(value, dtype=float).ravel(), tol=1e-10)[0]

    @property
    def dimension(self) -> int:
        return self.direction.shape[0]

    @property
    def is_uniform(self) -> bool:
        return self.kappa < KAPPA_UNIFORM

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.is_uniform:
            return uniform_sphere(rng, self.dimension, n)
        draws = vonmises_fisher(self.direction, self.kappa).rvs(n, random_state=rng)
        draws = np.atleast_2d(draws)
        signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        out = draws * signs[:, None]
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    def density(self, x: np.ndarray) -> np.ndarray:
        """Mixture density relative to the uniform probability measure on the sphere."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.is_uniform:
            return np.ones(x.shape[0])
        dist = vonmises_fisher(self.direction, self.kappa)
        logs = np.stack([dist.logpdf(x), dist.logpdf(-x)])
        return np.exp(logsumexp(logs, axis=0) + np.log(0.5) + log_sphere_area(self.dimension))


class VmfFit(BaseModel):
    """Outcome of fitting the proposal on pilot evaluations."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    proposal: VmfProposal
    resultant: float
    degenerate: bool = False


def fit_symmetric_vmf(pilots: np.ndarray, values: np.ndarray, kappa_max: float = KAPPA_MAX) -> VmfFit:
    """Cross-entropy fit on pilot draws.

    Values are restricted to the hemisphere of the best pilot, their weighted
    resultant gives the mean direction and the resultant length sets kappa.
    All-zero pilot values give a uniform proposal flagged ``degenerate``.
    """
    pilots = np.atleast_2d(pilots)
    values = np.asarray(values, dtype=float)
    d = pilots.shape[1]
    fallback = np.zeros(d)
    fallback[0] = 1.0
    if not np.any(values > 0):
        logger.info("All pilot values vanish; using a uniform proposal")
        return VmfFit(proposal=VmfProposal(direction=fallback, kappa=0.0), resultant=0.0, degenerate=True)
    best = pilots[int(np.argmax(values))]
    kept = values * (pilots @ best > 0)
    moment = kept @ pilots
    norm = float(np.linalg.norm(moment))
    total = float(kept.sum())
    if norm == 0.0 or total == 0.0:
        return VmfFit(proposal=VmfProposal(direction=fallback, kappa=0.0), resultant=0.0)
    resultant = min(norm / total, 1.0)
    kappa = kappa_from_resultant(resultant, d, kappa_max)
    logger.debug("vMF fit: resultant %.4f, kappa %.4g", resultant, kappa)
    return VmfFit(proposal=VmfProposal(direction=moment / norm, kappa=kappa), resultant=resultant)
