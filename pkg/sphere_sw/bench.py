from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np
from pydantic import BaseModel, ConfigDict

from sphere_sw.config import ExperimentConfig, MethodSpec, ProblemSpec
from sphere_sw.data import gen_banana_sample, gen_gaussian_pair, load_point_cloud
from sphere_sw.estimators import (
    cv_low,
    cv_up,
    default_shcv_degree,
    evaluate,
    is_estimate,
    ols_cv_estimate,
    repelled_estimate,
    shcv_controls,
    weighted_sum_result,
)
from sphere_sw.exceptions import ConfigError, EstimatorError
from sphere_sw.harmonics import build_basis, harmonic_dim, zonal_from_inner
from sphere_sw.measure import DiscreteMeasure
from sphere_sw.quadratures import make_nodes, nodes_isvmf
from sphere_sw.report import ExperimentReporter, Report
from sphere_sw.result import ControlFamily, EstimatorResult
from sphere_sw.sphere import PHASE_NODES, PHASE_REFERENCE, Seed
from sphere_sw.transport import SWIntegrand

logger = logging.getLogger(__name__)


class Problem(BaseModel):
    """An integrand on S^{d-1} with its exact integral when known."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: str
    dimension: int
    integrand: Callable[[np.ndarray], np.ndarray]
    p: float | None = None
    exact: float | None = None
    mu: DiscreteMeasure | None = None
    nu: DiscreteMeasure | None = None


def halfsphere_indicator(x: np.ndarray) -> np.ndarray:
    """1[x_1 > 0]; integral 1/2."""
    return (np.atleast_2d(x)[:, 0] > 0).astype(float)


def harmonic_test_integrand(d: int, degree: int) -> Callable[[np.ndarray], np.ndarray]:
    """1 + sum_{ell=1..degree} Z_ell(x, e)/sqrt(h_ell) for a fixed diagonal direction e; integral 1."""
    e = np.ones(d) / np.sqrt(d)
    scales = [1.0 / np.sqrt(harmonic_dim(d, ell)) for ell in range(1, degree + 1)]

    def integrand(x: np.ndarray) -> np.ndarray:
        t = np.clip(np.atleast_2d(x) @ e, -1.0, 1.0)
        out = np.ones_like(t)
        for ell, scale in enumerate(scales, start=1):
            out += scale * zonal_from_inner(d, ell, t)
        return out

    return integrand


def build_problem(spec: ProblemSpec, p: float, seed: int) -> Problem:
    d = spec.d
    if spec.kind == "halfsphere":
        return Problem(kind=spec.kind, dimension=d, integrand=halfsphere_indicator, exact=0.5)
    if spec.kind == "harmonic":
        return Problem(kind=spec.kind, dimension=d, integrand=harmonic_test_integrand(d, spec.degree), exact=1.0)
    if spec.kind == "gaussian":
        mu, nu = gen_gaussian_pair(d, spec.atoms, seed)
    elif spec.kind == "banana":
        mu = load_point_cloud(spec.history) if spec.history else gen_banana_sample(d, spec.atoms, seed, substream=3)
        nu = gen_banana_sample(d, spec.atoms, seed)
    else:
        mu, nu = (load_point_cloud(path) for path in spec.files)
    if mu.dimension != d or nu.dimension != d:
        raise ConfigError(f"Problem declares d={d} but the measures live in R^{mu.dimension} and R^{nu.dimension}")
    return Problem(kind=spec.kind, dimension=d, integrand=SWIntegrand(mu, nu, p), p=p, mu=mu, nu=nu)


class Replicates(BaseModel):
    values: list[float]
    evaluations: float
    wall_time: float
    generation_time: float
    eval_time: float
    flags: list[str] = []


class BenchRunner:
    """Runs replications of configured methods on one problem, caching shared pieces."""

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self._cache: dict = {}

    @property
    def problem(self) -> Problem:
        if "problem" not in self._cache:
            self._cache["problem"] = build_problem(self.config.problem, self.config.order, self.config.seed)
        return self._cache["problem"]

    def reference_spec(self) -> tuple[str, int]:
        if self.problem.exact is not None:
            return "exact", 0
        return self.config.reference.resolved(self.problem.dimension, max(self.config.n))

    def reference(self) -> float:
        """Exact value for synthetic problems, else a large-N quadrature of the integrand."""
        if "reference" in self._cache:
            return self._cache["reference"]
        problem = self.problem
        if problem.exact is not None:
            value = problem.exact
        else:
            method, n = self.reference_spec()
            start = time.perf_counter()
            nodes = make_nodes(method, problem.dimension, n, Seed(value=self.config.seed, phase=PHASE_REFERENCE))
            value = float(np.dot(nodes.weights, evaluate(problem.integrand, nodes.nodes)))
            logger.info("Reference %s with %d nodes: %.10g (%.1fs)", method, n, value, time.perf_counter() - start)
        self._cache["reference"] = value
        return value

    def controls(self, estimator: str) -> ControlFamily:
        key = ("controls", estimator)
        if key in self._cache:
            return self._cache[key]
        problem = self.problem
        if estimator in ("cv_low", "cv_up"):
            if problem.mu is None or problem.nu is None:
                raise EstimatorError(f"Estimator {estimator!r} needs a transport problem, got {problem.kind!r}")
            family = cv_low(problem.mu, problem.nu) if estimator == "cv_low" else cv_up(problem.mu, problem.nu)
        else:
            _, _, arg = estimator.partition(":")
            degree = int(arg) if arg else self.config.shcv_degree
            if degree is None:
                degree = default_shcv_degree(problem.dimension)
            basis = build_basis(problem.dimension, degree, self.config.seed)
            family = shcv_controls(basis, degree)
        self._cache[key] = family
        return family

    def sweep_method(self) -> MethodSpec:
        """The first configured method, as a repelled binomial process with the repelled estimator."""
        method = self.config.methods[0]
        nodes = method.nodes
        while nodes.startswith("repelled:"):
            nodes = nodes.split(":", 1)[1]
        return MethodSpec.parse(f"repelled:{nodes}+repelled", method.params)

    def run_once(self, method: MethodSpec, n: int, replication: int, *, epsilon: float | None = None) -> EstimatorResult:
        """One replication of ``method`` at ``n`` nodes."""
        problem = self.problem
        seed = Seed(value=self.config.seed, replication=replication, phase=PHASE_NODES)
        params = dict(method.params)
        if epsilon is not None:
            params["epsilon"] = epsilon
        p = problem.p

        start = time.perf_counter()
        values = None
        if method.nodes == "isvmf":
            nodes, values = nodes_isvmf(
                problem.integrand,
                problem.dimension,
                n,
                seed,
                float(params.get("r", 0.2)),
                self_normalized=bool(params.get("self_normalized", False)),
            )
        else:
            nodes = make_nodes(method.nodes, problem.dimension, n, seed, integrand=problem.integrand, **params)
        if values is None:
            values = evaluate(problem.integrand, nodes.nodes)
        eval_time = time.perf_counter() - start - nodes.generation_time

        estimator = method.estimator
        if estimator == "mean":
            result = weighted_sum_result(values, nodes, p=p)
        elif estimator == "is":
            result = is_estimate(problem.integrand, nodes, p=p, values=values)
        elif estimator == "repelled":
            result = repelled_estimate(problem.integrand, nodes, p=p, values=values)
        else:
            result = ols_cv_estimate(
                problem.integrand, nodes, self.controls(estimator), p=p, values=values, nonnegative=p is not None
            )
        return result.model_copy(update={"eval_time": max(eval_time, 0.0) + result.eval_time})

    def replicate(self, method: MethodSpec, n: int, *, epsilon: float | None = None) -> Replicates:
        """All replications of one (method, n[, epsilon]) cell, in replication order."""
        self.reference()
        count = self.config.replications

        def task(r: int) -> EstimatorResult:
            return self.run_once(method, n, r, epsilon=epsilon)

        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                results = list(pool.map(task, range(count)))
        else:
            results = [task(r) for r in range(count)]
        logger.info("%s n=%d%s: %d replications done", method.label, n, "" if epsilon is None else f" eps={epsilon:g}", count)
        flags = sorted({flag for res in results for flag in res.diagnostics.flags})
        return Replicates(
            values=[res.value for res in results],
            evaluations=float(np.mean([res.evaluations for res in results])),
            wall_time=float(np.mean([res.wall_time for res in results])),
            generation_time=float(np.mean([res.generation_time for res in results])),
            eval_time=float(np.mean([res.eval_time for res in results])),
            flags=flags,
        )


def run_experiment(config: ExperimentConfig) -> Report:
    """Reference value, then every (method, n) cell; failures are recorded per row."""
    return ExperimentReporter(BenchRunner(config)).report()


def epsilon_sweep(config: ExperimentConfig) -> Report:
    """Repelled estimator over ``config.epsilon`` with Bonferroni-corrected chi-square intervals."""
    if not config.epsilon:
        raise ConfigError("The epsilon sweep needs a nonempty epsilon grid")
    if config.replications < 30:
        raise ConfigError(f"The epsilon sweep needs at least 30 replications, got {config.replications}")
    return ExperimentReporter(BenchRunner(config)).sweep()
