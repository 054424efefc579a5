from __future__ import annotations

import logging
import time
import warnings
from typing import Callable

import numpy as np
import scipy.linalg

from sphere_sw.exceptions import ControlVariateError, EstimatorError, SphereSWWarning
from sphere_sw.harmonics import HarmonicBasis, polynomial_space_dim
from sphere_sw.measure import DiscreteMeasure
from sphere_sw.nodes import WEIGHT_SUM_TOL, QuadratureNodes
from sphere_sw.result import ControlFamily, EstimatorDiagnostics, EstimatorResult

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10


def evaluate(f: Callable[[np.ndarray], object], x: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on the rows of ``x``; row-wise when ``f`` is not vectorized."""
    x = np.atleast_2d(x)
    values = np.asarray(f(x), dtype=float)
    if values.shape == (x.shape[0],):
        return values
    return np.array([float(f(row)) for row in x])


def _root(value: float, p: float | None) -> float | None:
    if p is None:
        return None
    return float(max(value, 0.0) ** (1.0 / p))


def _check_partition(nodes: QuadratureNodes) -> None:
    total = float(nodes.weights.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise EstimatorError(f"Node weights must sum to 1 for a plain mean, got {total:.12g}")


def weighted_sum_result(
    values: np.ndarray,
    nodes: QuadratureNodes,
    *,
    p: float | None = None,
    eval_time: float = 0.0,
    estimator: str = "mean",
    weights: np.ndarray | None = None,
) -> EstimatorResult:
    """sum_i w_i f_i with the node weights (or ``weights``)."""
    w = nodes.weights if weights is None else weights
    value = float(np.dot(w, values))
    return EstimatorResult(
        value=value,
        sw_value=_root(value, p),
        p=p,
        method=nodes.method,
        estimator=estimator,
        evaluations=nodes.size,
        generation_time=nodes.generation_time,
        eval_time=eval_time,
        diagnostics=EstimatorDiagnostics(flags=list(nodes.flags)),
    )


def mc_mean(f: Callable[[np.ndarray], object], nodes: QuadratureNodes, *, p: float | None = None) -> EstimatorResult:
    """Plain quadrature sum; weights must form a partition of unity."""
    if not nodes.importance:
        _check_partition(nodes)
    start = time.perf_counter()
    values = evaluate(f, nodes.nodes)
    return weighted_sum_result(values, nodes, p=p, eval_time=time.perf_counter() - start)


def importance_weights(nodes: QuadratureNodes) -> np.ndarray:
    """Weights of the importance-sampling sum.

    Two-phase nodes (``phase`` set) already carry their final combination weights;
    otherwise the base weights are divided by the proposal density.
    """
    if nodes.density is None:
        raise EstimatorError(f"Nodes from {nodes.method!r} carry no proposal density")
    if np.any(nodes.density <= 0) or not np.all(np.isfinite(nodes.density)):
        raise EstimatorError("Proposal density must be positive and finite at every node")
    if nodes.phase is not None:
        return nodes.weights
    return nodes.weights / nodes.density


def is_estimate(
    f: Callable[[np.ndarray], object],
    nodes: QuadratureNodes,
    *,
    p: float | None = None,
    values: np.ndarray | None = None,
) -> EstimatorResult:
    """Importance-sampling estimate sum_i w_i f(x_i) / g(x_i)."""
    weights = importance_weights(nodes)
    start = time.perf_counter()
    if values is None:
        values = evaluate(f, nodes.nodes)
    return weighted_sum_result(
        values, nodes, p=p, eval_time=time.perf_counter() - start, estimator="is", weights=weights
    )


def cv_low(mu: DiscreteMeasure, nu: DiscreteMeasure) -> ControlFamily:
    """phi(theta) = (theta^T (m_mu - m_nu))^2 - ||m_mu - m_nu||^2 / d."""
    d = mu.dimension
    gap = mu.moments().mean - nu.moments().mean
    offset = float(gap @ gap) / d

    def evaluate_low(x: np.ndarray) -> np.ndarray:
        return ((x @ gap) ** 2 - offset)[:, None]

    return ControlFamily(tag="low", size=1, dimension=d, evaluate=evaluate_low)


def cv_up(mu: DiscreteMeasure, nu: DiscreteMeasure) -> ControlFamily:
    """phi_low plus theta^T (Sigma_mu + Sigma_nu) theta - (Tr Sigma_mu + Tr Sigma_nu) / d."""
    d = mu.dimension
    mm, mn = mu.moments(), nu.moments()
    gap = mm.mean - mn.mean
    cov = mm.covariance + mn.covariance
    offset = (float(gap @ gap) + mm.trace + mn.trace) / d

    def evaluate_up(x: np.ndarray) -> np.ndarray:
        return ((x @ gap) ** 2 + np.einsum("ij,jk,ik->i", x, cov, x) - offset)[:, None]

    return ControlFamily(tag="up", size=1, dimension=d, evaluate=evaluate_up)


def default_shcv_degree(d: int) -> int:
    """4 up to d = 10, 2 beyond."""
    return 4 if d <= 10 else 2


def shcv_controls(basis: HarmonicBasis, max_degree: int) -> ControlFamily:
    """All Y_k^ell with 1 <= ell <= max_degree, lexicographic in (ell, k)."""
    if max_degree > basis.max_degree:
        raise ControlVariateError(f"Basis covers degree {basis.max_degree}, controls need {max_degree}")
    if max_degree < 0:
        raise ControlVariateError(f"Control degree must be >= 0, got {max_degree}")
    size = polynomial_space_dim(basis.dimension, max_degree) - 1

    def evaluate_sh(x: np.ndarray) -> np.ndarray:
        return basis.eval_all(x, max_degree)

    return ControlFamily(tag=f"sh:{max_degree}", size=size, dimension=basis.dimension, evaluate=evaluate_sh)


def ols_fit(values: np.ndarray, design: np.ndarray) -> tuple[float, np.ndarray, EstimatorDiagnostics]:
    """Intercept and slopes of the least-squares fit values ~ alpha + design @ beta.

    The intercept is profiled out by centering; the centered design is factorized by
    column-pivoted QR and columns whose pivot falls below RANK_RTOL times the leading
    one are dropped (their coefficient is 0).
    """
    n, s = design.shape
    beta = np.zeros(s)
    if s == 0:
        return float(values.mean()), beta, EstimatorDiagnostics(beta=[], controls=0, rank=0)
    col_mean = design.mean(axis=0)
    centered = design - col_mean
    y_mean = values.mean()
    q, r, perm = scipy.linalg.qr(centered, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    lead = diag[0] if diag.size else 0.0
    rank = int(np.count_nonzero(diag > RANK_RTOL * lead)) if lead > 0 else 0
    flags: list[str] = []
    if rank < s:
        flags.append("rank_deficient")
        logger.info("Control design has rank %d < %d; dropping dependent columns", rank, s)
    if rank:
        coef = scipy.linalg.solve_triangular(r[:rank, :rank], q[:, :rank].T @ (values - y_mean))
        beta[perm[:rank]] = coef
    alpha = float(y_mean - col_mean @ beta)
    condition = float(lead / diag[rank - 1]) if rank else None
    diagnostics = EstimatorDiagnostics(
        beta=beta.tolist(),
        controls=s,
        rank=rank,
        condition=condition,
        dropped_columns=sorted(int(c) for c in perm[rank:]),
        flags=flags,
    )
    return alpha, beta, diagnostics


def ols_cv_estimate(
    f: Callable[[np.ndarray], object],
    nodes: QuadratureNodes,
    controls: ControlFamily,
    *,
    p: float | None = None,
    values: np.ndarray | None = None,
    nonnegative: bool | None = None,
) -> EstimatorResult:
    """Control-variate estimate: the intercept of the OLS regression of f on the controls.

    Requires uniform weights and s < N; warns when s > N/2. With ``nonnegative``
    (default: when an order p is attached) a negative estimate is clipped to 0 and flagged.
    """
    if not nodes.is_uniform:
        raise ControlVariateError(f"Control variates need uniform node weights; {nodes.method!r} is weighted")
    if controls.dimension != nodes.dimension:
        raise ControlVariateError(f"Controls live on S^{controls.dimension - 1}, nodes on S^{nodes.dimension - 1}")
    n, s = nodes.size, controls.size
    if s >= n:
        raise ControlVariateError(f"{s} controls need more than {s} nodes, got N={n}")
    if s > n / 2:
        warnings.warn(f"{s} controls for {n} nodes; the regression is poorly determined", SphereSWWarning, stacklevel=2)

    start = time.perf_counter()
    if values is None:
        values = evaluate(f, nodes.nodes)
    design = controls(nodes.nodes)
    alpha, _, diagnostics = ols_fit(values, design)
    flags = list(nodes.flags) + diagnostics.flags
    if s > n / 2:
        flags.append("many_controls")
    clip = (p is not None) if nonnegative is None else nonnegative
    if clip and alpha < 0:
        flags.append("clipped_negative")
        warnings.warn(f"Control-variate estimate {alpha:.6g} clipped to 0", SphereSWWarning, stacklevel=2)
        alpha = 0.0
    return EstimatorResult(
        value=alpha,
        sw_value=_root(alpha, p),
        p=p,
        method=nodes.method,
        estimator=f"cv:{controls.tag}",
        evaluations=n,
        generation_time=nodes.generation_time,
        eval_time=time.perf_counter() - start,
        diagnostics=diagnostics.model_copy(update={"flags": flags}),
    )


def repelled_estimate(
    f: Callable[[np.ndarray], object],
    nodes: QuadratureNodes,
    *,
    p: float | None = None,
    values: np.ndarray | None = None,
) -> EstimatorResult:
    """(1/rho) sum f for Poisson-initialized nodes, (1/N) sum f for binomial ones."""
    process = nodes.params.get("process")
    if process is None:
        raise EstimatorError(f"Nodes from {nodes.method!r} carry no base-process metadata")
    if process == "poisson":
        if nodes.intensity is None:
            raise EstimatorError("Poisson-initialized nodes carry no intensity")
        scale = 1.0 / nodes.intensity
    elif process == "binomial":
        scale = 1.0 / nodes.size
    else:
        raise EstimatorError(f"Unknown base process {process!r}")
    start = time.perf_counter()
    if values is None:
        values = evaluate(f, nodes.nodes)
    weights = np.full(nodes.size, scale)
    return weighted_sum_result(
        values, nodes, p=p, eval_time=time.perf_counter() - start, estimator="repelled", weights=weights
    )
