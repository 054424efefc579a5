from __future__ import annotations

import time
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import linear_sum_assignment

from sphere_sw.exceptions import DimensionError, QuadratureError, TransportError
from sphere_sw.measure import DiscreteMeasure, Projected1D

if TYPE_CHECKING:
    from sphere_sw.nodes import QuadratureNodes
    from sphere_sw.result import EstimatorResult

# bound on M * (directions per chunk) when projecting in batches
_CHUNK_ELEMENTS = 4_000_000


def _check_order(p: float) -> None:
    if not p >= 1:
        raise TransportError(f"Transport order p must be >= 1, got {p}")


def project_measure(m: DiscreteMeasure, theta: np.ndarray) -> Projected1D:
    """Push ``m`` forward by x -> <theta, x>."""
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != m.dimension:
        raise DimensionError(f"Direction has dimension {theta.shape[0]}, measure has {m.dimension}")
    return Projected1D(positions=m.atoms @ theta, weights=m.weights)


def _sorted_quantile_cost(
    xa: np.ndarray, wa: np.ndarray, xb: np.ndarray, wb: np.ndarray, p: float
) -> np.ndarray:
    """Quantile-coupling cost for positions already sorted along axis 0.

    ``xa`` is (Ma, k), ``xb`` is (Mb, k); ``wa``/``wb`` are the matching sorted
    weights, either shape (M,) shared by all k columns or (M, k).
    """
    cwa = np.cumsum(wa, axis=0)
    cwb = np.cumsum(wb, axis=0)
    if wa.ndim == 1 and wb.ndim == 1:
        qs = np.sort(np.concatenate([cwa, cwb]))
        qs = np.minimum(qs, 1.0)
        delta = np.diff(np.concatenate([[0.0], qs]))
        ia = np.clip(np.searchsorted(cwa, qs), 0, xa.shape[0] - 1)
        ib = np.clip(np.searchsorted(cwb, qs), 0, xb.shape[0] - 1)
        gap = np.abs(xa[ia] - xb[ib])
        return delta @ (gap if p == 1 else gap**p)
    out = np.empty(xa.shape[1])
    for j in range(xa.shape[1]):
        col_wa = wa[:, j] if wa.ndim == 2 else wa
        col_wb = wb[:, j] if wb.ndim == 2 else wb
        out[j] = _sorted_quantile_cost(xa[:, j : j + 1], col_wa, xb[:, j : j + 1], col_wb, p)[0]
    return out


def wasserstein_1d(a: Projected1D, b: Projected1D, p: float = 2.0) -> float:
    """W_p(a, b)^p by the quantile coupling.

    Both supports are sorted (stable sort, ties kept in input order), the cumulative
    weight breakpoints of both are merged and each segment contributes
    (segment mass) * |q_a - q_b|^p. Equal-size uniform inputs reduce to the sorted
    pairing. Cost O(M log M).
    """
    _check_order(p)
    if a.positions.size == 0 or b.positions.size == 0:
        raise TransportError("Cannot transport an empty measure")
    oa = np.argsort(a.positions, kind="stable")
    ob = np.argsort(b.positions, kind="stable")
    xa, wa = a.positions[oa], a.weights[oa]
    xb, wb = b.positions[ob], b.weights[ob]
    if xa.size == xb.size and np.all(wa == wa[0]) and np.all(wb == wb[0]):
        return float(np.mean(np.abs(xa - xb) ** p))
    return float(_sorted_quantile_cost(xa[:, None], wa, xb[:, None], wb, p)[0])


class SWIntegrand:
    """theta -> W_p^p(theta#mu, theta#nu), evaluable on one direction or a batch.

    A single (d,) direction returns a float; an (n, d) array returns an (n,) array.
    Instances are immutable and can be shared between workers.
    """

    def __init__(self, mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> None:
        _check_order(p)
        if mu.dimension != nu.dimension:
            raise DimensionError(f"Measures live in R^{mu.dimension} and R^{nu.dimension}")
        self.mu = mu
        self.nu = nu
        self.p = float(p)
        self._uniform = mu.is_uniform and nu.is_uniform

    @property
    def dimension(self) -> int:
        return self.mu.dimension

    def __call__(self, theta: np.ndarray) -> float | np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 1:
            return float(self._batch(theta[None, :])[0])
        return self._batch(theta)

    def _batch(self, thetas: np.ndarray) -> np.ndarray:
        if thetas.shape[1] != self.dimension:
            raise DimensionError(f"Directions have dimension {thetas.shape[1]}, measures have {self.dimension}")
        if not self._uniform:
            return np.array([
                wasserstein_1d(project_measure(self.mu, t), project_measure(self.nu, t), self.p)
                for t in thetas
            ])
        size = max(self.mu.size, self.nu.size)
        chunk = max(1, _CHUNK_ELEMENTS // size)
        out = np.empty(thetas.shape[0])
        for start in range(0, thetas.shape[0], chunk):
            block = thetas[start : start + chunk]
            xa = np.sort(self.mu.atoms @ block.T, axis=0)
            xb = np.sort(self.nu.atoms @ block.T, axis=0)
            if self.mu.size == self.nu.size:
                out[start : start + chunk] = np.mean(np.abs(xa - xb) ** self.p, axis=0)
            else:
                out[start : start + chunk] = _sorted_quantile_cost(xa, self.mu.weights, xb, self.nu.weights, self.p)
        return out

    def lipschitz_constant(self) -> float:
        """p W_p(mu, nu)^{p-1} (m_p(mu)^{1/p} + m_p(nu)^{1/p}).

        W_p(mu, nu) is solved exactly as an assignment problem for equal-size uniform
        measures; otherwise it is replaced by the moment bound m_p(mu)^{1/p} + m_p(nu)^{1/p}.
        """
        p = self.p
        moment_sum = self.mu.absolute_moment(p) ** (1 / p) + self.nu.absolute_moment(p) ** (1 / p)
        if self._uniform and self.mu.size == self.nu.size:
            cost = np.linalg.norm(self.mu.atoms[:, None, :] - self.nu.atoms[None, :, :], axis=2) ** p
            rows, cols = linear_sum_assignment(cost)
            w = float(cost[rows, cols].mean()) ** (1 / p)
        else:
            w = moment_sum
        return p * w ** (p - 1) * moment_sum


def sw_integrand(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> SWIntegrand:
    return SWIntegrand(mu, nu, p)


def estimate_sw(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    p: float,
    nodes: QuadratureNodes,
) -> EstimatorResult:
    """Estimate SW_p^p (and SW_p) by the weighted node sum sum_i w_i f(theta_i)."""
    from sphere_sw.estimators import weighted_sum_result

    if nodes.size == 0:
        raise QuadratureError("Cannot estimate with an empty node set")
    f = sw_integrand(mu, nu, p)
    start = time.perf_counter()
    values = f(nodes.nodes)
    return weighted_sum_result(values, nodes, p=p, eval_time=time.perf_counter() - start)
