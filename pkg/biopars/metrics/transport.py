"""
Optimal transport between two discrete distributions.

emd_exact solves the transportation problem with POT's network simplex and
certifies the plan with the dual potentials. emd_sinkhorn runs POT's log-domain
Sinkhorn scaling and rounds the result onto the feasible set.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import ot

from biopars.errors import ConvergenceError, DimensionError, FeasibilityError, ParameterError

logger = logging.getLogger(__name__)

MARGINAL_TOL = 1e-9
CERTIFICATE_TOL = 1e-9


@dataclass(frozen=True)
class TransportProblem:
    """Marginals f_x (m,), f_y (k,) and cost matrix C (m, k)."""

    fx: np.ndarray
    fy: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        if self.cost.shape != (self.fx.shape[0], self.fy.shape[0]):
            raise DimensionError(f"cost {self.cost.shape} does not match marginals {self.fx.shape}, {self.fy.shape}")
        if np.any(self.cost < 0.0) or not np.all(np.isfinite(self.cost)):
            raise FeasibilityError("costs must be finite and non-negative")
        if np.any(self.fx < 0.0) or np.any(self.fy < 0.0):
            raise FeasibilityError("marginals must be non-negative")
        if abs(self.fx.sum() - 1.0) > MARGINAL_TOL or abs(self.fy.sum() - 1.0) > MARGINAL_TOL:
            raise FeasibilityError(
                f"marginals must each sum to 1, got {self.fx.sum():.12g} and {self.fy.sum():.12g}"
            )

    @classmethod
    def build(cls, fx, fy, cost) -> "TransportProblem":
        return cls(
            np.ascontiguousarray(fx, dtype=np.float64),
            np.ascontiguousarray(fy, dtype=np.float64),
            np.ascontiguousarray(cost, dtype=np.float64),
        )


@dataclass(frozen=True)
class TransportPlan:
    flow: np.ndarray
    cost: float
    residual: float = 0.0
    iterations: int = 0
    potentials: Optional[tuple[np.ndarray, np.ndarray]] = None


def marginal_violation(prob: TransportProblem, flow: np.ndarray) -> float:
    return float(max(np.max(np.abs(flow.sum(axis=1) - prob.fx)), np.max(np.abs(flow.sum(axis=0) - prob.fy))))


def certificate_gap(prob: TransportProblem, flow: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    """
    Largest violation of the optimality conditions for (flow, u, v).

    Checks dual feasibility u_i + v_j <= C_ij, complementary slackness on the
    support of the flow, and equality of primal and dual objectives.
    """
    reduced = prob.cost - u[:, None] - v[None, :]
    dual_infeasibility = max(0.0, -float(reduced.min()))
    slackness = float(np.max(np.where(flow > 0.0, np.abs(reduced), 0.0)))
    duality_gap = abs(float(np.sum(prob.cost * flow)) - float(prob.fx @ u + prob.fy @ v))
    return max(dual_infeasibility, slackness, duality_gap)


def _complete_potentials(prob: TransportProblem, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tightest feasible potentials on zero-mass rows and columns (they do not enter the objective)."""
    u, v = u.copy(), v.copy()
    rows, cols = prob.fx > 0.0, prob.fy > 0.0
    if not cols.all():
        v[~cols] = np.min(prob.cost[np.ix_(rows, ~cols)] - u[rows][:, None], axis=0)
    if not rows.all():
        u[~rows] = np.min(prob.cost[~rows] - v[None, :], axis=1)
    return u, v


def emd_exact(prob: TransportProblem) -> TransportPlan:
    """
    Minimum-cost plan by network simplex, certified against its dual potentials.

    Example:
        >>> plan = emd_exact(TransportProblem.build([1.0], [0.5, 0.5], [[0.0, 1.0]]))
        >>> plan.cost
        0.5
    """
    flow, log = ot.emd(prob.fx, prob.fy, prob.cost, log=True)
    flow = np.asarray(flow, dtype=np.float64)
    if log.get("warning"):
        logger.debug("network simplex warning: %s", log["warning"])
    u, v = _complete_potentials(prob, np.asarray(log["u"], dtype=np.float64), np.asarray(log["v"], dtype=np.float64))
    gap = certificate_gap(prob, flow, u, v)
    if gap > CERTIFICATE_TOL:
        raise ConvergenceError(f"transport plan failed its optimality certificate by {gap:.3e}", residual=gap, iterations=0)
    return TransportPlan(flow, float(np.sum(prob.cost * flow)), marginal_violation(prob, flow), 0, (u, v))


def round_to_marginals(flow: np.ndarray, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """Move an approximate plan onto the transport polytope of (fx, fy)."""
    rows = flow.sum(axis=1)
    flow = flow * np.minimum(1.0, np.divide(fx, rows, out=np.ones_like(fx), where=rows > 0))[:, None]
    cols = flow.sum(axis=0)
    flow = flow * np.minimum(1.0, np.divide(fy, cols, out=np.ones_like(fy), where=cols > 0))[None, :]
    # scaled sums can overshoot a marginal by an ulp; a negative error would push flow below 0
    err_rows = np.maximum(fx - flow.sum(axis=1), 0.0)
    err_cols = np.maximum(fy - flow.sum(axis=0), 0.0)
    mass = err_rows.sum()
    if mass > 0.0:
        flow = flow + np.outer(err_rows, err_cols) / mass
    return flow


def emd_sinkhorn(
    prob: TransportProblem, epsilon: float, max_iters: int = 100000, tol: float = 1e-9
) -> TransportPlan:
    """
    Entropic-regularized plan from log-domain Sinkhorn scaling.

    Zero-mass rows and columns are left out of the scaling. The returned
    residual is the marginal violation before rounding.

    Raises:
        ConvergenceError: The marginal violation is still above tol after max_iters
    """
    if epsilon <= 0.0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    rows, cols = prob.fx > 0.0, prob.fy > 0.0
    a, b = prob.fx[rows], prob.fy[cols]
    cost = np.ascontiguousarray(prob.cost[np.ix_(rows, cols)])
    sub, log = ot.bregman.sinkhorn_log(a, b, cost, epsilon, numItermax=max_iters, stopThr=tol, log=True, warn=False)

    flow = np.zeros_like(prob.cost)
    flow[np.ix_(rows, cols)] = sub
    residual = marginal_violation(prob, flow)
    iterations = int(log["niter"]) + 1
    if residual > tol:
        raise ConvergenceError(
            f"Sinkhorn marginal violation {residual:.3e} after {iterations} iterations", residual=residual, iterations=iterations
        )
    flow = round_to_marginals(flow, prob.fx, prob.fy)
    return TransportPlan(flow, float(np.sum(prob.cost * flow)), residual, iterations)
