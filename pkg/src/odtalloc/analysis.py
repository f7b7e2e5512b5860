"""Numeric verifiers for the structural properties of the trip cost and the
one-dimensional monotone-map oracle.

The trip cost has constant curvature in the (task, agent) pairing: the
gradient-in-x map separates distinct agent positions at the fixed rate
2*sqrt(2), the mixed Hessian is the constant stack [-2I; -2I] of rank n,
and the correlation cost -(s.y) has nonpositive cross differences on
ordered pairs.  These checks sample the claims numerically and report a
worst case plus the witness achieving it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost import grad_x, grad_y, mixed_hessian
from .errors import DimensionMismatch
from .measures import DiscreteMeasure, TaskSet
from .rng import rng_stream
from .solver import TransportPlan


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one sampled condition check."""

    condition_name: str
    passed: bool
    samples_checked: int
    worst_case: float
    witness: tuple | None = None

    def to_json(self) -> dict:
        witness = None
        if self.witness is not None:
            witness = [
                np.asarray(w, dtype=float).ravel().tolist() for w in self.witness
            ]
        return {
            "condition": self.condition_name,
            "passed": bool(self.passed),
            "samples": int(self.samples_checked),
            "worst_case": float(self.worst_case),
            "witness": witness,
        }


def verify_twist(dim: int, samples: int, seed: int = 0) -> ConditionReport:
    """Check injectivity of y -> grad_x c(x, y) on random triples.

    Records the worst separation ratio |grad_x(x,y) - grad_x(x,y')| /
    |y - y'|, which is the constant 2*sqrt(2) for this cost.  Pairs with
    |y - y'| < 1e-9 are rejected and redrawn.
    """
    if samples < 1:
        raise DimensionMismatch("need at least one sample")
    rng = rng_stream(seed)
    worst = math.inf
    witness = None
    for _ in range(samples):
        o = np.array(rng.normals(dim))
        d = np.array(rng.normals(dim))
        while True:
            y = np.array(rng.normals(dim))
            y2 = np.array(rng.normals(dim))
            gap = float(np.linalg.norm(y - y2))
            if gap >= 1e-9:
                break
        ratio = float(np.linalg.norm(grad_x(o, d, y) - grad_x(o, d, y2))) / gap
        if ratio < worst:
            worst = ratio
            witness = (np.concatenate([o, d]), y, y2)
    return ConditionReport("twist", worst > 1e-9, samples, worst, witness)


def verify_nondegeneracy(dim: int, samples: int, seed: int = 0) -> ConditionReport:
    """Check rank(mixed Hessian) = n by singular values on random triples.

    The n-th singular value of the stacked [-2I; -2I] is 2*sqrt(2)
    regardless of the evaluation point; the numeric rank threshold is
    1e-8 times the largest singular value.
    """
    if samples < 1:
        raise DimensionMismatch("need at least one sample")
    rng = rng_stream(seed)
    worst = math.inf
    witness = None
    passed = True
    for _ in range(samples):
        o = np.array(rng.normals(dim))
        d = np.array(rng.normals(dim))
        y = np.array(rng.normals(dim))
        singular = np.linalg.svd(mixed_hessian(o, d, y), compute_uv=False)
        rank = int(np.sum(singular > 1e-8 * singular[0]))
        if rank != dim:
            passed = False
        nth = float(singular[dim - 1])
        if nth < worst:
            worst = nth
            witness = (np.concatenate([o, d]), y)
    return ConditionReport("nondegeneracy", passed, samples, worst, witness)


def cross_difference(c, x, x2, y, y2) -> float:
    """c(x,y) + c(x',y') - c(x,y') - c(x',y) for a cost handle c."""
    return float(c(x, y) + c(x2, y2) - c(x, y2) - c(x2, y))


def _interp_knots(points: np.ndarray, weights: np.ndarray):
    """Sorted atoms with positions from cumulative weight, endpoints at 0 and 1.

    Convention (fixed for reproducibility): sort atoms ascending (stable),
    take cumulative weights c_k, and place atom k at (c_k - c_0)/(c_last - c_0).
    With uniform weights this is linear interpolation between order
    statistics with inclusive endpoints.
    """
    order = np.argsort(points, kind="stable")
    values = points[order]
    cum = np.cumsum(weights[order])
    if values.size == 1:
        return np.array([0.0, 1.0]), np.array([values[0], values[0]])
    span = cum[-1] - cum[0]
    if span <= 0.0:
        positions = np.linspace(0.0, 1.0, values.size)
    else:
        positions = (cum - cum[0]) / span
    return positions, values


def _quantile(positions, values, q):
    return np.interp(q, positions, values)


def _cdf(positions, values, x):
    return np.interp(x, values, positions)


def check_nestedness_1d(
    tasks: TaskSet, agents: DiscreteMeasure, grid: int = 64
) -> ConditionReport:
    """Verify that mass-balanced sub-level sets of grad_y c are nested in 1-D.

    For agent level y the set {x : grad_y c(x, y) <= k} is {s >= (4y-k)/2}
    in the index s = o + d, so calibrating k by mass balance makes the
    threshold t(y) the (1 - F_nu(y))-quantile of the index distribution.
    Nestedness holds iff t is non-increasing along increasing y; the report
    records the largest observed increase.
    """
    if tasks.dim != 1 or agents.dim != 1:
        raise DimensionMismatch("nestedness check is defined for 1-D instances")
    if grid < 2:
        raise DimensionMismatch("grid must have at least 2 points")
    index_points = (tasks.origins + tasks.destinations).ravel()
    s_pos, s_val = _interp_knots(index_points, np.asarray(tasks.weights))
    y_pos, y_val = _interp_knots(agents.points.ravel(), np.asarray(agents.weights))
    levels = np.linspace(0.0, 1.0, grid)
    y_grid = _quantile(y_pos, y_val, levels)
    thresholds = _quantile(s_pos, s_val, 1.0 - _cdf(y_pos, y_val, y_grid))
    increases = np.diff(thresholds)
    worst = float(increases.max()) if increases.size else 0.0
    passed = worst <= 1e-12
    witness = None
    if increases.size:
        k = int(np.argmax(increases))
        witness = (np.array([y_grid[k], y_grid[k + 1]]), np.array([thresholds[k], thresholds[k + 1]]))
    return ConditionReport("nestedness", passed, grid, worst, witness)


def monotone_map_1d(
    index_measure: DiscreteMeasure, agents: DiscreteMeasure
) -> TransportPlan:
    """Comonotone coupling of 1-D index and agent measures.

    Sorts both sides ascending (stable) and pairs mass north-west-corner
    style.  For the correlation cost -(s y) the cross difference is <= 0 on
    ordered pairs, so this coupling is optimal and serves as an independent
    oracle for 1-D reduced solves.  The reported objective is against
    -(s_i y_j).
    """
    if index_measure.dim != 1 or agents.dim != 1:
        raise DimensionMismatch("monotone map is defined for 1-D measures")
    s = index_measure.points.ravel()
    y = agents.points.ravel()
    s_order = np.argsort(s, kind="stable")
    y_order = np.argsort(y, kind="stable")
    s_left = list(np.asarray(index_measure.weights)[s_order])
    y_left = list(np.asarray(agents.weights)[y_order])
    entries = []
    objective = 0.0
    a = b = 0
    while a < len(s_left) and b < len(y_left):
        mass = min(s_left[a], y_left[b])
        if mass > 0.0:
            i, j = int(s_order[a]), int(y_order[b])
            entries.append((i, j, mass))
            objective += mass * -(s[i] * y[j])
        s_left[a] -= mass
        y_left[b] -= mass
        if s_left[a] <= y_left[b]:
            a += 1
        else:
            b += 1
    entries.sort()
    return TransportPlan(tuple(entries), objective, len(s), len(y))


def indifference_set_distance(o, d, y, k) -> float:
    """Distance |4y - 2(o + d) - k| of a task to the indifference set at (y, k).

    Zero exactly when the task (o, d) lies in the affine set where the
    agent-gradient equals k; membership within 1e-9 counts as inside.
    """
    gradient = grad_y(o, d, y)
    k = np.asarray(k, dtype=float).ravel()
    if k.size != gradient.size:
        raise DimensionMismatch("k must match the agent dimension")
    return float(np.linalg.norm(gradient - k))
