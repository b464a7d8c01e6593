"""Iterative least squares positioning from pseudo-ranges with a common bias."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from tsloc.errors import InsufficientAnchors, NoConvergence, SingularGeometry

MAX_ITERATIONS = 50
STEP_TOLERANCE = 1e-6
MAX_HALVINGS = 8
MAX_CONDITION = 1e10


@dataclass
class PositionEstimate:
    node: str
    pos: np.ndarray
    common_bias: float
    iterations: int
    residual_rms: float
    converged: bool
    excluded_anchors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "pos": [float(x) for x in self.pos],
            "bias": float(self.common_bias),
            "residual_rms": float(self.residual_rms),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "excluded_anchors": list(self.excluded_anchors),
        }


def weighted_rms(residuals: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sqrt(np.sum(weights * residuals**2) / np.sum(weights)))


def check_conditioning(normal: np.ndarray, max_condition: float = MAX_CONDITION) -> None:
    scale = np.sqrt(np.diag(normal))
    if np.any(scale <= 0) or not np.all(np.isfinite(normal)):
        raise SingularGeometry("normal matrix has a vanishing or non-finite diagonal")
    cond = np.linalg.cond(normal / np.outer(scale, scale))
    if not cond < max_condition:
        raise SingularGeometry(f"normal matrix condition {cond:.3g} exceeds {max_condition:.1g}")


def _model(x, anchors):
    diff = x[None, :-1] - anchors
    dist = np.sqrt(np.sum(diff**2, axis=1))
    return dist + x[-1], diff, dist


def ils_solve(
    prs,
    anchor_positions: Mapping[str, np.ndarray],
    init=None,
    dim: int | None = None,
    *,
    max_iterations: int = MAX_ITERATIONS,
    tolerance: float = STEP_TOLERANCE,
    max_condition: float = MAX_CONDITION,
) -> PositionEstimate:
    """Gauss-Newton on (position, common bias).

    Residual of entry ``e`` is ``pseudo_range_e - (|pos - anchor_e| + bias)``.
    A step that increases the weighted residual RMS is halved up to 8 times.
    Iteration stops when the step norm drops below ``tolerance`` meters;
    reaching ``max_iterations`` returns the last iterate with
    ``converged=False``.  The initial point defaults to the anchor centroid.
    """
    anchors = np.array([np.asarray(anchor_positions[a], dtype=float) for a in prs.anchors])
    dim = dim or anchors.shape[1]
    if len(prs) < dim + 2:
        raise InsufficientAnchors(
            f"{len(prs)} pseudo-ranges; need {dim + 2} for {dim} coordinates, a bias and one redundancy"
        )
    rho = prs.values
    w = prs.weights
    w = w / w.max()

    pos0 = anchors.mean(axis=0) if init is None else np.asarray(init, dtype=float).copy()
    if np.any(np.linalg.norm(anchors - pos0, axis=1) == 0):
        pos0 = pos0 + 1e-3  # keep every unit vector defined
    bias0 = float(np.average(rho - np.linalg.norm(anchors - pos0, axis=1), weights=w))
    x = np.concatenate([pos0, [bias0]])

    pred, diff, dist = _model(x, anchors)
    res = rho - pred
    cost = weighted_rms(res, w)
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        J = np.empty((len(rho), dim + 1))
        J[:, :dim] = diff / np.maximum(dist, 1e-12)[:, None]
        J[:, dim] = 1.0
        normal = J.T @ (w[:, None] * J)
        check_conditioning(normal, max_condition)
        step = np.linalg.solve(normal, J.T @ (w * res))
        for _ in range(MAX_HALVINGS + 1):
            trial = x + step
            pred_t, diff_t, dist_t = _model(trial, anchors)
            res_t = rho - pred_t
            cost_t = weighted_rms(res_t, w)
            if cost_t <= cost or np.linalg.norm(step) < tolerance:
                break
            step = step / 2
        if not np.all(np.isfinite(trial)):
            raise NoConvergence("Gauss-Newton iterate became non-finite")
        x, res, diff, dist, cost = trial, res_t, diff_t, dist_t, cost_t
        if np.linalg.norm(step) < tolerance:
            converged = True
            break

    return PositionEstimate(
        node=prs.target,
        pos=x[:dim].copy(),
        common_bias=float(x[dim]),
        iterations=it,
        residual_rms=float(np.sqrt(np.mean(res**2))),
        converged=converged,
    )


def leverages(prs, anchor_positions, estimate: PositionEstimate) -> np.ndarray:
    """Diagonal of the weighted hat matrix at ``estimate``."""
    anchors = np.array([np.asarray(anchor_positions[a], dtype=float) for a in prs.anchors])
    diff = estimate.pos[None, :] - anchors
    dist = np.maximum(np.linalg.norm(diff, axis=1), 1e-12)
    J = np.hstack([diff / dist[:, None], np.ones((len(prs), 1))])
    w = prs.weights / prs.weights.max()
    sw = np.sqrt(w)[:, None] * J
    normal = sw.T @ sw
    return np.einsum("ij,jk,ik->i", sw, np.linalg.inv(normal), sw)
