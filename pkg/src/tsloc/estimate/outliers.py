"""Data-driven exclusion of NLOS pseudo-ranges."""
from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np

from tsloc.errors import SingularGeometry, TooFewEntriesToFilter
from tsloc.estimate.ils import ils_solve, leverages, weighted_rms

MAD_TO_SIGMA = 1.4826
# cap on candidate subsets examined per exclusion count
MAX_SUBSETS = 256


def _residuals(prs, anchor_positions, est) -> np.ndarray:
    anchors = np.array([anchor_positions[a] for a in prs.anchors], dtype=float)
    return prs.values - (np.linalg.norm(anchors - est.pos, axis=1) + est.common_bias)


def _robust_scale(prs, anchor_positions, est) -> float:
    """1.4826 x MAD of the leverage-standardized residuals ``r / sqrt(1 - h)``."""
    r = _residuals(prs, anchor_positions, est)
    h = np.clip(leverages(prs, anchor_positions, est), 0.0, 1.0 - 1e-9)
    z = r / np.sqrt(1.0 - h)
    return MAD_TO_SIGMA * float(np.median(np.abs(z - np.median(z))))


def _fit(prs, anchor_positions, init, dim, solve_kwargs):
    try:
        est = ils_solve(prs, anchor_positions, init, dim, **solve_kwargs)
    except SingularGeometry:
        return None, np.inf
    w = prs.weights / prs.weights.max()
    return est, weighted_rms(_residuals(prs, anchor_positions, est), w)


def global_statistic(prs, anchor_positions, init=None, *, dim=None, **solve_kwargs) -> float:
    """Largest linearized deleted residual ``|r| / (1 - h)`` of the full fit, meters.

    A set whose statistic stays below the exclusion floor cannot yield an
    exclusion, which lets :func:`screen` skip its subset search.
    """
    dim = dim or len(next(iter(anchor_positions.values())))
    est, _ = _fit(prs, anchor_positions, init, dim, solve_kwargs)
    if est is None:
        return np.inf
    h = np.clip(leverages(prs, anchor_positions, est), 0.0, 1.0 - 1e-9)
    return float(np.max(np.abs(_residuals(prs, anchor_positions, est)) / (1.0 - h)))


def screen(
    prs,
    anchor_positions,
    init=None,
    *,
    threshold=3.0,
    floor_m=1.0,
    dim=None,
    max_subsets=MAX_SUBSETS,
    **solve_kwargs,
):
    """Anchors to exclude and the strength of the weakest exclusion.

    For every exclusion count ``k`` the best-fitting subset of ``n - k``
    entries (lowest weighted residual RMS; ties keep the heavier entries) is
    solved, and each left-out entry is scored by its deleted residual, the
    misfit against that subset's solution.  The largest ``k`` whose left-out
    entries all have positive deleted residuals above ``threshold`` robust
    sigmas of the subset fit (never less than ``floor_m`` meters) wins.
    ``k`` stops where the subset count would exceed ``max_subsets`` or
    fewer than ``dim + 2`` entries would remain.  The search is skipped when
    the full fit has no linearized deleted residual ``r / (1 - h)`` above
    ``floor_m``.

    Returns ``(excluded, ratio)`` where ``ratio`` is the smallest deleted
    residual over limit among the excluded entries (0 when none).
    """
    dim = dim or len(next(iter(anchor_positions.values())))
    n = len(prs)
    weights = prs.weights
    best = ([], 0.0)
    if global_statistic(prs, anchor_positions, init, dim=dim, **solve_kwargs) <= floor_m:
        return best
    for k in range(1, n - (dim + 2) + 1):
        if comb(n, k) > max_subsets:
            break
        chosen = None
        for out in combinations(range(n), k):
            rest = prs.without([prs.anchors[i] for i in out])
            est, cost = _fit(rest, anchor_positions, init, dim, solve_kwargs)
            if est is None:
                continue
            key = (cost, float(weights[list(out)].sum()), out)
            if chosen is None or key < chosen[0]:
                chosen = (key, out, rest, est)
        if chosen is None:
            continue
        _, out, rest, est = chosen
        limit = max(threshold * _robust_scale(rest, anchor_positions, est), floor_m)
        ratios = []
        for i in out:
            e = prs.entries[i]
            a = np.asarray(anchor_positions[e.anchor], dtype=float)
            ratios.append((e.pseudo_range - (np.linalg.norm(a - est.pos) + est.common_bias)) / limit)
        if min(ratios) > 1.0:
            order = np.argsort(ratios)[::-1]
            best = ([prs.anchors[out[i]] for i in order], float(min(ratios)))
    return best


def reject_outliers(
    prs,
    anchor_positions,
    init=None,
    *,
    threshold: float = 3.0,
    floor_m: float = 1.0,
    dim: int | None = None,
    **solve_kwargs,
):
    """Drop positively biased pseudo-ranges.

    A least-squares fit spreads a single large bias over all residuals, so
    the ordinary residual of the faulty entry can look unremarkable; the
    test therefore uses deleted residuals, each entry judged against the
    best solution computed without it (see :func:`screen`).  Only positive
    residuals qualify because NLOS propagation only ever adds delay.  Ties
    go to the lowest-weight entry.  At least ``dim + 2`` entries remain.

    Returns ``(filtered_set, excluded_anchors)``.
    """
    dim = dim or len(next(iter(anchor_positions.values())))
    if len(prs) < dim + 3:
        raise TooFewEntriesToFilter(
            f"{len(prs)} pseudo-ranges; outlier filtering needs at least {dim + 3}"
        )
    excluded, _ = screen(
        prs, anchor_positions, init, threshold=threshold, floor_m=floor_m, dim=dim, **solve_kwargs
    )
    return prs.without(excluded), excluded
