"""Cooperative refinement: node-by-node (sequential) or all at once (joint)."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Sequence

import numpy as np

from tsloc.channel import SPEED_OF_LIGHT
from tsloc.dataset import Dataset
from tsloc.errors import (
    DisconnectedTarget,
    InsufficientAnchors,
    NoConvergence,
    ScenarioError,
    SingularGeometry,
    UnlocatableNode,
)
from tsloc.estimate.drift import compensate_drift
from tsloc.estimate.ils import (
    MAX_CONDITION,
    MAX_HALVINGS,
    PositionEstimate,
    check_conditioning,
    ils_solve,
    weighted_rms,
)
from tsloc.estimate.outliers import global_statistic, reject_outliers, screen
from tsloc.estimate.pseudoranges import Scheme, extract_pseudoranges
from tsloc.simulate import NoisyPrior

# joint solve / outlier check cycles before giving up on further exclusions
MAX_REJECTION_ROUNDS = 10


@dataclass(frozen=True)
class EstimatorConfig:
    scheme: Scheme = Scheme.DOUBLE_DIFFERENCE
    refinement: str = "joint"
    pairing_window_s: float = 0.1
    drift_compensation: bool = True
    outlier_rejection: bool = True
    outlier_threshold: float = 3.0
    outlier_floor_m: float = 1.0
    max_iterations: int = 50
    tolerance_m: float = 1e-6
    min_pairs: int = 2
    order: tuple | None = None
    c: float = SPEED_OF_LIGHT

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "EstimatorConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ScenarioError(f"unknown estimator settings {sorted(unknown)}")
        if "scheme" in d:
            try:
                d["scheme"] = Scheme.parse(d["scheme"])
            except ValueError:
                raise ScenarioError(f"unknown differencing scheme {d['scheme']!r}") from None
        if "order" in d and d["order"] is not None:
            d["order"] = tuple(d["order"])
        cfg = cls(**d)
        if cfg.refinement not in ("sequential", "joint"):
            raise ScenarioError(f"refinement must be 'sequential' or 'joint', got {cfg.refinement!r}")
        if not cfg.pairing_window_s > 0:
            raise ScenarioError("pairing_window_s must be > 0")
        return cfg

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["scheme"] = self.scheme.value
        out["order"] = list(self.order) if self.order is not None else None
        return out


@dataclass
class RefinementResult:
    estimates: dict
    pseudoranges: dict = field(default_factory=dict)
    order: list = field(default_factory=list)


def _dimension(priors) -> int:
    for p in priors:
        return int(np.asarray(p.pos0).size)
    raise UnlocatableNode("no node has a known or approximate position")


def unknown_nodes(dataset: Dataset, priors) -> list[str]:
    """Nodes to estimate: GNSS helpers (sigma0 > 0) and nodes with no prior at all."""
    prior_map = {p.node: p for p in priors}
    seen = set(dataset.receivers()) | set(dataset.transmitters()) | set(prior_map)
    return sorted(n for n in seen if n not in prior_map or prior_map[n].sigma0 > 0)


def default_order(dataset: Dataset, priors) -> list[str]:
    """Descending connectivity degree, nodes without prior (blind) last."""
    prior_map = {p.node: p for p in priors}
    neighbours: dict[str, set] = {}
    for rx, tx in dataset.links():
        neighbours.setdefault(rx, set()).add(tx)
        neighbours.setdefault(tx, set()).add(rx)
    return sorted(
        unknown_nodes(dataset, priors),
        key=lambda n: (n not in prior_map, -len(neighbours.get(n, ())), n),
    )


def refine_sequential(
    dataset: Dataset,
    priors: Sequence[NoisyPrior],
    order: Sequence[str] | None = None,
    config: EstimatorConfig | None = None,
) -> dict[str, PositionEstimate]:
    """Locate the unknown nodes one after another, feeding each result forward.

    At its turn a node is solved from pseudo-ranges against the best position
    currently known for every other node: exact for fixed stations, refined
    for nodes already processed, GNSS prior for helpers still waiting.
    """
    return _sequential(dataset, priors, order, config or EstimatorConfig()).estimates


def _sequential(dataset, priors, order, config) -> RefinementResult:
    dim = _dimension(priors)
    prior_map = {p.node: p for p in priors}
    unknown = unknown_nodes(dataset, priors)
    order = list(order if order is not None else (config.order or default_order(dataset, priors)))
    missing = set(unknown) - set(order)
    if missing:
        raise UnlocatableNode(f"refinement order omits nodes {sorted(missing)}")
    extra = [n for n in order if n not in unknown]
    if extra:
        raise UnlocatableNode(f"refinement order lists nodes that are not unknown: {extra}")

    current = {n: p.pos0 for n, p in prior_map.items()}
    estimates, sets = {}, {}
    for node in order:
        known = [NoisyPrior(n, pos, 0.0) for n, pos in current.items() if n != node]
        try:
            prs = extract_pseudoranges(
                dataset, known, node, config.scheme,
                window=config.pairing_window_s, c=config.c, min_pairs=config.min_pairs,
            )
        except (InsufficientAnchors, DisconnectedTarget) as exc:
            raise UnlocatableNode(f"node {node!r}: {exc}") from exc
        if len(prs) < dim + 2:
            raise UnlocatableNode(
                f"node {node!r}: only {len(prs)} pseudo-ranges at its turn, need {dim + 2}"
            )
        positions = {e.anchor: current[e.anchor] for e in prs.entries}
        init = prior_map[node].pos0 if node in prior_map else None
        solve = dict(max_iterations=config.max_iterations, tolerance=config.tolerance_m)
        excluded = []
        if config.outlier_rejection and len(prs) >= dim + 3:
            prs, excluded = reject_outliers(
                prs, positions, init, threshold=config.outlier_threshold,
                floor_m=config.outlier_floor_m, dim=dim, **solve,
            )
        try:
            est = ils_solve(prs, positions, init, dim, **solve)
        except SingularGeometry as exc:
            raise UnlocatableNode(f"node {node!r}: {exc}") from exc
        est.excluded_anchors = excluded
        estimates[node] = est
        sets[node] = prs
        current[node] = est.pos
    return RefinementResult(estimates, sets, order)


class _JointProblem:
    """Stacked residuals of every target's pseudo-ranges plus GNSS prior terms.

    Entry ``e`` of target ``k`` predicts its timing part as
    ``d(k, a_e) + bias_k - sum(coef * d(x, y))``; every distance may involve
    unknown positions, which is what couples the targets together.
    """

    def __init__(self, sets: Mapping, priors, unknown: list[str], fixed_pos: Mapping, dim: int):
        self.dim = dim
        self.unknown = list(unknown)
        self.targets = [k for k in self.unknown if k in sets]
        names = sorted(set(fixed_pos) | set(self.unknown))
        self.node_index = {n: i for i, n in enumerate(names)}
        self.fixed = np.zeros((len(names), dim))
        for n, p in fixed_pos.items():
            self.fixed[self.node_index[n]] = p
        self.param_of_node = np.full(len(names), -1)
        for j, n in enumerate(self.unknown):
            self.param_of_node[self.node_index[n]] = j * dim
        self.n_pos = len(self.unknown) * dim
        self.bias_of_target = {k: self.n_pos + j for j, k in enumerate(self.targets)}
        self.n_params = self.n_pos + len(self.targets)

        raw, w, row_target, t_row, t_coef, t_x, t_y = [], [], [], [], [], [], []
        self.row_owner = []
        for k in self.targets:
            for e in sets[k].entries:
                r = len(raw)
                raw.append(e.raw)
                w.append(e.weight)
                row_target.append(self.bias_of_target[k])
                self.row_owner.append(k)
                for coef, x, y in ((1.0, k, e.anchor),) + tuple((-c, x, y) for c, x, y in e.terms):
                    t_row.append(r)
                    t_coef.append(coef)
                    t_x.append(self.node_index[x])
                    t_y.append(self.node_index[y])
        self.n_entries = len(raw)
        self.raw = np.array(raw)
        self.w_entries = np.array(w)
        self.row_bias = np.array(row_target, dtype=int)
        self.t_row = np.array(t_row, dtype=int)
        self.t_coef = np.array(t_coef)
        self.t_x = np.array(t_x, dtype=int)
        self.t_y = np.array(t_y, dtype=int)

        prior_map = {p.node: p for p in priors}
        self.prior_nodes = [n for n in self.unknown if n in prior_map and prior_map[n].sigma0 > 0]
        self.prior_pos = np.array([prior_map[n].pos0 for n in self.prior_nodes]).reshape(-1, dim)
        self.prior_idx = np.array(
            [self.param_of_node[self.node_index[n]] + d for n in self.prior_nodes for d in range(dim)],
            dtype=int,
        )
        self.prior_w = np.repeat([1.0 / prior_map[n].sigma0**2 for n in self.prior_nodes], dim)
        self.weights = np.concatenate([self.w_entries, self.prior_w])
        self.n_obs = self.weights.size

    def positions(self, theta):
        P = self.fixed.copy()
        for n in self.unknown:
            i = self.node_index[n]
            j = self.param_of_node[i]
            P[i] = theta[j:j + self.dim]
        return P

    def evaluate(self, theta):
        P = self.positions(theta)
        diff = P[self.t_x] - P[self.t_y]
        dist = np.sqrt(np.sum(diff**2, axis=1))
        pred = np.bincount(self.t_row, self.t_coef * dist, minlength=self.n_entries)
        pred = pred + theta[self.row_bias]
        res_entries = self.raw - pred
        res_prior = self.prior_pos.ravel() - theta[self.prior_idx]
        return np.concatenate([res_entries, res_prior]), diff, dist

    def jacobian(self, diff, dist):
        J = np.zeros((self.n_obs, self.n_params))
        u = diff / np.maximum(dist, 1e-12)[:, None]
        px = self.param_of_node[self.t_x]
        py = self.param_of_node[self.t_y]
        for d in range(self.dim):
            mx = px >= 0
            np.add.at(J, (self.t_row[mx], px[mx] + d), self.t_coef[mx] * u[mx, d])
            my = py >= 0
            np.add.at(J, (self.t_row[my], py[my] + d), -self.t_coef[my] * u[my, d])
        J[np.arange(self.n_entries), self.row_bias] = 1.0
        J[self.n_entries + np.arange(self.prior_idx.size), self.prior_idx] = 1.0
        return J


def refine_joint(
    dataset: Dataset,
    priors: Sequence[NoisyPrior],
    config: EstimatorConfig | None = None,
) -> dict[str, PositionEstimate]:
    """Solve every unknown position at once.

    One weighted Gauss-Newton problem stacks all targets' pseudo-range
    equations (one common bias per target) with quadratic prior terms pulling
    each GNSS helper toward its initial fix with weight ``1 / sigma0**2``.
    A sequential pass supplies the starting point and the pseudo-range sets.
    Outlier rejection then runs per target against the joint solution, and
    the problem is re-solved whenever an entry is dropped.
    """
    config = config or EstimatorConfig()
    return _joint(dataset, priors, config).estimates


def _gauss_newton(prob, theta, config):
    w = prob.weights / prob.weights.max()
    res, diff, dist = prob.evaluate(theta)
    cost = weighted_rms(res, w)
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        J = prob.jacobian(diff, dist)
        normal = J.T @ (w[:, None] * J)
        check_conditioning(normal, MAX_CONDITION)
        step = np.linalg.solve(normal, J.T @ (w * res))
        for _ in range(MAX_HALVINGS + 1):
            trial = theta + step
            res_t, diff_t, dist_t = prob.evaluate(trial)
            cost_t = weighted_rms(res_t, w)
            if cost_t <= cost or np.linalg.norm(step) < config.tolerance_m:
                break
            step = step / 2
        if not np.all(np.isfinite(trial)):
            raise NoConvergence("joint Gauss-Newton iterate became non-finite")
        theta, res, diff, dist, cost = trial, res_t, diff_t, dist_t, cost_t
        if np.linalg.norm(step) < config.tolerance_m:
            converged = True
            break
    return theta, res, it, converged


def _joint(dataset, priors, config) -> RefinementResult:
    # the sequential pass only provides a starting point and the pseudo-range
    # sets; outliers are judged later against the joint solution, whose
    # reference positions are far better than the raw GNSS priors
    seq = _sequential(dataset, priors, None, replace(config, outlier_rejection=False))
    dim = _dimension(priors)
    prior_map = {p.node: p for p in priors}
    unknown = seq.order
    fixed_pos = {n: p.pos0 for n, p in prior_map.items() if n not in unknown}
    if not unknown:
        return RefinementResult({}, {}, [])
    sets = dict(seq.pseudoranges)
    excluded = {n: [] for n in unknown}

    theta = None
    for _ in range(MAX_REJECTION_ROUNDS + 1):
        prob = _JointProblem(sets, priors, unknown, fixed_pos, dim)
        if prob.n_obs < prob.n_params:
            raise SingularGeometry(
                f"joint problem has {prob.n_obs} observations for {prob.n_params} unknowns"
            )
        if theta is None:
            theta = np.zeros(prob.n_params)
            for n in unknown:
                j = prob.param_of_node[prob.node_index[n]]
                theta[j:j + dim] = seq.estimates[n].pos
            for k in prob.targets:
                theta[prob.bias_of_target[k]] = seq.estimates[k].common_bias
        theta, res, it, converged = _gauss_newton(prob, theta, config)
        if not config.outlier_rejection:
            break
        # one exclusion per round: a single biased entry distorts every
        # coupled position, so judging all targets at once over-rejects.
        # Targets are searched worst first by their global statistic.
        P = prob.positions(theta)
        positions = {n: P[i] for n, i in prob.node_index.items()}
        kw = dict(dim=dim, max_iterations=config.max_iterations, tolerance=config.tolerance_m)
        local = {k: sets[k].reevaluated(positions) for k in prob.targets if len(sets[k]) >= dim + 3}
        stats = {k: global_statistic(local[k], positions, positions[k], **kw) for k in local}
        changed = False
        for k in sorted(stats, key=lambda k: (-stats[k], k)):
            if stats[k] <= config.outlier_floor_m:
                break
            dropped, _ = screen(
                local[k], positions, positions[k],
                threshold=config.outlier_threshold, floor_m=config.outlier_floor_m, **kw,
            )
            if dropped:
                sets[k] = sets[k].without(dropped[:1])
                excluded[k].append(dropped[0])
                changed = True
                break
        if not changed:
            break

    owner = np.array(prob.row_owner)
    estimates = {}
    for n in unknown:
        j = prob.param_of_node[prob.node_index[n]]
        rows = owner == n
        estimates[n] = PositionEstimate(
            node=n,
            pos=theta[j:j + dim].copy(),
            common_bias=float(theta[prob.bias_of_target[n]]) if n in prob.bias_of_target else 0.0,
            iterations=it,
            residual_rms=float(np.sqrt(np.mean(res[: prob.n_entries][rows] ** 2))) if rows.any() else 0.0,
            converged=converged,
            excluded_anchors=excluded[n],
        )
    return RefinementResult(estimates, sets, unknown)


@dataclass
class LocalizationResult:
    estimates: dict
    drifts: dict = field(default_factory=dict)
    drift_reference: str | None = None
    pseudoranges: dict = field(default_factory=dict)


def localize(
    dataset: Dataset,
    priors: Sequence[NoisyPrior],
    config: EstimatorConfig | None = None,
    targets: Sequence[str] | None = None,
) -> LocalizationResult:
    """Full estimation chain: drift compensation, then sequential or joint refinement.

    ``targets`` optionally lists nodes that must be located; one that appears
    in no reception record raises UnlocatableNode instead of being skipped.
    """
    config = config or EstimatorConfig()
    if targets is not None:
        seen = set(dataset.receivers()) | set(dataset.transmitters())
        missing = sorted(set(targets) - seen)
        if missing:
            raise UnlocatableNode(f"nodes {missing} appear in no reception record")
    drifts, reference = {}, None
    if config.drift_compensation:
        dataset, drifts = compensate_drift(dataset)
        reference = next(iter(drifts.values())).reference if drifts else None
    if config.refinement == "joint":
        res = _joint(dataset, priors, config)
    else:
        res = _sequential(dataset, priors, None, config)
    return LocalizationResult(res.estimates, drifts, reference, res.pseudoranges)
