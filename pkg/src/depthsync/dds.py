"""Depth Descent Synchronization.

Node ``j`` gathers the tangent vectors ``Log_{R_j}(R_jk R_k)`` proposed by its
neighbors, picks a point ``v_j`` of Tukey depth at least ``ceil(beta n_j)`` in
that cloud, and moves to ``Exp_{R_j}(eta v_j)``.  Nodes are visited
cyclically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .depth import Rule, SelectionRule, max_depth_point
from .errors import UnsupportedDimError, ValidationError
from .graph import MeasurementGraph
from .manifold import angular_distance, exp_map, geodesic_distance, tangent_dim, wrap_angle
from .problem import (
    MatrixProblem,
    So2Problem,
    angles_of,
    matrix_spread,
    reorthonormalize,
    rotations_of,
    run_cyclic,
    so2_spread,
)
from .scenario import Scenario
from .trace import RunTrace, SyncState


def default_beta(dim: int) -> float:
    return 1.0 / (dim * (dim - 1) + 2)


@dataclass(frozen=True)
class DdsConfig:
    """DDS settings; ``None`` fields are filled by :meth:`resolve`.

    Attributes:
        beta: depth level, default ``1/(D(D-1)+2)``.
        eta: step size, default 1 for D <= 3 and required otherwise.
        rule: selection rule, default depends on the tangent dimension.
        max_epochs: epoch budget.
        stop_tol: the run has converged once every step of an epoch is below this.
        delta_tol: optional extra stop once delta drops below it (needs ground truth).
        order: "cyclic", or "random" for experiments.
    """

    beta: float | None = None
    eta: float | None = None
    rule: SelectionRule | None = None
    max_epochs: int = 2000
    stop_tol: float = 1e-12
    delta_tol: float | None = None
    order: str = "cyclic"

    def resolve(self, dim: int) -> "DdsConfig":
        d = tangent_dim(dim)
        if d > 3:
            raise UnsupportedDimError(
                f"DDS needs Tukey depth in dimension {d}; only D <= 3 is supported")
        beta = default_beta(dim) if self.beta is None else float(self.beta)
        if not 0 < beta < 0.5:
            raise ValidationError(f"beta must lie in (0, 1/2), got {beta}")
        eta = 1.0 if self.eta is None else float(self.eta)
        if not 0 < eta <= 1:
            raise ValidationError(f"eta must lie in (0, 1] for D <= 3, got {eta}")
        rule = self.rule if self.rule is not None else SelectionRule.default_for(d)
        if rule.variant is Rule.TRIMMED_MEAN and d != 1:
            raise ValidationError("the trimmed-mean rule needs D = 2")
        if self.max_epochs < 0 or self.stop_tol < 0:
            raise ValidationError("max_epochs and stop_tol must be non-negative")
        if self.order not in ("cyclic", "random"):
            raise ValidationError(f"unknown order {self.order!r}")
        return replace(self, beta=beta, eta=eta, rule=rule)


def _so2_step(prob: So2Problem, cfg: DdsConfig, rng):
    def step(theta, j):
        cloud = prob.cloud(theta, j)
        if len(cloud) == 0:
            return theta, 0.0
        v = float(max_depth_point(cloud, cfg.beta, cfg.rule, rng)[0])
        theta = theta.copy()
        theta[j] = wrap_angle(theta[j] + cfg.eta * v)
        return theta, abs(cfg.eta * v)
    return step


def _matrix_step(prob: MatrixProblem, cfg: DdsConfig, rng):
    def step(X, j):
        cloud = prob.cloud(X, j)
        if len(cloud) == 0:
            return X, 0.0
        v = max_depth_point(cloud, cfg.beta, cfg.rule, rng)
        X = X.copy()
        X[j] = exp_map(X[j], cfg.eta * v)
        return X, float(cfg.eta * np.linalg.norm(v))
    return step


def dds_update_node(state: SyncState, graph: MeasurementGraph, config: DdsConfig, j: int,
                    rng=None) -> tuple[SyncState, float]:
    """One DDS update of node ``j``; returns the new state and ``eta * |v_j|``."""
    cfg = config.resolve(graph.dim)
    rng = rng if rng is not None else np.random.default_rng(0)
    if graph.degree(j) < 1:
        raise ValidationError(f"node {j} has no neighbors")
    if graph.dim == 2:
        theta, s = _so2_step(So2Problem(graph), cfg, rng)(angles_of(state.estimates), j)
        new = rotations_of(theta)
    else:
        new, s = _matrix_step(MatrixProblem(graph), cfg, rng)(np.array(state.estimates), j)
    return SyncState(new, state.t + 1), s


def normalization_spread(estimates, ground_truth) -> float:
    """Largest distance between normalization products ``R*_j^T R_j``.

    D = 2 uses the angular distance; larger D the Frobenius-log distance.
    """
    E = np.asarray(estimates, dtype=float)
    G = np.asarray(ground_truth, dtype=float)
    if E.shape[-1] == 2:
        p = wrap_angle(angles_of(E) - angles_of(G))
        return float(np.max(angular_distance(p[:, None], p[None, :])))
    P = np.swapaxes(G, 1, 2) @ E
    return float(np.max(geodesic_distance(P[:, None], P[None, :])))


def solve_so2(prob, theta0, theta_star, step, max_epochs, converged, delta_tol, order, rng,
              energy=None):
    return run_cyclic(
        prob.n, theta0, step, lambda th: so2_spread(th, theta_star), max_epochs, converged,
        delta_tol=delta_tol, energy=energy, order=order, rng=rng)


def dds_run(scenario: Scenario, config: DdsConfig | None = None, rng=None,
            ball: bool = True) -> tuple[SyncState, RunTrace]:
    """Run DDS from ``scenario.init`` and trace delta and the enclosing-ball radius."""
    g = scenario.graph
    cfg = (config or DdsConfig()).resolve(g.dim)
    rng = rng if rng is not None else np.random.default_rng(0)
    conv = lambda s: s < cfg.stop_tol  # noqa: E731
    if g.dim == 2:
        prob = So2Problem(g)
        theta, trace = solve_so2(prob, angles_of(scenario.init), angles_of(scenario.ground_truth),
                                 _so2_step(prob, cfg, rng), cfg.max_epochs, conv, cfg.delta_tol,
                                 cfg.order, rng)
        est = rotations_of(theta)
    else:
        prob = MatrixProblem(g)
        gt = scenario.ground_truth
        est, trace = run_cyclic(
            g.n, np.array(scenario.init), _matrix_step(prob, cfg, rng),
            lambda X: matrix_spread(X, gt, ball), cfg.max_epochs, conv, delta_tol=cfg.delta_tol,
            order=cfg.order, rng=rng, end_of_epoch=reorthonormalize)
    trace.extra["algo"] = "dds"
    return SyncState(est, trace.epochs * g.n), trace


def success(trace: RunTrace, tol: float = 1e-6) -> bool:
    d = trace.final_delta
    return d is not None and math.isfinite(d) and d < tol
