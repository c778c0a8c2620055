"""eta-damped Trimmed Averaging Synchronization on SO(2).

Each node moves a fraction ``eta`` of the way towards the trimmed mean of the
angular offsets proposed by its neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .depth import trimmed_mean_1d
from .errors import ValidationError
from .graph import MeasurementGraph
from .manifold import wrap_angle
from .problem import So2Problem, angles_of, rotations_of
from .dds import solve_so2
from .scenario import Scenario
from .trace import RunTrace, SyncState


def default_eta(n: int) -> float:
    return min(0.9, 0.9 * (n - 1) / (n + 1))


@dataclass(frozen=True)
class TasConfig:
    eta: float | None = None
    max_epochs: int = 2000
    stop_tol: float = 1e-12
    delta_tol: float | None = None
    order: str = "cyclic"

    def resolve(self, graph: MeasurementGraph) -> "TasConfig":
        if graph.dim != 2:
            raise ValidationError("TAS is defined for SO(2) only")
        n = graph.n
        eta = default_eta(n) if self.eta is None else float(self.eta)
        if not 0 < eta < 1:
            raise ValidationError(f"eta must lie strictly between 0 and 1, got {eta}")
        if graph.is_complete() and n > 1 and eta >= (n - 1) / (n + 1):
            raise ValidationError(
                f"on a complete graph eta must stay below (n-1)/(n+1) = {(n - 1) / (n + 1):.6g}")
        if self.max_epochs < 0 or self.stop_tol < 0:
            raise ValidationError("max_epochs and stop_tol must be non-negative")
        return TasConfig(eta, self.max_epochs, self.stop_tol, self.delta_tol, self.order)


def _step(prob: So2Problem, eta: float):
    def step(theta, j):
        cloud = prob.cloud(theta, j)
        if len(cloud) == 0:
            return theta, 0.0
        v = trimmed_mean_1d(cloud)
        theta = theta.copy()
        theta[j] = wrap_angle(theta[j] + eta * v)
        return theta, abs(eta * v)
    return step


def tas_update_node(state: SyncState, graph: MeasurementGraph, config: TasConfig,
                    j: int) -> tuple[SyncState, float]:
    cfg = config.resolve(graph)
    if graph.degree(j) < 1:
        raise ValidationError(f"node {j} has no neighbors")
    theta, s = _step(So2Problem(graph), cfg.eta)(angles_of(state.estimates), j)
    return SyncState(rotations_of(theta), state.t + 1), s


def contraction_bound(n: int, eta: float) -> float:
    """Worst-case per-epoch factor on delta for a complete graph."""
    return (n - 1 - eta) / (n - 1)


def tas_run(scenario: Scenario, config: TasConfig | None = None,
            rng=None) -> tuple[SyncState, RunTrace]:
    """Run TAS; the trace's ``extra["ratios"]`` holds per-epoch delta ratios."""
    g = scenario.graph
    cfg = (config or TasConfig()).resolve(g)
    rng = rng if rng is not None else np.random.default_rng(0)
    prob = So2Problem(g)
    theta, trace = solve_so2(prob, angles_of(scenario.init), angles_of(scenario.ground_truth),
                             _step(prob, cfg.eta), cfg.max_epochs, lambda s: s < cfg.stop_tol,
                             cfg.delta_tol, cfg.order, rng)
    d = trace.deltas()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(d[:-1] > 0, d[1:] / d[:-1], np.nan)
    trace.extra["algo"] = "tas"
    trace.extra["eta"] = cfg.eta
    trace.extra["ratios"] = [None if not np.isfinite(r) else float(r) for r in ratios]
    return SyncState(rotations_of(theta), trace.epochs * g.n), trace
