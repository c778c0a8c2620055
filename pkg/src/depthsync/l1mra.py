"""Coordinate descent on the least-absolute-deviations energy over SO(2).

The coordinate energy of node ``j`` is piecewise linear in its angle, with
breakpoints at every neighbor estimate ``z_jk z_k`` and at every antipode.
The one-sided slope in direction ``v`` counts estimates ahead of ``z_j``
(``-1`` each), behind it (``+1``), on top of it (``+1``) and at its antipode
(``-1``).  An update walks in the descent direction to the first breakpoint
where the slope stops being negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoBreakpointError, ValidationError
from .graph import MeasurementGraph
from .manifold import CUT_TOL, angular_distance, wrap_angle
from .problem import So2Problem, angles_of, rotations_of
from .dds import solve_so2
from .scenario import Scenario
from .trace import RunTrace, SyncState

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EstimatePartition:
    c_plus: frozenset
    c_minus: frozenset
    c_zero: frozenset
    cut: frozenset


def _problem(graph: MeasurementGraph) -> So2Problem:
    if graph.dim != 2:
        raise ValidationError("the L1 baseline is defined for SO(2) only")
    return So2Problem(graph)


def _theta(z) -> np.ndarray:
    return np.array(angles_of(z), dtype=float)


def l1_energy(z, graph: MeasurementGraph) -> float:
    """Sum over edges of ``d(z_j, z_jk z_k)``."""
    if graph.dim != 2:
        raise ValidationError("the L1 baseline is defined for SO(2) only")
    theta = _theta(z)
    from .manifold import angle_from_rotation

    phi = angle_from_rotation(graph.R)
    return float(np.sum(angular_distance(theta[graph.ej], phi + theta[graph.ek])))


def coordinate_energy(j: int, y, z, graph: MeasurementGraph) -> float:
    """``sum_k d(y, z_jk z_k)`` with ``y`` given as an angle."""
    prob = _problem(graph)
    theta = _theta(z)
    est = prob.phi[j] + theta[prob.nbrs[j]]
    return float(np.sum(angular_distance(float(y), est)))


def _counts(offsets: np.ndarray, tol: float = CUT_TOL) -> tuple[int, int, int, int]:
    a = np.abs(offsets)
    cut = a > math.pi - tol
    zero = a <= tol
    plus = (offsets > 0) & ~zero & ~cut
    minus = (offsets < 0) & ~zero & ~cut
    return int(plus.sum()), int(minus.sum()), int(zero.sum()), int(cut.sum())


def _derivative(offsets: np.ndarray, v: int) -> int:
    p, m, z0, c = _counts(offsets)
    return v * (m - p) + z0 - c


def partition(j: int, z, graph: MeasurementGraph) -> EstimatePartition:
    prob = _problem(graph)
    o = prob.offsets(_theta(z), j)
    nb = prob.nbrs[j]
    a = np.abs(o)
    cut = a > math.pi - CUT_TOL
    zero = a <= CUT_TOL
    return EstimatePartition(
        frozenset(nb[(o > 0) & ~zero & ~cut].tolist()),
        frozenset(nb[(o < 0) & ~zero & ~cut].tolist()),
        frozenset(nb[zero].tolist()),
        frozenset(nb[cut].tolist()),
    )


def directional_derivative(j: int, v: int, z, graph: MeasurementGraph) -> int:
    """One-sided slope of node ``j``'s coordinate energy in direction ``v`` (+1 or -1)."""
    if v not in (1, -1):
        raise ValidationError("direction must be +1 or -1")
    prob = _problem(graph)
    return _derivative(prob.offsets(_theta(z), j), v)


def _update(offsets: np.ndarray, theta_j: float, est: np.ndarray) -> tuple[float, bool]:
    """New angle of one node and whether it was already fixed."""
    dp, dm = _derivative(offsets, 1), _derivative(offsets, -1)
    if min(dp, dm) >= 0:
        return theta_j, True
    v = 1 if dp <= dm else -1
    # travel distances to each estimate and each antipode along direction v
    targets = np.concatenate([est, wrap_angle(est + math.pi)])
    travel = np.mod(v * np.concatenate([offsets, wrap_angle(offsets + math.pi)]), TWO_PI)
    ok = (travel > CUT_TOL) & (travel < TWO_PI - CUT_TOL)
    order = np.argsort(travel[ok], kind="stable")
    for t, y in zip(travel[ok][order], targets[ok][order]):
        if _derivative(wrap_angle(offsets - v * t), v) >= 0:
            return float(wrap_angle(y)), False
    raise NoBreakpointError("negative slope but no breakpoint stops the line search")


def gd_l1_update_node(j: int, z, graph: MeasurementGraph):
    """Return a copy of ``z`` (angles) with node ``j`` updated."""
    prob = _problem(graph)
    theta = _theta(z)
    est = wrap_angle(prob.phi[j] + theta[prob.nbrs[j]])
    theta[j], _ = _update(prob.offsets(theta, j), theta[j], est)
    return theta


def is_coordinatewise_fixed(z, graph: MeasurementGraph) -> tuple[bool, list]:
    """``(fixed, non_fixed_nodes)``: fixed when no single coordinate has a descent direction."""
    prob = _problem(graph)
    theta = _theta(z)
    bad = []
    for j in range(graph.n):
        o = prob.offsets(theta, j)
        if min(_derivative(o, 1), _derivative(o, -1)) < 0:
            bad.append(j)
    return not bad, bad


def gd_l1_run(scenario: Scenario, max_epochs: int = 1000, stop_on_fixed: bool = True,
              delta_tol: float | None = None) -> tuple[SyncState, RunTrace]:
    """Cyclic GD-L1 updates; stops after the first epoch in which no node moved."""
    g = scenario.graph
    prob = _problem(g)

    def step(theta, j):
        est = wrap_angle(prob.phi[j] + theta[prob.nbrs[j]])
        new, _ = _update(prob.offsets(theta, j), theta[j], est)
        if new == theta[j]:
            return theta, 0.0
        s = float(angular_distance(new, theta[j]))
        theta = theta.copy()
        theta[j] = new
        return theta, s

    theta0 = angles_of(scenario.init)
    fixed0, _ = is_coordinatewise_fixed(theta0, g)
    conv = (lambda s: s == 0.0) if stop_on_fixed else (lambda s: False)
    theta, trace = solve_so2(prob, theta0, angles_of(scenario.ground_truth), step, max_epochs,
                             conv, delta_tol, "cyclic", None, energy=lambda th: l1_energy(th, g))
    fixed, _ = is_coordinatewise_fixed(theta, g)
    trace.extra["algo"] = "l1mra"
    trace.extra["coordinatewise_fixed"] = fixed
    trace.extra["coordinatewise_fixed_at_init"] = fixed0
    if not stop_on_fixed and fixed:
        trace.status = "Converged"
    return SyncState(rotations_of(theta), trace.epochs * g.n), trace
