"""Synthetic ground truth and adversarial corruption.

A scenario couples a labeled measurement graph with the ground-truth
rotations and an initial estimate.  Good edges carry ``R*_j R*_k^T`` exactly;
which edges are bad and what they carry is decided by pluggable strategies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InfeasibleBudgetError, ValidationError
from .graph import (
    MeasurementGraph,
    corruption_stats,
    dumps_stable,
    graph_from_dict,
    graph_to_dict,
    make_complete,
)
from .manifold import (
    SQRT2,
    check_rotation,
    exp_map,
    geodesic_distance,
    random_rotation,
    rotation_from_angle,
    tangent_dim,
)

SPURIOUS_EPS = 1e-3


@dataclass(frozen=True, eq=False)
class Scenario:
    graph: MeasurementGraph
    ground_truth: np.ndarray
    init: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def dim(self) -> int:
        return self.graph.dim

    def normalization_products(self, estimates=None) -> np.ndarray:
        X = self.init if estimates is None else np.asarray(estimates)
        return np.swapaxes(self.ground_truth, 1, 2) @ X

    @property
    def init_in_small_ball(self) -> bool:
        """Whether the init's normalization products fit in a ball of radius < pi/2.

        The radius is measured in the angular distance for D = 2 and in the
        Frobenius-log distance otherwise.
        """
        from .manifold import angle_from_rotation, smallest_enclosing_arc, smallest_enclosing_ball
        from .errors import NoSmallBallError, CutLocusError

        if self.dim == 2:
            # angular distance on SO(2)
            _, radius = smallest_enclosing_arc(angle_from_rotation(self.normalization_products()))
            return radius < math.pi / 2
        try:
            smallest_enclosing_ball(self.normalization_products())
        except (NoSmallBallError, CutLocusError):
            return False
        return True

    def replace(self, **changes) -> "Scenario":
        fields = dict(graph=self.graph, ground_truth=self.ground_truth, init=self.init,
                      meta=dict(self.meta))
        fields.update(changes)
        return Scenario(**fields)


# --- ground truth ------------------------------------------------------------------------

def generate_ground_truth(n: int, dim: int, spread_rho: float, rng) -> np.ndarray:
    """Rotations whose transposes lie in a ball of radius ``spread_rho`` around a random S.

    For D = 2 the radius is in the angular distance; otherwise in the
    Frobenius-log distance.
    """
    if not 0 <= spread_rho < math.pi / 2:
        raise ValidationError(f"spread must lie in [0, pi/2), got {spread_rho}")
    S = random_rotation(dim, rng)
    out = np.empty((n, dim, dim))
    if dim == 2:
        offsets = rng.uniform(-spread_rho, spread_rho, size=n)
        for j in range(n):
            out[j] = (S @ rotation_from_angle(offsets[j])).T
        return out
    d = tangent_dim(dim)
    coord_radius = spread_rho / SQRT2
    for j in range(n):
        u = rng.standard_normal(d)
        u *= coord_radius * rng.random() ** (1.0 / d) / max(np.linalg.norm(u), 1e-300)
        out[j] = exp_map(S, u).T
    return out


def clean_measurements(graph: MeasurementGraph, ground_truth: np.ndarray) -> np.ndarray:
    G = np.asarray(ground_truth)
    return G[graph.ej] @ np.swapaxes(G[graph.ek], 1, 2)


def make_scenario(n: int, dim: int, spread_rho: float, rng, graph: MeasurementGraph | None = None,
                  seed=None) -> Scenario:
    """Uncorrupted scenario with identity initialization (complete graph by default)."""
    graph = graph if graph is not None else make_complete(n, dim)
    if graph.n != n or graph.dim != dim:
        raise ValidationError("graph size/dimension does not match the scenario")
    gt = generate_ground_truth(n, dim, spread_rho, rng)
    g = graph.replace(R=clean_measurements(graph, gt), labels=("good",) * graph.num_edges,
                      ground_truth=gt)
    init = np.broadcast_to(np.eye(dim), (n, dim, dim)).copy()
    meta = {"model": "clean", "alpha": 0.0, "seed": seed, "rho": float(spread_rho)}
    return Scenario(g, gt, init, meta)


# --- corruption --------------------------------------------------------------------------

EdgeSelector = Callable[[MeasurementGraph, float, np.random.Generator], np.ndarray]
ValueFn = Callable[[Scenario, np.ndarray, np.random.Generator], np.ndarray]


def greedy_capped_edges(graph: MeasurementGraph, alpha: float, rng) -> np.ndarray:
    """Mark edges bad in random order while both endpoints stay under their cap.

    The cap of node j is ``floor(alpha * n_j)``.
    """
    deg = graph.degrees()
    cap = np.floor(alpha * deg + 1e-9).astype(int)
    used = np.zeros(graph.n, dtype=int)
    bad = np.zeros(graph.num_edges, dtype=bool)
    for e in rng.permutation(graph.num_edges):
        a, b = graph.ej[e], graph.ek[e]
        if used[a] < cap[a] and used[b] < cap[b]:
            bad[e] = True
            used[a] += 1
            used[b] += 1
    return bad


def haar_values(scenario: Scenario, bad: np.ndarray, rng) -> np.ndarray:
    return np.array([random_rotation(scenario.dim, rng) for _ in range(int(bad.sum()))]).reshape(
        -1, scenario.dim, scenario.dim)


def consistent_values(scenario: Scenario, bad: np.ndarray, rng) -> np.ndarray:
    """Measurements of an alternative signal ``R^b_j R^b_k^T``."""
    g = scenario.graph
    Rb = np.array([random_rotation(scenario.dim, rng) for _ in range(g.n)])
    return Rb[g.ej[bad]] @ np.swapaxes(Rb[g.ek[bad]], 1, 2)


def corrupt(scenario: Scenario, alpha: float, rng, values: ValueFn, model: str,
            select: EdgeSelector = greedy_capped_edges, max_alpha: float = 0.5) -> Scenario:
    """Apply a corruption strategy: ``select`` picks bad edges, ``values`` fills them.

    Raises:
        InfeasibleBudgetError: the selection breaks a per-node cap, or no node
            reaches its cap although some edge could still be corrupted.
    """
    if not 0 <= alpha < max_alpha:
        raise ValidationError(f"alpha must lie in [0, {max_alpha}), got {alpha}")
    g = scenario.graph
    bad = np.asarray(select(g, alpha, rng), dtype=bool)
    R = np.array(g.R)
    labels = list(g.labels)
    if bad.any():
        R[bad] = values(scenario, bad, rng)
    for e in range(g.num_edges):
        if labels[e] == "unknown":
            labels[e] = "good"
        if bad[e]:
            labels[e] = "bad"
    new_graph = g.replace(R=R, labels=tuple(labels))
    stats = corruption_stats(new_graph)
    if stats.alpha0 > alpha + 1e-12:
        raise InfeasibleBudgetError(f"selection gives alpha0={stats.alpha0:.4g} > {alpha}")
    caps = [math.floor(alpha * nj + 1e-9) for nj, _, _ in stats.per_node]
    if not any(b == c for (_, b, _), c in zip(stats.per_node, caps)):
        raise InfeasibleBudgetError("no node reaches its corruption cap")
    meta = dict(scenario.meta, model=model, alpha=float(alpha))
    return scenario.replace(graph=new_graph, meta=meta)


def corrupt_random(scenario: Scenario, alpha: float, rng, select: EdgeSelector = greedy_capped_edges,
                   max_alpha: float = 0.5) -> Scenario:
    """Replace a per-node-capped set of edges with Haar-random rotations."""
    return corrupt(scenario, alpha, rng, haar_values, "random", select, max_alpha)


def corrupt_consistent(scenario: Scenario, alpha: float, rng, select: EdgeSelector = greedy_capped_edges,
                       max_alpha: float = 0.5) -> Scenario:
    """Replace a per-node-capped set of edges with measurements of a second, consistent signal.

    ``max_alpha`` may be raised above 1/2 for demonstrations where the
    alternative signal dominates.
    """
    return corrupt(scenario, alpha, rng, consistent_values, "consistent", select, max_alpha)


# --- spurious fixed point fixture ---------------------------------------------------------------

def spurious_fixture(n_even: int, theta: float, eps: float = SPURIOUS_EPS) -> Scenario:
    """SO(2) state that is coordinatewise fixed for the L1 energy but not the ground truth.

    Ground truth is the identity everywhere.  The first half of the nodes (J)
    start at angle ``theta`` and the second half (K) at 0.  Edge ``(j, j+n/2)``
    is bad and makes ``k`` predict ``theta + eps`` for ``j``.
    """
    if n_even < 2 or n_even % 2:
        raise ValidationError(f"the fixture needs an even n >= 2, got {n_even}")
    if not 0 < theta < math.pi / 2:
        raise ValidationError(f"theta must lie in (0, pi/2), got {theta}")
    if not 0 < eps < theta:
        raise ValidationError("eps must lie in (0, theta)")
    n, h = n_even, n_even // 2
    g = make_complete(n, 2)
    gt = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    R = np.array(g.R)
    labels = []
    for e, (j, k) in enumerate(zip(g.ej.tolist(), g.ek.tolist())):
        if k == j + h:
            # z_k = 1 at init, so z_jk z_k = z_jk
            R[e] = rotation_from_angle(theta + eps)
            labels.append("bad")
        else:
            labels.append("good")
    g = g.replace(R=R, labels=tuple(labels), ground_truth=gt)
    init = np.array([rotation_from_angle(theta if j < h else 0.0) for j in range(n)])
    meta = {"model": "spurious", "alpha": 1.0 / (n - 1), "seed": None, "rho": 0.0}
    return Scenario(g, gt, init, meta)


# --- JSON -----------------------------------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    d = graph_to_dict(s.graph.replace(ground_truth=s.ground_truth))
    D = s.dim
    d["scenario"] = {
        "model": s.meta.get("model"),
        "alpha": float(s.meta.get("alpha", 0.0)),
        "seed": s.meta.get("seed"),
        "rho": float(s.meta.get("rho", 0.0)),
        "init": s.init.reshape(s.n, D * D),
    }
    return d


def scenario_from_dict(d: dict) -> Scenario:
    g = graph_from_dict(d)
    if g.ground_truth is None:
        raise ValidationError("scenario JSON needs a ground_truth section")
    sec = d.get("scenario") or {}
    D = g.dim
    if "init" in sec:
        init = np.array(sec["init"], dtype=float).reshape(g.n, D, D)
        for R in init:
            check_rotation(R, D)
    else:
        init = np.broadcast_to(np.eye(D), (g.n, D, D)).copy()
    meta = {"model": sec.get("model"), "alpha": float(sec.get("alpha", 0.0)),
            "seed": sec.get("seed"), "rho": float(sec.get("rho", 0.0))}
    return Scenario(g, np.array(g.ground_truth), init, meta)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps_stable(scenario_to_dict(s)))


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


def max_pairwise_distance(rotations) -> float:
    P = np.asarray(rotations)
    return float(np.max(geodesic_distance(P[:, None], P[None, :])))
