import numpy as np

from depthsync.graph import MeasurementGraph
from depthsync.manifold import rotation_from_angle
from depthsync.scenario import Scenario


def so2_graph(n, edges, angles, labels=None):
    """SO(2) graph from edges (j, k) and measurement angles of z_jk."""
    ej = [e[0] for e in edges]
    ek = [e[1] for e in edges]
    labels = labels or ["good"] * len(edges)
    return MeasurementGraph(n, 2, ej, ek, rotation_from_angle(np.asarray(angles, dtype=float)),
                            labels, np.broadcast_to(np.eye(2), (n, 2, 2)))


def star_scenario(offsets, center_angle=0.0):
    """Node 0 linked to leaves at angle 0 whose estimates of z_0 sit at ``offsets``."""
    n = len(offsets) + 1
    g = so2_graph(n, [(0, k) for k in range(1, n)], offsets)
    init = rotation_from_angle(np.array([center_angle] + [0.0] * (n - 1)))
    return Scenario(g, np.array(g.ground_truth), init, {"model": "star"})
