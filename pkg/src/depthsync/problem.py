"""Solver plumbing shared by the dds, tas and l1mra modules.

Solvers work on a compact per-node view of the graph: SO(2) runs keep one
angle per node, other dimensions keep rotation matrices.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Callable

import numpy as np

from .errors import CutLocusError, NoSmallBallError
from .graph import MeasurementGraph
from .manifold import (
    CUT_TOL,
    angle_from_rotation,
    geodesic_distance,
    log_coords,
    rotation_from_angle,
    smallest_enclosing_arc,
    smallest_enclosing_ball,
    wrap_angle,
)
from .trace import CONVERGED, ERROR, MAX_EPOCHS, RunTrace

log = logging.getLogger("depthsync")


class So2Problem:
    """Angles of the measurements ``z_jk`` oriented away from each node."""

    def __init__(self, graph: MeasurementGraph):
        if graph.dim != 2:
            raise ValueError("So2Problem needs D = 2")
        self.n = graph.n
        self.nbrs, self.phi = [], []
        for j in range(graph.n):
            nb, Rs = graph.node_measurements(j)
            self.nbrs.append(nb)
            self.phi.append(angle_from_rotation(Rs) if len(nb) else np.zeros(0))

    def offsets(self, theta: np.ndarray, j: int) -> np.ndarray:
        """Angles of ``Log_{z_j}(z_jk z_k)`` for every neighbor k, in (-pi, pi]."""
        return wrap_angle(self.phi[j] + theta[self.nbrs[j]] - theta[j])

    def cloud(self, theta: np.ndarray, j: int) -> np.ndarray:
        o = self.offsets(theta, j)
        cut = np.abs(o) > math.pi - CUT_TOL
        if np.any(cut):
            log.warning("node %d: skipping %d measurement(s) at the cut locus", j, int(cut.sum()))
        return o[~cut]


class MatrixProblem:
    """Oriented measurements ``R_jk`` stacked per node."""

    def __init__(self, graph: MeasurementGraph):
        self.n = graph.n
        self.dim = graph.dim
        self.nbrs, self.Rjk = [], []
        for j in range(graph.n):
            nb, Rs = graph.node_measurements(j)
            self.nbrs.append(nb)
            self.Rjk.append(Rs)

    def cloud(self, X: np.ndarray, j: int) -> np.ndarray:
        """Tangent coordinates of ``Log_{R_j}(R_jk R_k)``; cut-locus terms are dropped."""
        M = X[j].T @ self.Rjk[j] @ X[self.nbrs[j]]
        coords, cut = log_coords(M)
        if np.any(cut):
            log.warning("node %d: skipping %d measurement(s) at the cut locus", j, int(cut.sum()))
        return coords[~cut]


def angles_of(estimates) -> np.ndarray:
    E = np.asarray(estimates, dtype=float)
    if E.ndim == 1:
        return wrap_angle(E)
    return angle_from_rotation(E)


def rotations_of(theta: np.ndarray) -> np.ndarray:
    return rotation_from_angle(np.asarray(theta))


def so2_spread(theta: np.ndarray, theta_star: np.ndarray) -> tuple[float, float]:
    """(delta, enclosing-arc radius) of the normalization products, angular distance."""
    p = wrap_angle(theta - theta_star)
    delta = float(np.max(np.abs(wrap_angle(p[:, None] - p[None, :]))))
    _, radius = smallest_enclosing_arc(p)
    return delta, float(radius)


def matrix_spread(X: np.ndarray, gt: np.ndarray, ball: bool = True) -> tuple[float, float | None]:
    """(delta, enclosing-ball radius) of the normalization products, Frobenius-log distance."""
    P = np.swapaxes(gt, 1, 2) @ X
    delta = float(np.max(geodesic_distance(P[:, None], P[None, :])))
    if not ball:
        return delta, None
    try:
        radius = smallest_enclosing_ball(P).radius
    except NoSmallBallError as exc:
        radius = exc.ball.radius if exc.ball is not None else None
    except CutLocusError:
        radius = None
    return delta, radius


def reorthonormalize(X: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(X)
    return U @ Vt


def run_cyclic(
    n: int,
    x0,
    step: Callable,
    diag: Callable | None,
    max_epochs: int,
    converged: Callable[[float], bool],
    delta_tol: float | None = None,
    energy: Callable | None = None,
    order: str = "cyclic",
    rng=None,
    end_of_epoch: Callable | None = None,
) -> tuple[object, RunTrace]:
    """Drive node updates epoch by epoch and record a trace.

    ``step(x, j)`` returns the new state and the step norm.  After each epoch
    the run stops with status Converged when ``converged(max_step)`` holds or
    when ``delta < delta_tol``.
    """
    trace = RunTrace(n=n, energies=[] if energy is not None else None)
    x = x0
    if diag is not None:
        trace.init_delta, trace.init_ball = diag(x)
    if energy is not None:
        trace.init_energy = energy(x)
    try:
        for _ in range(max_epochs):
            tic = time.perf_counter()
            if order == "cyclic":
                nodes = range(n)
            elif order == "random":
                nodes = rng.permutation(n).tolist()
            else:
                raise ValueError(f"unknown update order {order!r}")
            max_step = 0.0
            for j in nodes:
                x, s = step(x, j)
                trace.nodes.append(int(j))
                trace.steps.append(float(s))
                if energy is not None:
                    trace.energies.append(energy(x))
                max_step = max(max_step, s)
            if end_of_epoch is not None:
                x = end_of_epoch(x)
            if diag is not None:
                d, r = diag(x)
                trace.epoch_delta.append(d)
                trace.epoch_ball.append(r)
            trace.epoch_wall_ms.append((time.perf_counter() - tic) * 1000.0)
            if converged(max_step) or (
                delta_tol is not None and diag is not None and trace.epoch_delta[-1] < delta_tol
            ):
                trace.status = CONVERGED
                break
        else:
            trace.status = MAX_EPOCHS
    except Exception as exc:  # reported through the trace, then re-raised
        trace.status = ERROR
        trace.message = f"{type(exc).__name__}: {exc}"
        raise
    return x, trace
