"""Tukey halfspace depth in low dimension, depth regions and selection rules.

Depth uses closed halfspaces: the depth of ``x`` in a cloud is the minimum,
over unit directions ``u``, of ``#{x_i : u.(x_i - x) >= 0}``.  It is computed
exactly for dimensions 1, 2 and 3.

For d = 2, 3 the minimum is attained on an open cell of the arrangement of
great (hyper)circles ``{u : u.(x_i - x) = 0}`` on the sphere of directions.
Every such cell touches a vertex of the arrangement (in 3D the normalised
cross product of two directions, in 2D the perpendicular of one direction),
so it suffices to evaluate each vertex, nudged into each of the cells around
it.  Points lying on the vertex's circles are resolved by sign patterns
rather than by an explicit floating-point perturbation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DepthSearchFailed, EmptyRegionError, UnsupportedDimError, ValidationError

ON_TOL = 1e-10


class Rule(str, Enum):
    TRIMMED_MEAN = "trimmed_mean"
    DEEPEST_CANDIDATE = "deepest_candidate"
    RANDOM_INTERIOR = "random_interior"


@dataclass(frozen=True)
class SelectionRule:
    """How a point is picked from a depth region.

    ``TRIMMED_MEAN`` is only valid for 1D clouds.
    """

    variant: Rule = Rule.DEEPEST_CANDIDATE
    search_budget: int = 500

    def __post_init__(self):
        object.__setattr__(self, "variant", Rule(self.variant))
        if self.search_budget < 0:
            raise ValidationError("search_budget must be non-negative")

    @classmethod
    def default_for(cls, dim: int) -> "SelectionRule":
        return cls(Rule.TRIMMED_MEAN if dim == 1 else Rule.DEEPEST_CANDIDATE)


@dataclass(frozen=True)
class DepthInterval:
    lo: float
    hi: float

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


def as_cloud(cloud) -> np.ndarray:
    X = np.asarray(cloud, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("a cloud is a non-empty (n, d) array")
    return X


def required_depth(beta: float, n: int) -> int:
    """Smallest integer depth that is ``>= beta * n``."""
    return max(0, math.ceil(beta * n - 1e-9))


# --- 1D ---------------------------------------------------------------------------

def tukey_depth_1d(x: float, cloud) -> int:
    X = as_cloud(cloud)
    if X.shape[1] != 1:
        raise ValidationError("tukey_depth_1d needs a 1D cloud")
    v = X[:, 0]
    return int(min(np.sum(v <= x), np.sum(v >= x)))


def _depth_1d_many(Q: np.ndarray, v: np.ndarray) -> np.ndarray:
    s = np.sort(v)
    le = np.searchsorted(s, Q, side="right")
    ge = len(s) - np.searchsorted(s, Q, side="left")
    return np.minimum(le, ge)


def depth_region_1d(beta: float, cloud) -> DepthInterval:
    """Set of points with depth ``>= beta * n`` for a 1D cloud.

    With ``m = ceil(beta n)`` this is ``[x_(m), x_(n + 1 - m)]`` (1-indexed
    order statistics): ``x`` has at least ``m`` points on each closed side
    exactly on that interval.
    """
    X = as_cloud(cloud)
    if X.shape[1] != 1:
        raise ValidationError("depth_region_1d needs a 1D cloud")
    if not 0 < beta <= 0.5:
        raise EmptyRegionError(f"beta must lie in (0, 1/2], got {beta}")
    n = X.shape[0]
    m = max(1, required_depth(beta, n))
    if m > n + 1 - m:
        raise EmptyRegionError(f"empty depth region for beta={beta}, n={n}")
    s = np.sort(X[:, 0])
    return DepthInterval(float(s[m - 1]), float(s[n - m]))


def trimmed_mean_1d(cloud) -> float:
    """Average of the points of the cloud lying in its 1/4-depth region."""
    X = as_cloud(cloud)[:, 0]
    region = depth_region_1d(0.25, X)
    kept = X[(X >= region.lo) & (X <= region.hi)]
    return float(np.mean(kept))


# --- 2D / 3D ------------------------------------------------------------------------

def _unit_dirs(Q: np.ndarray, X: np.ndarray):
    P = X[None, :, :] - Q[:, None, :]
    nrm = np.linalg.norm(P, axis=-1)
    zero_tol = 1e-14 * max(float(np.max(np.abs(X))), float(np.max(np.abs(Q))), 1e-300)
    zero = nrm <= zero_tol
    U = P / np.where(zero, 1.0, nrm)[..., None]
    U[zero] = 0.0
    return U, zero


def _colinear_min(U: np.ndarray, zero: np.ndarray) -> np.ndarray:
    """Depth contribution when all nonzero directions of a query are parallel."""
    out = np.zeros(len(U), dtype=int)
    for c in range(len(U)):
        nz = np.flatnonzero(~zero[c])
        if len(nz) == 0:
            continue
        t = U[c, nz] @ U[c, nz[0]]
        out[c] = min(np.sum(t > 0), np.sum(t < 0))
    return out


def _depth_2d_many(Q: np.ndarray, X: np.ndarray) -> np.ndarray:
    U, zero = _unit_dirs(Q, X)
    nonzero = ~zero
    W = np.stack([-U[..., 1], U[..., 0]], axis=-1)
    S = np.einsum("cid,cmd->cim", W, U)
    G = np.einsum("cid,cmd->cim", U, U)
    nzk = nonzero[:, None, :]
    on = (np.abs(S) <= ON_TOL) & nzk
    pos = np.sum((S > ON_TOL) & nzk, axis=-1)
    neg = np.sum((S < -ON_TOL) & nzk, axis=-1)
    extra = np.minimum(np.sum(on & (G > 0), axis=-1), np.sum(on & (G < 0), axis=-1))
    val = np.minimum(pos, neg) + extra
    val = np.where(nonzero, val, np.iinfo(np.int64).max)
    best = val.min(axis=1)
    best = np.where(nonzero.any(axis=1), best, 0)
    return zero.sum(axis=1) + best


def _depth_3d_many(Q: np.ndarray, X: np.ndarray) -> np.ndarray:
    U, zero = _unit_dirs(Q, X)
    nonzero = ~zero
    m = X.shape[0]
    if m < 2:
        return zero.sum(axis=1)
    I, J = np.triu_indices(m, k=1)
    Ui, Uj = U[:, I], U[:, J]
    N = np.cross(Ui, Uj)
    nn = np.linalg.norm(N, axis=-1)
    valid = (nn > 1e-9) & nonzero[:, I] & nonzero[:, J]
    safe = np.where(valid, nn, 1.0)
    W = N / safe[..., None]
    S = np.einsum("ckd,cmd->ckm", W, U)
    nzk = nonzero[:, None, :]
    on = (np.abs(S) <= ON_TOL) & nzk
    pos = np.sum((S > ON_TOL) & nzk, axis=-1)
    neg = np.sum((S < -ON_TOL) & nzk, axis=-1)
    val = np.minimum(pos, neg)

    degenerate = valid & (np.sum(on, axis=-1) > 2)
    if np.any(degenerate):
        c_idx, k_idx = np.nonzero(degenerate)
        w = W[c_idx, k_idx]
        ui, uj = Ui[c_idx, k_idx], Uj[c_idx, k_idx]
        s = safe[c_idx, k_idx][:, None]
        qi = np.cross(uj, w) / s
        qj = np.cross(w, ui) / s
        Uc = U[c_idx]
        A = np.einsum("rd,rmd->rm", qi, Uc)
        B = np.einsum("rd,rmd->rm", qj, Uc)
        onr = on[c_idx, k_idx]
        slack = 1e-9 * (np.abs(A) + np.abs(B))
        extra = None
        for si in (-1.0, 1.0):
            for sj in (-1.0, 1.0):
                cnt = np.sum(onr & (si * A + sj * B > -slack), axis=-1)
                extra = cnt if extra is None else np.minimum(extra, cnt)
        val[c_idx, k_idx] += extra

    val = np.where(valid, val, np.iinfo(np.int64).max)
    best = val.min(axis=1)
    no_vertex = ~valid.any(axis=1)
    if np.any(no_vertex):
        best[no_vertex] = _colinear_min(U[no_vertex], zero[no_vertex])
    return zero.sum(axis=1) + best


def tukey_depth_many(queries, cloud, chunk: int = 256) -> np.ndarray:
    """Exact depths of several query points; dims 1 to 3."""
    X = as_cloud(cloud)
    d = X.shape[1]
    Q = np.asarray(queries, dtype=float)
    if d == 1 and Q.ndim == 1:
        Q = Q[:, None]
    if Q.ndim != 2 or Q.shape[1] != d:
        raise ValidationError(f"queries must have shape (k, {d})")
    if d == 1:
        return _depth_1d_many(Q[:, 0], X[:, 0])
    if d == 2:
        fn = _depth_2d_many
    elif d == 3:
        fn = _depth_3d_many
    else:
        raise UnsupportedDimError(f"exact depth is only implemented for dim <= 3 (got {d})")
    return np.concatenate([fn(Q[s:s + chunk], X) for s in range(0, len(Q), chunk)]).astype(int)


def tukey_depth(x, cloud) -> int:
    X = as_cloud(cloud)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (X.shape[1],):
        raise ValidationError(f"query has shape {x.shape}, cloud points have dim {X.shape[1]}")
    if X.shape[1] == 1:
        return tukey_depth_1d(float(x[0]), X)
    return int(tukey_depth_many(x[None], X)[0])


# --- selection ------------------------------------------------------------------------

def candidate_points(cloud, midpoints: bool = True) -> np.ndarray:
    """Cloud points, coordinate median, coordinate trimmed means, mean, pair midpoints."""
    X = as_cloud(cloud)
    n, d = X.shape
    tm = np.array([trimmed_mean_1d(X[:, k]) for k in range(d)])
    parts = [X, np.median(X, axis=0), tm, X.mean(axis=0)]
    if midpoints:
        I, J = np.triu_indices(n, k=1)
        parts.append(0.5 * (X[I] + X[J]))
    return np.vstack(parts)


def _hill_climb(X, start, start_depth, target, budget, rng):
    scale = float(np.max(np.ptp(X, axis=0))) or 1.0
    d = X.shape[1]
    p, dp = start.copy(), start_depth
    step = 0.5 * scale
    for _ in range(budget):
        if dp >= target:
            break
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        q = p + step * u
        dq = int(tukey_depth_many(q[None], X)[0])
        if dq > dp:
            p, dp = q, dq
        else:
            step *= 0.5
            if step < 1e-9 * scale:
                step = 0.5 * scale
    return p, dp


def max_depth_point(cloud, beta: float, rule: SelectionRule | None = None, rng=None) -> np.ndarray:
    """Pick a point whose depth is at least ``ceil(beta n)``.

    ``TRIMMED_MEAN`` (1D) averages the cloud points inside the beta-depth
    interval.  ``DEEPEST_CANDIDATE`` averages the candidates of maximal depth;
    depth regions are convex, so the average keeps that depth.  When the
    result is itself a cloud point it is pulled by 1e-3 towards the centroid
    of all qualifying candidates to move off the region boundary.
    ``RANDOM_INTERIOR`` returns a random convex combination of qualifying
    candidates.

    Raises:
        DepthSearchFailed: no point of the required depth was found within
            ``rule.search_budget`` hill-climbing trials.
    """
    X = as_cloud(cloud)
    n, d = X.shape
    rule = rule or SelectionRule.default_for(d)
    if rng is None:
        rng = np.random.default_rng(0)
    if not 0 < beta <= 0.5:
        raise ValidationError(f"beta must lie in (0, 1/2], got {beta}")
    need = max(1, required_depth(beta, n))

    if np.all(X == X[0]):
        return X[0].copy()

    if rule.variant is Rule.TRIMMED_MEAN:
        if d != 1:
            raise ValidationError("the trimmed-mean rule only applies to 1D clouds")
        region = depth_region_1d(beta, X)
        v = X[:, 0]
        return np.array([np.mean(v[(v >= region.lo) & (v <= region.hi)])])

    # cheap candidates first; pair midpoints only if none of them qualifies
    C = candidate_points(X, midpoints=False)
    depths = tukey_depth_many(C, X)
    qualifying = depths >= need
    if not np.any(qualifying) and n > 1:
        I, J = np.triu_indices(n, k=1)
        M = 0.5 * (X[I] + X[J])
        C = np.vstack([C, M])
        depths = np.concatenate([depths, tukey_depth_many(M, X)])
        qualifying = depths >= need
    if not np.any(qualifying):
        k = int(np.argmax(depths))
        p, dp = _hill_climb(X, C[k], int(depths[k]), need, rule.search_budget, rng)
        if dp < need:
            raise DepthSearchFailed(
                f"no point of depth >= {need} found (best {dp}) within {rule.search_budget} trials"
            )
        return p

    Qc = C[qualifying]
    if rule.variant is Rule.RANDOM_INTERIOR:
        w = rng.dirichlet(np.ones(len(Qc)))
        sel = w @ Qc
    else:
        best = depths.max()
        top = C[depths == best]
        sel = top.mean(axis=0)
        if np.any(np.all(X == sel, axis=1)):
            sel = (1.0 - 1e-3) * sel + 1e-3 * Qc.mean(axis=0)
    if tukey_depth_many(sel[None], X)[0] < need:
        # rounding pushed the average across the region boundary
        sel = C[int(np.argmax(depths))]
    return sel


def deepest_point(cloud, rng=None, grid: int = 7, budget: int = 2000) -> tuple[np.ndarray, int]:
    """Search for a point of depth ``ceil(n / (d + 1))`` or as deep as can be found.

    Candidate families are tried in turn until one reaches the target: the
    points of :func:`candidate_points`, centroids of point triples, a
    regular grid over the bounding box, and segment/hyperplane crossings.
    Otherwise the deepest candidates are improved by random hill climbing.
    """
    X = as_cloud(cloud)
    n, d = X.shape
    if rng is None:
        rng = np.random.default_rng(0)
    target = math.ceil(n / (d + 1))

    def families():
        yield candidate_points(X)
        if 3 <= n <= 40:
            I, J, K = np.array(list(_triples(n))).T
            yield (X[I] + X[J] + X[K]) / 3.0
        lo, hi = X.min(axis=0), X.max(axis=0)
        axes = [np.linspace(lo[k], hi[k], grid) for k in range(d)]
        yield np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        if d in (2, 3) and n <= 16:
            R = _radon_points(X)
            for s in range(0, len(R), 512):
                yield R[s:s + 512]
        for _ in range(8):
            # random convex combinations concentrate near the middle of the cloud
            yield rng.dirichlet(np.ones(n), size=1024) @ X

    best_pts, best_depths = [], []
    for C in families():
        if len(C) == 0:
            continue
        dep = tukey_depth_many(C, X)
        k = int(np.argmax(dep))
        if dep[k] >= target:
            return C[k], int(dep[k])
        top = np.argsort(-dep, kind="stable")[:5]
        best_pts.extend(C[top])
        best_depths.extend(dep[top].tolist())
    order = np.argsort(-np.array(best_depths), kind="stable")[:5]
    p, dp = best_pts[order[0]], best_depths[order[0]]
    for i in order:
        q, dq = _hill_climb(X, best_pts[i], best_depths[i], target, budget // len(order), rng)
        if dq > dp:
            p, dp = q, dq
        if dp >= target:
            break
    return p, int(dp)


def _radon_points(X: np.ndarray) -> np.ndarray:
    """Crossings of segments with hyperplanes through other data points.

    The deepest region can shrink to such a point (five points in R^3 whose
    only depth-2 point is where a segment pierces a triangle), which no
    sampling would find.
    """
    n, d = X.shape
    out = []
    idx = range(n)
    for i in idx:
        for j in range(i + 1, n):
            a, u = X[i], X[j] - X[i]
            for rest in _subsets([k for k in idx if k not in (i, j)], d):
                B = X[list(rest)]
                normal = _normal(B[1:] - B[0])
                den = normal @ u
                if abs(den) > 1e-12:
                    out.append(a + (normal @ (B[0] - a)) / den * u)
    return np.array(out).reshape(-1, d)


def _normal(E: np.ndarray) -> np.ndarray:
    if E.shape[1] == 2:
        return np.array([-E[0, 1], E[0, 0]])
    return np.cross(E[0], E[1])


def _subsets(items, k):
    from itertools import combinations

    return combinations(items, k)


def _triples(n: int):
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                yield i, j, k
