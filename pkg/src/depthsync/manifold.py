"""Geometry of SO(D): exp/log maps, distances, Haar sampling and minimax balls.

Rotations are plain ``(D, D)`` numpy arrays (stacks of them are ``(m, D, D)``).
Tangent vectors at a base point ``R`` are represented by coordinates in a
fixed orthonormal basis of the skew-symmetric matrices: for every pair
``i < j`` (lexicographic order) the basis element has ``+1`` at ``(j, i)`` and
``-1`` at ``(i, j)``.  Under the inner product ``<v, w> = tr(v^T w) / 2`` these
elements are orthonormal, so the coordinate norm is the Riemannian norm (the
rotation angle for D = 2, 3).  The distance ``d(A, B) = ||log(A B^T)||_F`` is
``sqrt(2)`` times that norm.

SO(2) is also handled through angles in ``(-pi, pi]`` (unit complex numbers),
measured with the angular distance ``|arg(a conj(b))|``.  The factor
``sqrt(2)`` between the two conventions lives here and nowhere else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import CutLocusError, DimensionMismatch, NoSmallBallError, ValidationError

CUT_TOL = 1e-9
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Ball:
    """Closed geodesic ball; ``radius`` is in the metric of the producing function."""

    center: np.ndarray
    radius: float


def tangent_dim(dim: int) -> int:
    return dim * (dim - 1) // 2


def _pairs(dim: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(dim, k=1)
    return i, j


def hat(coords: np.ndarray, dim: int) -> np.ndarray:
    """Map tangent coordinates (``(..., d)``) to skew-symmetric matrices."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape[-1] != tangent_dim(dim):
        raise DimensionMismatch(
            f"expected {tangent_dim(dim)} tangent coordinates for D={dim}, got {coords.shape[-1]}"
        )
    i, j = _pairs(dim)
    out = np.zeros(coords.shape[:-1] + (dim, dim))
    out[..., j, i] = coords
    out[..., i, j] = -coords
    return out


def vee(skew: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat`; only the skew part of the input is used."""
    skew = np.asarray(skew, dtype=float)
    dim = skew.shape[-1]
    i, j = _pairs(dim)
    return 0.5 * (skew[..., j, i] - skew[..., i, j])


def wrap_angle(x):
    """Wrap angles to ``(-pi, pi]``."""
    y = np.remainder(np.asarray(x, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    y = np.where(y <= -np.pi, y + 2.0 * np.pi, y)
    return float(y) if y.ndim == 0 else y


def angle_to_complex(theta):
    return np.exp(1j * np.asarray(theta, dtype=float))


def complex_to_angle(z):
    return wrap_angle(np.angle(z))


def angular_distance(a, b):
    """``|arg(e^{ia} e^{-ib})|`` for angles ``a`` and ``b`` (broadcasts)."""
    return np.abs(wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def rotation_from_angle(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def angle_from_rotation(R: np.ndarray):
    R = np.asarray(R, dtype=float)
    return wrap_angle(np.arctan2(R[..., 1, 0], R[..., 0, 0]))


def is_rotation(R: np.ndarray, tol: float = 1e-12) -> bool:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape[0] < 2:
        return False
    if not np.all(np.isfinite(R)):
        return False
    eye = np.eye(R.shape[0])
    return bool(np.max(np.abs(R.T @ R - eye)) <= tol and abs(np.linalg.det(R) - 1.0) <= tol)


def check_rotation(R, dim: int | None = None, tol: float = 1e-12) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if dim is not None and R.shape != (dim, dim):
        raise DimensionMismatch(f"expected a {dim}x{dim} rotation, got shape {R.shape}")
    if not is_rotation(R, tol):
        raise ValidationError("matrix is not a rotation (R^T R = I, det R = 1) to tolerance")
    return R


# --- SO(3) closed forms -------------------------------------------------------

def _omega_to_coords(omega: np.ndarray) -> np.ndarray:
    # basis order (0,1), (0,2), (1,2) gives coords (w3, -w2, w1)
    return np.stack([omega[..., 2], -omega[..., 1], omega[..., 0]], axis=-1)


def _coords_to_omega(c: np.ndarray) -> np.ndarray:
    return np.stack([c[..., 2], -c[..., 1], c[..., 0]], axis=-1)


def _skew3(w: np.ndarray) -> np.ndarray:
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def _exp_so3(omega: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(omega, axis=-1)[..., None, None]
    K = _skew3(omega)
    K2 = K @ K
    small = theta < 1e-6
    t = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(t) / t)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(t)) / t**2)
    return np.eye(3) + a * K + b * K2


def _log_so3(R: np.ndarray, cut_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotation vectors of a stack of rotations and a mask of cut-locus entries."""
    R = np.asarray(R, dtype=float)
    s = 0.5 * np.stack(
        [R[..., 2, 1] - R[..., 1, 2], R[..., 0, 2] - R[..., 2, 0], R[..., 1, 0] - R[..., 0, 1]],
        axis=-1,
    )
    sin_t = np.linalg.norm(s, axis=-1)
    cos_t = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(sin_t, cos_t)
    cut = theta > np.pi - cut_tol

    small = theta < 1e-6
    safe_sin = np.where(small | (sin_t == 0), 1.0, sin_t)
    factor = np.where(small, 1.0 + theta**2 / 6.0, theta / safe_sin)
    omega = s * factor[..., None]

    # near pi the antisymmetric part is tiny; recover the axis from the symmetric part
    wide = (theta > 0.75 * np.pi) & ~cut
    if np.any(wide):
        Rw = R[wide]
        cw = cos_t[wide]
        B = 0.5 * (Rw + np.swapaxes(Rw, -1, -2)) - cw[:, None, None] * np.eye(3)
        B = B / (1.0 - cw)[:, None, None]
        diag = np.diagonal(B, axis1=-2, axis2=-1)
        k = np.argmax(diag, axis=-1)
        col = B[np.arange(len(k)), :, k]
        axis = col / np.linalg.norm(col, axis=-1, keepdims=True)
        sign = np.sign(np.sum(axis * s[wide], axis=-1))
        sign = np.where(sign == 0, 1.0, sign)
        omega[wide] = axis * (sign * theta[wide])[:, None]
    return omega, cut


# --- general dimension ----------------------------------------------------------

def _exp_skew(A: np.ndarray) -> np.ndarray:
    dim = A.shape[-1]
    if dim == 2:
        return rotation_from_angle(A[..., 1, 0])
    if dim == 3:
        return _exp_so3(np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], axis=-1))
    if A.ndim == 2:
        return scipy.linalg.expm(A)
    return np.stack([scipy.linalg.expm(a) for a in A.reshape(-1, dim, dim)]).reshape(A.shape)


def _log_general(R: np.ndarray, cut_tol: float) -> tuple[np.ndarray, bool]:
    dim = R.shape[0]
    T, Z = scipy.linalg.schur(R, output="real")
    L = np.zeros_like(T)
    i = 0
    cut = False
    while i < dim:
        if i + 1 < dim and abs(T[i + 1, i]) > 1e-14:
            phi = math.atan2(0.5 * (T[i + 1, i] - T[i, i + 1]), 0.5 * (T[i, i] + T[i + 1, i + 1]))
            if abs(phi) > np.pi - cut_tol:
                cut = True
            L[i + 1, i] = phi
            L[i, i + 1] = -phi
            i += 2
        else:
            if T[i, i] < 0:
                cut = True
            i += 1
    L = Z @ L @ Z.T
    return 0.5 * (L - L.T), cut


def log_coords(R: np.ndarray, cut_tol: float = CUT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Tangent coordinates of ``log(R)`` for a stack ``(m, D, D)``.

    Returns ``(coords, cut)`` where ``cut`` flags entries within ``cut_tol`` of
    the cut locus (their coordinates are not meaningful).
    """
    R = np.asarray(R, dtype=float)
    dim = R.shape[-1]
    if dim == 2:
        theta = np.arctan2(R[..., 1, 0], R[..., 0, 0])
        return theta[..., None], np.abs(theta) > np.pi - cut_tol
    if dim == 3:
        omega, cut = _log_so3(R, cut_tol)
        return _omega_to_coords(omega), cut
    flat = R.reshape(-1, dim, dim)
    coords = np.empty((flat.shape[0], tangent_dim(dim)))
    cut = np.empty(flat.shape[0], dtype=bool)
    for idx, Rk in enumerate(flat):
        L, cut[idx] = _log_general(Rk, cut_tol)
        coords[idx] = vee(L)
    return coords.reshape(R.shape[:-2] + (-1,)), cut.reshape(R.shape[:-2])


def exp_map(base: np.ndarray, coords) -> np.ndarray:
    """``Exp_R(v) = R exp(R^T v)`` with ``v`` given by tangent coordinates."""
    base = np.asarray(base, dtype=float)
    dim = base.shape[-1]
    coords = np.asarray(coords, dtype=float)
    if coords.shape[-1] != tangent_dim(dim):
        raise DimensionMismatch(
            f"tangent vector has {coords.shape[-1]} coordinates, base point needs {tangent_dim(dim)}"
        )
    return base @ _exp_skew(hat(coords, dim))


def log_map(base: np.ndarray, target: np.ndarray, cut_tol: float = CUT_TOL) -> np.ndarray:
    """``Log_R(S) = R log(R^T S)`` in tangent coordinates.

    Raises:
        CutLocusError: ``target`` is within ``cut_tol`` (rotation angle) of the
            cut locus of ``base``.
    """
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)
    if base.shape[-1] != target.shape[-1]:
        raise DimensionMismatch(f"dimension mismatch: {base.shape} vs {target.shape}")
    coords, cut = log_coords(np.swapaxes(base, -1, -2) @ target, cut_tol)
    if np.any(cut):
        raise CutLocusError("target is at the cut locus of the base point")
    return coords


def geodesic(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    return exp_map(a, t * log_map(a, b))


def rotation_angle(R: np.ndarray):
    """Principal rotation angle(s) for D in {2, 3}; accurate near zero."""
    R = np.asarray(R, dtype=float)
    dim = R.shape[-1]
    if dim == 2:
        return np.abs(np.arctan2(0.5 * (R[..., 1, 0] - R[..., 0, 1]), 0.5 * (R[..., 0, 0] + R[..., 1, 1])))
    if dim == 3:
        s = 0.5 * np.stack(
            [R[..., 2, 1] - R[..., 1, 2], R[..., 0, 2] - R[..., 2, 0], R[..., 1, 0] - R[..., 0, 1]],
            axis=-1,
        )
        return np.arctan2(np.linalg.norm(s, axis=-1), 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0))
    raise ValueError("rotation_angle is only defined for D in {2, 3}")


def geodesic_distance(a: np.ndarray, b: np.ndarray):
    """``||log(a b^T)||_F``; broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")
    # averaging a b^T with (b a^T)^T makes d(a, b) == d(b, a) bit for bit
    rel = 0.5 * (a @ np.swapaxes(b, -1, -2) + np.swapaxes(b @ np.swapaxes(a, -1, -2), -1, -2))
    dim = a.shape[-1]
    if dim in (2, 3):
        out = SQRT2 * rotation_angle(rel)
    else:
        flat = rel.reshape(-1, dim, dim)
        out = np.array([math.sqrt(float(np.sum(np.angle(np.linalg.eigvals(r)) ** 2))) for r in flat])
        out = out.reshape(rel.shape[:-2])
    return float(out) if np.ndim(out) == 0 else out


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed rotation in SO(dim)."""
    if dim < 2:
        raise ValidationError("dim must be >= 2")
    if dim == 2:
        return rotation_from_angle(rng.uniform(-np.pi, np.pi))
    if dim == 3:
        q = rng.standard_normal(4)
        w, x, y, z = q / np.linalg.norm(q)
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )
    Q, Rm = np.linalg.qr(rng.standard_normal((dim, dim)))
    Q = Q * np.sign(np.diag(Rm))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


# --- minimax balls ----------------------------------------------------------------

def smallest_enclosing_arc(angles) -> tuple[float, float]:
    """Minimal covering arc of angles on the circle.

    Returns ``(center_angle, radius)`` with ``radius`` in the angular distance.
    """
    a = np.sort(wrap_angle(np.atleast_1d(np.asarray(angles, dtype=float))))
    if a.size == 0:
        raise ValidationError("need at least one point")
    if a.size == 1:
        return float(a[0]), 0.0
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
    k = int(np.argmax(gaps))
    start = a[(k + 1) % a.size]
    length = 2 * np.pi - gaps[k]
    return float(wrap_angle(start + 0.5 * length)), float(0.5 * length)


def _circumball(S: np.ndarray) -> tuple[np.ndarray, float]:
    if len(S) == 1:
        return S[0].copy(), 0.0
    s0 = S[0]
    V = S[1:] - s0
    M = 2.0 * V @ V.T
    rhs = np.sum(V * V, axis=1)
    lam = np.linalg.lstsq(M, rhs, rcond=None)[0]
    c = s0 + lam @ V
    return c, float(np.max(np.linalg.norm(S - c, axis=1)))


def euclidean_minimax_ball(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest enclosing Euclidean ball (Welzl's algorithm with move-to-front)."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or len(P) == 0:
        raise ValidationError("need a non-empty (m, d) array of points")
    d = P.shape[1]
    order = list(range(len(P)))

    def inside(p, c, r):
        return np.linalg.norm(p - c) <= r * (1 + 1e-12) + 1e-15

    def mtf(end: int, support: list[int]):
        if support:
            c, r = _circumball(P[support])
        else:
            c, r = P[order[0]].copy(), -1.0
        if len(support) == d + 1:
            return c, r
        i = 0
        while i < end:
            idx = order[i]
            if r < 0 or not inside(P[idx], c, r):
                c, r = mtf(i, support + [idx])
                order.insert(0, order.pop(i))
            i += 1
        return c, r

    c, r = mtf(len(P), [])
    return c, float(np.max(np.linalg.norm(P - c, axis=1)))


def smallest_enclosing_ball(points: Sequence[np.ndarray], max_iter: int = 200) -> Ball:
    """Minimax ball of rotations in the distance ``||log(a b^T)||_F``.

    D = 2 uses the exact minimal covering arc.  For D >= 3 the center is
    refined by solving the Euclidean minimax problem in the tangent space at
    the current center and moving there; the fixed point satisfies the
    Riemannian optimality condition (zero lies in the hull of the farthest
    log-directions).

    Raises:
        NoSmallBallError: radius >= pi/2 (the ball is attached to the error).
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 2:
        P = P[None]
    if len(P) == 0:
        raise ValidationError("need at least one rotation")
    dim = P.shape[-1]
    if dim == 2:
        center_angle, radius = smallest_enclosing_arc(angle_from_rotation(P))
        ball = Ball(rotation_from_angle(center_angle), SQRT2 * radius)
    else:
        center = P[0].copy()
        best = Ball(center, float(np.max(geodesic_distance(center, P))))
        for _ in range(max_iter):
            coords, cut = log_coords(np.swapaxes(center, -1, -2) @ P)
            if np.any(cut):
                break
            c, _ = euclidean_minimax_ball(coords)
            center = exp_map(center, c)
            radius = float(np.max(geodesic_distance(center, P)))
            if radius < best.radius:
                best = Ball(center, radius)
            if np.linalg.norm(c) < 1e-15:
                break
        ball = best
    if ball.radius >= np.pi / 2:
        raise NoSmallBallError(f"smallest enclosing ball has radius {ball.radius:.6g} >= pi/2", ball)
    return ball
