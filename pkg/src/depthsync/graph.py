"""Measurement graphs, corruption accounting and the well-connectedness check."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedError, TooLargeError, UnknownLabelsError, ValidationError
from .manifold import check_rotation

LABELS = ("good", "bad", "unknown")
MAX_EXHAUSTIVE_N = 24


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def _is_connected(n: int, ej: np.ndarray, ek: np.ndarray) -> bool:
    if n <= 1:
        return True
    A = coo_matrix((np.ones(len(ej)), (ej, ek)), shape=(n, n))
    ncomp, _ = connected_components(A, directed=False)
    return ncomp == 1


@dataclass(frozen=True, eq=False)
class MeasurementGraph:
    """Undirected graph with one rotation measurement ``R_jk`` per edge.

    Edges are stored once with ``j < k``; the reverse measurement is
    ``R_kj = R_jk^T`` and is never stored.  ``labels`` holds "good", "bad" or
    "unknown" for each edge.
    """

    n: int
    dim: int
    ej: np.ndarray
    ek: np.ndarray
    R: np.ndarray
    labels: tuple
    ground_truth: np.ndarray | None = None
    _adj: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n, D = int(self.n), int(self.dim)
        if n < 1 or D < 2:
            raise ValidationError("need n >= 1 and dim >= 2")
        ej = np.asarray(self.ej, dtype=np.int64)
        ek = np.asarray(self.ek, dtype=np.int64)
        R = np.asarray(self.R, dtype=float).reshape(len(ej), D, D)
        labels = tuple(self.labels)
        if not (len(ej) == len(ek) == len(labels)):
            raise ValidationError("edge arrays have inconsistent lengths")
        if np.any(ej == ek):
            raise ValidationError("self-loops are not allowed")
        if len(ej) and (min(ej.min(), ek.min()) < 0 or max(ej.max(), ek.max()) >= n):
            raise ValidationError("edge endpoint out of range")
        # canonical orientation j < k
        flip = ej > ek
        if np.any(flip):
            ej, ek = np.where(flip, ek, ej), np.where(flip, ej, ek)
            R = np.where(flip[:, None, None], np.swapaxes(R, 1, 2), R)
        keys = ej * n + ek
        if len(np.unique(keys)) != len(keys):
            raise ValidationError("duplicate edge")
        order = np.argsort(keys, kind="stable")
        ej, ek, R = ej[order], ek[order], R[order]
        labels = tuple(labels[i] for i in order)
        for lab in labels:
            if lab not in LABELS:
                raise ValidationError(f"unknown edge label {lab!r}")
        for i in range(len(R)):
            check_rotation(R[i], D)
        if not _is_connected(n, ej, ek):
            raise DisconnectedError("measurement graph is not connected")
        gt = self.ground_truth
        if gt is not None:
            gt = np.asarray(gt, dtype=float).reshape(n, D, D)
            for i in range(n):
                check_rotation(gt[i], D)
            gt = _frozen(gt)

        adj = [[] for _ in range(n)]
        for e, (a, b) in enumerate(zip(ej.tolist(), ek.tolist())):
            adj[a].append((b, e, False))
            adj[b].append((a, e, True))
        for lst in adj:
            lst.sort()
        set_ = object.__setattr__
        set_(self, "n", n)
        set_(self, "dim", D)
        set_(self, "ej", _frozen(ej))
        set_(self, "ek", _frozen(ek))
        set_(self, "R", _frozen(R))
        set_(self, "labels", labels)
        set_(self, "ground_truth", gt)
        set_(self, "_adj", adj)

    @property
    def num_edges(self) -> int:
        return len(self.ej)

    @property
    def is_labeled(self) -> bool:
        return all(lab != "unknown" for lab in self.labels)

    def degree(self, j: int) -> int:
        return len(self._adj[j])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj])

    def neighbors(self, j: int) -> np.ndarray:
        return np.array([k for k, _, _ in self._adj[j]], dtype=np.int64)

    def node_measurements(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbors of ``j`` and the measurements ``R_jk`` oriented from ``j``."""
        nbrs = self.neighbors(j)
        Rs = np.empty((len(nbrs), self.dim, self.dim))
        for i, (_, e, rev) in enumerate(self._adj[j]):
            Rs[i] = self.R[e].T if rev else self.R[e]
        return nbrs, Rs

    def measurement(self, j: int, k: int) -> np.ndarray:
        for kk, e, rev in self._adj[j]:
            if kk == k:
                return self.R[e].T if rev else self.R[e].copy()
        raise KeyError(f"no edge between {j} and {k}")

    def is_complete(self) -> bool:
        return self.num_edges == self.n * (self.n - 1) // 2

    def replace(self, **changes) -> "MeasurementGraph":
        fields = dict(n=self.n, dim=self.dim, ej=self.ej, ek=self.ek, R=self.R,
                      labels=self.labels, ground_truth=self.ground_truth)
        fields.update(changes)
        return MeasurementGraph(**fields)


# --- neighborhoods and corruption ------------------------------------------------------

def neighborhoods(g: MeasurementGraph, j: int, split: bool = True):
    """Return ``(all, good, bad)`` neighbor sets of node ``j``.

    With ``split=False`` only the set of all neighbors is returned.

    Raises:
        UnknownLabelsError: a split was requested but some edge at ``j`` is unlabeled.
    """
    everything = {k for k, _, _ in g._adj[j]}
    if not split:
        return everything
    good, bad = set(), set()
    for k, e, _ in g._adj[j]:
        lab = g.labels[e]
        if lab == "unknown":
            raise UnknownLabelsError(f"edge ({j}, {k}) has no good/bad label")
        (good if lab == "good" else bad).add(k)
    return everything, good, bad


@dataclass(frozen=True)
class CorruptionStats:
    alpha0: float
    per_node: tuple  # (n_j, bad_j, fraction) for each node


def corruption_stats(g: MeasurementGraph) -> CorruptionStats:
    if not g.is_labeled:
        raise UnknownLabelsError("corruption statistics need a fully labeled graph")
    deg = np.zeros(g.n, dtype=int)
    bad = np.zeros(g.n, dtype=int)
    np.add.at(deg, g.ej, 1)
    np.add.at(deg, g.ek, 1)
    is_bad = np.array([lab == "bad" for lab in g.labels], dtype=bool)
    np.add.at(bad, g.ej[is_bad], 1)
    np.add.at(bad, g.ek[is_bad], 1)
    frac = np.where(deg > 0, bad / np.maximum(deg, 1), 0.0)
    per_node = tuple((int(d), int(b), float(f)) for d, b, f in zip(deg, bad, frac))
    return CorruptionStats(float(frac.max()) if g.n else 0.0, per_node)


# --- well-connectedness --------------------------------------------------------------------

@dataclass(frozen=True)
class WellConnectedness:
    """Verdict is True, False or None (unknown); ``witness`` is a violating subset."""

    verdict: bool | None
    witness: tuple | None = None
    checked: int = 0


def _adjacency_masks(g: MeasurementGraph) -> tuple[np.ndarray, np.ndarray]:
    masks = np.zeros(g.n, dtype=np.uint64)
    for a, b in zip(g.ej.tolist(), g.ek.tolist()):
        masks[a] |= np.uint64(1 << b)
        masks[b] |= np.uint64(1 << a)
    return masks, g.degrees()


def _violations(masks_J: np.ndarray, adj: np.ndarray, deg: np.ndarray) -> np.ndarray:
    """For each subset bitmask, True if no member has more neighbors outside than inside."""
    ok = np.ones(len(masks_J), dtype=bool)
    one = np.uint64(1)
    for j in range(len(adj)):
        member = ((masks_J >> np.uint64(j)) & one).astype(bool)
        inside = np.bitwise_count(masks_J & adj[j]).astype(np.int64)
        ok &= ~member | (2 * inside >= deg[j])
    return ok


def violates_well_connectedness(g: MeasurementGraph, J) -> bool:
    """True if no node of ``J`` has strictly more neighbors outside ``J`` than inside."""
    J = set(int(x) for x in J)
    for j in J:
        nb = neighborhoods(g, j, split=False)
        inside = len(nb & J)
        if len(nb) - inside > inside:
            return False
    return True


def _mask_to_tuple(m: int, n: int) -> tuple:
    return tuple(i for i in range(n) if (m >> i) & 1)


def is_well_connected(g: MeasurementGraph, mode: str = "exhaustive", trials: int = 10000,
                      rng=None, chunk: int = 1 << 16) -> WellConnectedness:
    """Check the well-connectedness condition.

    Every nonempty ``J`` with ``#J <= floor(n/2)`` must contain a node with
    strictly more neighbors outside ``J`` than inside.  ``exhaustive`` scans
    all subsets (``n <= 24``); ``sampled`` draws ``trials`` random subsets and
    can only refute.

    Raises:
        TooLargeError: exhaustive mode with ``n > 24``.
    """
    n = g.n
    half = n // 2
    if half == 0:
        return WellConnectedness(True, None, 0)
    adj, deg = _adjacency_masks(g)
    if mode == "exhaustive":
        if n > MAX_EXHAUSTIVE_N:
            raise TooLargeError(f"exhaustive scan is capped at n={MAX_EXHAUSTIVE_N}, got n={n}")
        total = 1 << n
        checked = 0
        for start in range(1, total, chunk):
            masks = np.arange(start, min(start + chunk, total), dtype=np.uint64)
            masks = masks[np.bitwise_count(masks) <= half]
            checked += len(masks)
            bad = _violations(masks, adj, deg)
            if np.any(bad):
                m = int(masks[np.argmax(bad)])
                return WellConnectedness(False, _mask_to_tuple(m, n), checked)
        return WellConnectedness(True, None, checked)
    if mode == "sampled":
        if rng is None:
            rng = np.random.default_rng(0)
        sizes = rng.integers(1, half + 1, size=trials)
        masks = np.zeros(trials, dtype=np.uint64)
        for i, s in enumerate(sizes):
            for v in rng.choice(n, size=s, replace=False):
                masks[i] |= np.uint64(1 << int(v))
        bad = _violations(masks, adj, deg)
        if np.any(bad):
            m = int(masks[np.argmax(bad)])
            return WellConnectedness(False, _mask_to_tuple(m, n), trials)
        return WellConnectedness(None, None, trials)
    raise ValidationError(f"unknown mode {mode!r}")


# --- generators ---------------------------------------------------------------------------

def _topology(n: int, dim: int, ej, ek) -> MeasurementGraph:
    m = len(ej)
    return MeasurementGraph(n, dim, np.asarray(ej), np.asarray(ek),
                            np.broadcast_to(np.eye(dim), (m, dim, dim)), ("unknown",) * m)


def make_complete(n: int, dim: int) -> MeasurementGraph:
    ej, ek = np.triu_indices(n, k=1)
    return _topology(n, dim, ej, ek)


def make_erdos_renyi(n: int, dim: int, p: float, rng, max_attempts: int = 100) -> MeasurementGraph:
    """Erdős–Rényi topology, resampled until connected.

    Raises:
        DisconnectedError: no connected sample within ``max_attempts``.
    """
    if not 0 < p <= 1:
        raise ValidationError(f"p must lie in (0, 1], got {p}")
    I, J = np.triu_indices(n, k=1)
    for _ in range(max_attempts):
        keep = rng.random(len(I)) < p
        if _is_connected(n, I[keep], J[keep]):
            return _topology(n, dim, I[keep], J[keep])
    raise DisconnectedError(f"no connected G({n}, {p}) sample in {max_attempts} attempts")


def graph_from_edges(n: int, dim: int, edges) -> MeasurementGraph:
    """Topology-only graph from an iterable of ``(j, k)`` pairs."""
    edges = list(edges)
    return _topology(n, dim, [e[0] for e in edges], [e[1] for e in edges])


# --- JSON ---------------------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValidationError("non-finite float cannot be serialized")
        return "%.17g" % float(x)
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(json.dumps(str(k)) + ": " + _fmt(v) for k, v in x.items()) + "}"
    if isinstance(x, np.ndarray):
        x = x.tolist()
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps_stable(obj) -> str:
    """JSON text with 17-significant-digit floats; identical input gives identical bytes."""
    return _fmt(obj) + "\n"


def graph_to_dict(g: MeasurementGraph) -> dict:
    D = g.dim
    edges = [
        {"j": int(a), "k": int(b), "R": g.R[i].reshape(D * D), "label": g.labels[i]}
        for i, (a, b) in enumerate(zip(g.ej, g.ek))
    ]
    out = {"n": g.n, "D": D, "edges": edges}
    if g.ground_truth is not None:
        out["ground_truth"] = g.ground_truth.reshape(g.n, D * D)
    return out


def graph_from_dict(d: dict) -> MeasurementGraph:
    try:
        n, D = int(d["n"]), int(d["D"])
        edges = d["edges"]
        ej = [int(e["j"]) for e in edges]
        ek = [int(e["k"]) for e in edges]
        R = np.array([e["R"] for e in edges], dtype=float).reshape(len(edges), D, D)
        labels = [e.get("label", "unknown") for e in edges]
        gt = d.get("ground_truth")
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed graph JSON: {exc}") from exc
    if gt is not None:
        gt = np.array(gt, dtype=float).reshape(n, D, D)
    return MeasurementGraph(n, D, ej, ek, R, labels, gt)


def save_graph(g: MeasurementGraph, path) -> None:
    Path(path).write_text(dumps_stable(graph_to_dict(g)))


def load_graph(path) -> MeasurementGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))
