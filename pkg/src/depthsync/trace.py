"""Run traces: per-iteration and per-epoch diagnostics, with CSV and JSON output."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CONVERGED = "Converged"
MAX_EPOCHS = "MaxEpochs"
ERROR = "Error"

CSV_COLUMNS = ("epoch", "t", "node", "step_norm", "delta", "ball_radius", "l1_energy", "wall_ms")


def fmt_float(x) -> str:
    if x is None:
        return ""
    return "%.17g" % float(x)


@dataclass
class SyncState:
    """Current estimates ``(n, D, D)`` plus the iteration counter."""

    estimates: np.ndarray
    t: int = 0

    @property
    def n(self) -> int:
        return len(self.estimates)

    @property
    def epoch(self) -> int:
        return self.t // self.n


@dataclass
class RunTrace:
    """Diagnostics of one run.

    Iteration ``t`` (1-based) updated ``nodes[t-1]``.  Epoch ``e`` ends at
    ``t = e * n``; epoch quantities are indexed ``e - 1`` and the initial
    state's diagnostics are kept separately as epoch 0.
    """

    n: int
    nodes: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    energies: list | None = None
    epoch_delta: list = field(default_factory=list)
    epoch_ball: list = field(default_factory=list)
    epoch_wall_ms: list = field(default_factory=list)
    init_delta: float | None = None
    init_ball: float | None = None
    init_energy: float | None = None
    status: str = ERROR
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def epochs(self) -> int:
        return len(self.epoch_wall_ms)

    @property
    def final_delta(self) -> float | None:
        if self.epoch_delta:
            return self.epoch_delta[-1]
        return self.init_delta

    def deltas(self) -> np.ndarray:
        """delta at the end of epochs 0, 1, 2, ..."""
        return np.array([self.init_delta] + list(self.epoch_delta), dtype=float)

    def ball_radii(self) -> np.ndarray:
        return np.array([self.init_ball] + list(self.epoch_ball), dtype=float)

    def rows(self, timing: bool = False):
        yield {"epoch": 0, "t": 0, "node": None, "step_norm": None, "delta": self.init_delta,
               "ball_radius": self.init_ball, "l1_energy": self.init_energy, "wall_ms": None}
        for i, (node, step) in enumerate(zip(self.nodes, self.steps)):
            t = i + 1
            epoch = (t - 1) // self.n + 1
            end = t % self.n == 0 and epoch <= self.epochs
            row = {"epoch": epoch, "t": t, "node": node, "step_norm": step, "delta": None,
                   "ball_radius": None, "wall_ms": None,
                   "l1_energy": self.energies[i] if self.energies is not None else None}
            if end:
                e = epoch - 1
                if e < len(self.epoch_delta):
                    row["delta"] = self.epoch_delta[e]
                    row["ball_radius"] = self.epoch_ball[e]
                if timing:
                    row["wall_ms"] = self.epoch_wall_ms[e]
            yield row

    def write_csv(self, path, timing: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.rows(timing):
                w.writerow([
                    r["epoch"], r["t"], "" if r["node"] is None else r["node"],
                    fmt_float(r["step_norm"]), fmt_float(r["delta"]), fmt_float(r["ball_radius"]),
                    fmt_float(r["l1_energy"]), fmt_float(r["wall_ms"]),
                ])

    def summary(self) -> dict:
        out = {"status": self.status, "final_delta": self.final_delta, "epochs": self.epochs}
        if self.message:
            out["message"] = self.message
        out.update(self.extra)
        return out

    def write_summary(self, path) -> None:
        from .graph import dumps_stable

        Path(path).write_text(dumps_stable(self.summary()))


def read_summary(path) -> dict:
    return json.loads(Path(path).read_text())
