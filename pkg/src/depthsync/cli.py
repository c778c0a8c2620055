"""Command-line harness: generate, run, sweep, check-graph, depth."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dds import DdsConfig, dds_run
from .depth import Rule, SelectionRule, depth_region_1d, max_depth_point, tukey_depth
from .errors import SyncError, ValidationError
from .graph import (
    MAX_EXHAUSTIVE_N,
    MeasurementGraph,
    corruption_stats,
    dumps_stable,
    is_well_connected,
    load_graph,
    make_complete,
    make_erdos_renyi,
)
from .l1mra import gd_l1_run
from .scenario import (
    Scenario,
    corrupt_consistent,
    corrupt_random,
    load_scenario,
    make_scenario,
    save_scenario,
    spurious_fixture,
)
from .tas import TasConfig, tas_run
from .trace import CONVERGED, ERROR, fmt_float

log = logging.getLogger("depthsync")

ALGOS = ("dds", "tas", "l1mra")
MODELS = ("clean", "random", "consistent", "spurious")
EXIT_OK, EXIT_ERROR, EXIT_MAX_EPOCHS = 0, 1, 2
SWEEP_COLUMNS = ("alpha", "seed", "algo", "status", "final_delta", "epochs", "wall_ms")


@dataclass
class GraphSpec:
    type: str = "complete"
    p: float = 1.0


@dataclass
class CorruptionSpec:
    model: str = "random"
    alpha: float = 0.0
    rho: float = 1.0
    seed: int = 0
    theta: float = math.pi / 4


@dataclass
class SolverSpec:
    algo: str = "dds"
    eta: float | None = None
    beta: float | None = None
    rule: str | None = None
    max_epochs: int = 2000
    stop_tol: float = 1e-12
    delta_tol: float | None = None


@dataclass
class SweepSpec:
    alphas: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    algos: list = field(default_factory=list)
    success_tol: float = 1e-6


@dataclass
class ExperimentConfig:
    n: int = 10
    D: int = 2
    graph: GraphSpec = field(default_factory=GraphSpec)
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        parts = {"graph": GraphSpec, "corruption": CorruptionSpec, "solver": SolverSpec,
                 "sweep": SweepSpec}
        kwargs = {}
        for key, value in d.items():
            if key in parts:
                try:
                    kwargs[key] = parts[key](**value)
                except TypeError as exc:
                    raise ValidationError(f"config section '{key}': {exc}") from exc
            elif key in ("n", "D", "output_dir"):
                kwargs[key] = value
            else:
                raise ValidationError(f"unknown config key '{key}'")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not isinstance(self.n, int) or self.n < 2:
            raise ValidationError("n must be an integer >= 2")
        if not isinstance(self.D, int) or self.D < 2:
            raise ValidationError("D must be an integer >= 2")
        if self.graph.type not in ("complete", "erdos_renyi"):
            raise ValidationError("graph.type must be 'complete' or 'erdos_renyi'")
        c = self.corruption
        if c.model not in MODELS:
            raise ValidationError(f"corruption.model must be one of {MODELS}")
        if not 0 <= c.alpha < 0.5:
            raise ValidationError("corruption.alpha must lie in [0, 1/2)")
        for a in self.sweep.alphas:
            if not 0 <= a < 0.5:
                raise ValidationError("sweep alphas must lie in [0, 1/2)")
        if c.model == "spurious":
            if self.D != 2:
                raise ValidationError("the spurious model needs D = 2")
            if self.n % 2:
                raise ValidationError("the spurious model needs an even n")
        for algo in [self.solver.algo] + list(self.sweep.algos):
            check_algo(algo, self.D)
        if self.solver.rule is not None:
            Rule(self.solver.rule)

    def to_dict(self) -> dict:
        return asdict(self)


def check_algo(algo: str, D: int) -> None:
    if algo not in ALGOS:
        raise ValidationError(f"algo must be one of {ALGOS}, got {algo!r}")
    if algo in ("tas", "l1mra") and D != 2:
        raise ValidationError(f"{algo} requires D = 2")


def load_config(path) -> ExperimentConfig:
    if path is None:
        cfg = ExperimentConfig()
        cfg.validate()
        return cfg
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data)


# --- building and running -----------------------------------------------------------------------

def build_scenario(cfg: ExperimentConfig, alpha: float | None = None, seed: int | None = None) -> Scenario:
    c = cfg.corruption
    alpha = c.alpha if alpha is None else alpha
    seed = c.seed if seed is None else seed
    if c.model == "spurious":
        return spurious_fixture(cfg.n, c.theta)
    rng = np.random.default_rng(seed)
    if cfg.graph.type == "complete":
        g = make_complete(cfg.n, cfg.D)
    else:
        g = make_erdos_renyi(cfg.n, cfg.D, cfg.graph.p, rng)
    s = make_scenario(cfg.n, cfg.D, c.rho, rng, graph=g, seed=seed)
    if c.model == "random":
        s = corrupt_random(s, alpha, rng)
    elif c.model == "consistent":
        s = corrupt_consistent(s, alpha, rng)
    return s


def run_solver(scenario: Scenario, solver: SolverSpec, seed: int = 0):
    check_algo(solver.algo, scenario.dim)
    rng = np.random.default_rng(seed)
    if solver.algo == "dds":
        rule = SelectionRule(Rule(solver.rule)) if solver.rule else None
        cfg = DdsConfig(beta=solver.beta, eta=solver.eta, rule=rule, max_epochs=solver.max_epochs,
                        stop_tol=solver.stop_tol, delta_tol=solver.delta_tol)
        return dds_run(scenario, cfg, rng)
    if solver.algo == "tas":
        cfg = TasConfig(eta=solver.eta, max_epochs=solver.max_epochs, stop_tol=solver.stop_tol,
                        delta_tol=solver.delta_tol)
        return tas_run(scenario, cfg)
    return gd_l1_run(scenario, max_epochs=solver.max_epochs, delta_tol=solver.delta_tol)


def _sweep_job(args):
    cfg_dict, alpha, seed, algo = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    tic = time.perf_counter()
    try:
        s = build_scenario(cfg, alpha, seed)
        solver = SolverSpec(**{**asdict(cfg.solver), "algo": algo})
        _, trace = run_solver(s, solver, seed)
        status, delta, epochs = trace.status, trace.final_delta, trace.epochs
    except Exception as exc:  # recorded per row, the grid keeps going
        status, delta, epochs = ERROR, None, 0
        log.error("alpha=%s seed=%s algo=%s failed: %s", alpha, seed, algo, exc)
    wall = (time.perf_counter() - tic) * 1000.0
    return {"alpha": alpha, "seed": seed, "algo": algo, "status": status, "final_delta": delta,
            "epochs": epochs, "wall_ms": wall}


def sweep(cfg: ExperimentConfig, workers: int = 1) -> list[dict]:
    sw = cfg.sweep
    if not sw.alphas or not sw.seeds:
        raise ValidationError("sweep.alphas and sweep.seeds must be nonempty")
    algos = list(sw.algos) or [cfg.solver.algo]
    jobs = [(cfg.to_dict(), float(a), int(s), algo) for a in sw.alphas for s in sw.seeds for algo in algos]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    rows.sort(key=lambda r: (r["algo"], r["alpha"], r["seed"]))
    return rows


def success_rates(rows: list[dict], tol: float) -> list[dict]:
    groups: dict = {}
    for r in rows:
        ok = r["final_delta"] is not None and r["final_delta"] < tol
        runs, succ = groups.get((r["algo"], r["alpha"]), (0, 0))
        groups[(r["algo"], r["alpha"])] = (runs + 1, succ + int(ok))
    return [{"algo": a, "alpha": al, "runs": runs, "successes": succ, "success_rate": succ / runs}
            for (a, al), (runs, succ) in sorted(groups.items())]


def write_sweep(rows, rates, out: Path, timing: bool = False) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([fmt_float(r["alpha"]), r["seed"], r["algo"], r["status"],
                        fmt_float(r["final_delta"]), r["epochs"],
                        fmt_float(r["wall_ms"]) if timing else ""])
    with open(out / "success_rate.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("algo", "alpha", "runs", "successes", "success_rate"))
        for r in rates:
            w.writerow([r["algo"], fmt_float(r["alpha"]), r["runs"], r["successes"],
                        fmt_float(r["success_rate"])])


# --- reports --------------------------------------------------------------------------------------

def well_connectedness_report(g: MeasurementGraph, rng=None) -> str:
    if g.n <= MAX_EXHAUSTIVE_N:
        wc = is_well_connected(g, "exhaustive")
        mode = "exhaustive"
    else:
        wc = is_well_connected(g, "sampled", rng=rng or np.random.default_rng(0))
        mode = "sampled"
    verdict = {True: "true", False: "false", None: "unknown"}[wc.verdict]
    line = f"well_connected: {verdict} ({mode})"
    if wc.witness is not None:
        line += f" witness J = {list(wc.witness)}"
    return line


def graph_report(g: MeasurementGraph) -> list[str]:
    deg = g.degrees()
    lines = [f"nodes: {g.n}", f"edges: {g.num_edges}", "connected: true",
             f"degrees: min {deg.min()} max {deg.max()} mean {deg.mean():.6g}"]
    if g.is_labeled:
        lines.append(f"alpha0: {corruption_stats(g).alpha0:.17g}")
    else:
        lines.append("alpha0: unknown (unlabeled edges)")
    lines.append(well_connectedness_report(g))
    return lines


def load_points(path) -> np.ndarray:
    p = Path(path)
    if p.suffix == ".json":
        X = np.array(json.loads(p.read_text()), dtype=float)
    else:
        X = np.loadtxt(p, delimiter="," if p.suffix == ".csv" else None, ndmin=2)
    if X.ndim == 1:
        X = X[:, None]
    return X


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError as exc:
        raise ValidationError(f"cannot parse query point {text!r}") from exc


# --- commands -------------------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.corruption.seed = args.seed
    s = build_scenario(cfg)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "scenario.json"
    save_scenario(s, path)
    print(f"wrote {path}")
    print(f"alpha0: {corruption_stats(s.graph).alpha0:.17g}")
    print(well_connectedness_report(s.graph))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    s = load_scenario(args.scenario)
    solver = cfg.solver
    if args.algo:
        solver.algo = args.algo
    for name in ("eta", "beta", "max_epochs", "stop_tol", "delta_tol"):
        value = getattr(args, name)
        if value is not None:
            setattr(solver, name, value)
    _, trace = run_solver(s, solver, args.seed if args.seed is not None else 0)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace.write_csv(out / "trace.csv", timing=args.timing)
    trace.write_summary(out / "summary.json")
    summary = trace.summary()
    print(f"status: {summary['status']}")
    print(f"final_delta: {fmt_float(summary['final_delta'])}")
    print(f"epochs: {summary['epochs']}")
    if "coordinatewise_fixed" in summary:
        print(f"coordinatewise_fixed: {str(summary['coordinatewise_fixed']).lower()}")
    return EXIT_OK if trace.status == CONVERGED else EXIT_MAX_EPOCHS


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.algo:
        cfg.sweep.algos = [args.algo]
        cfg.validate()
    rows = sweep(cfg, workers=args.workers)
    rates = success_rates(rows, cfg.sweep.success_tol)
    out = Path(args.out or cfg.output_dir)
    write_sweep(rows, rates, out, timing=args.timing)
    for r in rates:
        print(f"{r['algo']} alpha={r['alpha']:.4g}: {r['successes']}/{r['runs']} succeeded")
    return EXIT_OK


def cmd_check_graph(args) -> int:
    g = load_graph(args.graph)
    for line in graph_report(g):
        print(line)
    return EXIT_OK


def cmd_depth(args) -> int:
    X = load_points(args.points)
    d = X.shape[1]
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    if args.query is not None:
        q = parse_vector(args.query)
        print(f"depth: {tukey_depth(q, X)}")
    p = max_depth_point(X, args.beta, SelectionRule.default_for(d), rng)
    print("max_depth_point: " + " ".join(fmt_float(v) for v in p))
    print(f"max_depth_point_depth: {tukey_depth(p, X)}")
    if d == 1:
        region = depth_region_1d(args.beta, X)
        print(f"region: [{fmt_float(region.lo)}, {fmt_float(region.hi)}]")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depthsync", description="Robust rotation synchronization harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic scenario")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run a solver on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--algo", choices=ALGOS)
    p.add_argument("--eta", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--stop-tol", dest="stop_tol", type=float)
    p.add_argument("--delta-tol", dest="delta_tol", type=float)
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run an alpha x seed x algo grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--algo", choices=ALGOS)
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-graph", help="report on a graph JSON file")
    p.add_argument("graph")
    p.set_defaults(func=cmd_check_graph)

    p = sub.add_parser("depth", help="Tukey depth utilities for a point file")
    p.add_argument("points")
    p.add_argument("--beta", type=float, default=0.25)
    p.add_argument("--query")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_depth)
    return parser


def _setup_logging() -> None:
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    name = os.environ.get("SYNC_LOG", "warn").lower()
    logging.basicConfig(level=levels.get(name, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SyncError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
