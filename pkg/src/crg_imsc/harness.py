"""Experiment driver: missing-rate sweeps, (alpha, beta) grids, trace export."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import (
    MultiViewDataset,
    apply_mask,
    generate_mask,
    load_dataset,
    normalize_dataset,
    synthesize_gaussian_multiview,
)
from .evaluation import EvalReport, aggregate, evaluate
from .graph import build_graphs
from .solver import SolverConfig, assign_clusters, fit

log = logging.getLogger(__name__)

# powers of ten from 1e-6 to 1e6, the default alpha and beta axes of `grid`
DECADE_GRID = [10.0**e for e in range(-6, 7)]


@dataclass
class GraphConfig:
    kernel: str = "heat_selftuning"
    neighbors: int = 5


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a sweep.

    ``dataset`` is either ``{"manifest": path}`` or ``{"synthetic": {...}}``
    with the keyword arguments of :func:`synthesize_gaussian_multiview`.
    ``solver`` holds :class:`SolverConfig` fields except ``seed`` (set per run
    to ``base_seed + repeat``); ``k`` defaults to the number of label classes.
    """

    dataset: dict
    missing_rates: list = field(default_factory=lambda: [0.0])
    repeats: int = 10
    solver: dict = field(default_factory=dict)
    graph: GraphConfig = field(default_factory=GraphConfig)
    grid: dict | None = None
    output_dir: str = "results"
    base_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if isinstance(self.graph, dict):
            self.graph = GraphConfig(**self.graph)
        self.missing_rates = [float(r) for r in self.missing_rates]
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.missing_rates:
            raise ValueError("missing_rates is empty")
        for r in self.missing_rates:
            if not 0.0 <= r < 1.0:
                raise ValueError(f"missing rate {r} outside [0, 1)")
        if self.grid is not None:
            if not self.grid.get("alpha") or not self.grid.get("beta"):
                raise ValueError("grid needs non-empty 'alpha' and 'beta' lists")
        if ("manifest" in self.dataset) == ("synthetic" in self.dataset):
            raise ValueError("dataset needs exactly one of 'manifest' or 'synthetic'")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path) as f:
            raw = json.load(f)
        manifest = raw.get("dataset", {}).get("manifest")
        if manifest and not Path(manifest).is_absolute():
            raw["dataset"]["manifest"] = str(path.parent / manifest)
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    repeat: int
    seed: int
    report: EvalReport | None
    objective: list
    nmi: list
    iterations: int
    converged: bool
    wall_clock: float = 0.0
    error: str | None = None

    def to_dict(self, timing=False) -> dict:
        d = {
            "repeat": self.repeat,
            "seed": self.seed,
            "report": None if self.report is None else self.report.to_dict(),
            "objective": self.objective,
            "nmi": self.nmi,
            "iterations": self.iterations,
            "converged": self.converged,
            "error": self.error,
        }
        if timing:
            d["wall_clock"] = self.wall_clock
        return d

    @classmethod
    def from_dict(cls, d) -> "RunResult":
        d = dict(d)
        rep = d.pop("report")
        return cls(report=None if rep is None else EvalReport.from_dict(rep), **d)


@dataclass
class CellResult:
    missing_rate: float
    alpha: float
    beta: float
    report: EvalReport | None
    runs: list
    error: str | None = None

    def to_dict(self, timing=False) -> dict:
        return {
            "missing_rate": self.missing_rate,
            "alpha": self.alpha,
            "beta": self.beta,
            "report": None if self.report is None else self.report.to_dict(),
            "runs": [r.to_dict(timing) for r in self.runs],
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d) -> "CellResult":
        return cls(
            missing_rate=d["missing_rate"],
            alpha=d["alpha"],
            beta=d["beta"],
            report=None if d["report"] is None else EvalReport.from_dict(d["report"]),
            runs=[RunResult.from_dict(r) for r in d["runs"]],
            error=d["error"],
        )


@dataclass
class SweepResult:
    cells: list
    base_seed: int
    repeats: int
    mode: str = "sweep"

    @property
    def ok(self) -> bool:
        return all(c.error is None for c in self.cells)

    def best_cell(self) -> CellResult | None:
        """Cell with the highest mean NMI (first one wins ties)."""
        scored = [c for c in self.cells if c.report is not None]
        if not scored:
            return None
        return max(scored, key=lambda c: c.report.nmi)

    def to_dict(self, timing=False) -> dict:
        best = self.best_cell()
        return {
            "mode": self.mode,
            "base_seed": self.base_seed,
            "repeats": self.repeats,
            "best": None if best is None else {"alpha": best.alpha, "beta": best.beta, "missing_rate": best.missing_rate},
            "cells": [c.to_dict(timing) for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d) -> "SweepResult":
        return cls(
            cells=[CellResult.from_dict(c) for c in d["cells"]],
            base_seed=d["base_seed"],
            repeats=d["repeats"],
            mode=d["mode"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------------ runners


def load_experiment_dataset(config: ExperimentConfig) -> MultiViewDataset:
    if "manifest" in config.dataset:
        ds = load_dataset(config.dataset["manifest"])
        return normalize_dataset(ds)
    return synthesize_gaussian_multiview(**config.dataset["synthetic"])


def _solver_config(config: ExperimentConfig, dataset, alpha, beta, seed) -> SolverConfig:
    kw = dict(config.solver)
    kw.pop("seed", None)
    kw["alpha"], kw["beta"] = alpha, beta
    if "k" not in kw:
        if dataset.labels is None:
            raise ValueError("solver.k is required when the dataset has no labels")
        kw["k"] = int(np.unique(dataset.labels).size)
    return SolverConfig(seed=seed, **kw)


def _run_one(config, dataset, rate, alpha, beta, repeat) -> RunResult:
    seed = config.base_seed + repeat
    t0 = time.perf_counter()
    try:
        if rate > 0:
            if not dataset.is_complete:
                raise ValueError("artificial masking requires a complete dataset")
            data = apply_mask(dataset, generate_mask(dataset.n, dataset.V, rate, seed))
        else:
            data = dataset
        graphs = build_graphs(data.views, config.graph.neighbors, config.graph.kernel)
        scfg = _solver_config(config, data, alpha, beta, seed)
        state, trace = fit(data, graphs, scfg, labels=data.labels)
        report = None if data.labels is None else evaluate(data.labels, assign_clusters(state.U))
        return RunResult(
            repeat=repeat,
            seed=seed,
            report=report,
            objective=[float(x) for x in trace.objective],
            nmi=[float(x) for x in trace.nmi],
            iterations=trace.iterations,
            converged=trace.converged,
            wall_clock=time.perf_counter() - t0,
        )
    except Exception as e:  # a failing run aborts only its own cell
        log.warning("run failed (rate=%s alpha=%s beta=%s repeat=%d): %s", rate, alpha, beta, repeat, e)
        return RunResult(
            repeat=repeat, seed=seed, report=None, objective=[], nmi=[], iterations=0,
            converged=False, wall_clock=time.perf_counter() - t0, error=f"{type(e).__name__}: {e}",
        )


def _run_cells(config: ExperimentConfig, cells, mode: str, dataset=None) -> SweepResult:
    dataset = load_experiment_dataset(config) if dataset is None else dataset
    jobs = [(cell, r) for cell in cells for r in range(config.repeats)]

    def work(job):
        (rate, alpha, beta), r = job
        return _run_one(config, dataset, rate, alpha, beta, r)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            runs = list(pool.map(work, jobs))
    else:
        runs = [work(j) for j in jobs]

    out = []
    for i, (rate, alpha, beta) in enumerate(cells):
        cell_runs = runs[i * config.repeats : (i + 1) * config.repeats]
        errors = [r.error for r in cell_runs if r.error]
        if errors:
            out.append(CellResult(rate, alpha, beta, None, cell_runs, error=errors[0]))
        elif any(r.report is None for r in cell_runs):
            out.append(CellResult(rate, alpha, beta, None, cell_runs))
        else:
            out.append(CellResult(rate, alpha, beta, aggregate(r.report for r in cell_runs), cell_runs))
    return SweepResult(cells=out, base_seed=config.base_seed, repeats=config.repeats, mode=mode)


def run_sweep(config: ExperimentConfig, dataset=None) -> SweepResult:
    """Evaluate every configured missing rate with ``repeats`` seeded runs each.

    Run ``r`` masks and initialises with seed ``base_seed + r``; graphs are
    rebuilt on each masked dataset.
    """
    alpha = float(config.solver.get("alpha", SolverConfig.alpha))
    beta = float(config.solver.get("beta", SolverConfig.beta))
    cells = [(rate, alpha, beta) for rate in config.missing_rates]
    return _run_cells(config, cells, "sweep", dataset)


def run_param_grid(config: ExperimentConfig, dataset=None) -> SweepResult:
    """Cross product of ``grid['alpha']`` x ``grid['beta']`` at the first missing rate."""
    if config.grid is None:
        raise ValueError("config has no grid")
    rate = config.missing_rates[0]
    cells = [(rate, float(a), float(b)) for a in config.grid["alpha"] for b in config.grid["beta"]]
    return _run_cells(config, cells, "grid", dataset)


# ------------------------------------------------------------------ output


def _fmt(x: float) -> str:
    return repr(float(x))


def trace_name(result: SweepResult, cell: CellResult, run: RunResult) -> str:
    if result.mode == "grid":
        return f"run_{_fmt(cell.missing_rate)}_a{_fmt(cell.alpha)}_b{_fmt(cell.beta)}_{run.repeat}.csv"
    return f"run_{_fmt(cell.missing_rate)}_{run.repeat}.csv"


def export_traces(result: SweepResult, directory) -> list[Path]:
    """One CSV per run (iteration, objective, nmi) plus ``summary.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for cell in result.cells:
        for run in cell.runs:
            path = directory / trace_name(result, cell, run)
            with open(path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["iteration", "objective", "nmi"])
                for i, obj in enumerate(run.objective):
                    w.writerow([i + 1, repr(obj), repr(run.nmi[i]) if i < len(run.nmi) else ""])
            written.append(path)
    summary = directory / "summary.json"
    summary.write_text(result.to_json())
    written.append(summary)
    return written


def load_summary(path) -> SweepResult:
    with open(path) as f:
        return SweepResult.from_dict(json.load(f))


def write_nmi_grid(result: SweepResult, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["alpha", "beta", "nmi_mean", "nmi_std"])
        for c in result.cells:
            if c.report is None:
                w.writerow([repr(c.alpha), repr(c.beta), "", ""])
            else:
                w.writerow([repr(c.alpha), repr(c.beta), repr(c.report.nmi), repr(c.report.nmi_std)])
    return path


def write_outputs(result: SweepResult, config: ExperimentConfig, out_dir) -> dict:
    """Write ``results.json``, ``timings.json``, traces and (grid mode) ``nmi_grid.csv``.

    ``results.json`` omits wall-clock times so identical configs produce
    identical bytes; timings go to their own file.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    paths["results"] = out_dir / "results.json"
    payload = result.to_dict()
    payload["config"] = {k: v for k, v in config.to_dict().items() if k not in ("output_dir", "threads")}
    paths["results"].write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    timings = [
        {"missing_rate": c.missing_rate, "alpha": c.alpha, "beta": c.beta, "repeat": r.repeat, "wall_clock": r.wall_clock}
        for c in result.cells
        for r in c.runs
    ]
    paths["timings"] = out_dir / "timings.json"
    paths["timings"].write_text(json.dumps(timings, indent=2) + "\n")
    export_traces(result, out_dir / "traces")
    if result.mode == "grid":
        paths["nmi_grid"] = write_nmi_grid(result, out_dir / "nmi_grid.csv")
    return paths
