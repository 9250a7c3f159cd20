"""Experiment orchestration: seeded replications, result aggregation
into the benchmark table format, and exhaustive verification runs.

Configs are flat `section.key = value` text documents with a fail-fast
schema. Each replication owns its run directory (metadata.json,
events.jsonl, summary.json); the table generator works from summary
documents alone so every emitted number is traceable to a run.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import create_problem
from .ehrlich import EhrlichConfig, PestControlEquivConfig, build_oracle, construct_optimum
from .errors import ConfigError, InstanceTooLarge, SeqbenchError
from .isolation import remote_blackbox_client
from .observer import FileObserver, RunMetadata, read_summary
from .rng import stream_rng
from .solvers import SolverRunConfig, get_solver, solver_defaults

OUTPUT_ROOT_ENV = "SEQBENCH_OUTPUT_ROOT"

_PROBLEM_KEYS = {
    "family": str,
    "alphabet_size": int,
    "sequence_length": int,
    "n_motifs": int,
    "motif_length": int,
    "quantization": int,
    "sparsity": float,
}
_RUN_KEYS = {
    "seeds": "int_list",
    "budget": int,
    "n_init": int,
    "output_dir": str,
    "remote": str,
    "task": str,
}


@dataclass
class ExperimentConfig:
    problem_family: str
    problem_params: dict = field(default_factory=dict)
    solver: str = "directed_evolution"
    solver_params: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [0])
    budget: int = 300
    n_init: int = 10
    output_dir: Optional[str] = None
    remote: Optional[str] = None
    task: Optional[str] = None

    def task_name(self) -> str:
        return self.task or self.problem_config().problem_name()

    def problem_config(self):
        if self.problem_family == "ehrlich":
            cfg = EhrlichConfig(
                sequence_length=self.problem_params["sequence_length"],
                n_motifs=self.problem_params["n_motifs"],
                motif_length=self.problem_params["motif_length"],
                alphabet_size=self.problem_params.get("alphabet_size", 20),
                quantization=self.problem_params.get("quantization"),
                sparsity=self.problem_params.get("sparsity", 0.5),
            )
        elif self.problem_family == "pest_control_equiv":
            cfg = PestControlEquivConfig(
                quantization=self.problem_params.get("quantization"),
                sparsity=self.problem_params.get("sparsity", 0.5),
            )
        else:
            raise ConfigError(f"unknown problem family {self.problem_family!r}")
        return replace(cfg, n_init=self.n_init, budget=self.budget)


def _parse_value(raw: str, kind):
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind == "int_list":
        return [int(p) for p in raw.split(",") if p.strip() != ""]
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat key-value format; unknown keys are errors."""
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value

    config = ExperimentConfig(problem_family="")
    solver_params_raw: dict[str, str] = {}
    try:
        for key, raw in pairs.items():
            if "." not in key:
                raise ConfigError(f"key {key!r} is missing its section prefix")
            section, name = key.split(".", 1)
            if section == "problem":
                if name not in _PROBLEM_KEYS:
                    raise ConfigError(f"unknown key problem.{name}")
                value = _parse_value(raw, _PROBLEM_KEYS[name])
                if name == "family":
                    config.problem_family = value
                else:
                    config.problem_params[name] = value
            elif section == "solver":
                if name == "name":
                    config.solver = raw
                else:
                    solver_params_raw[name] = raw
            elif section == "run":
                if name not in _RUN_KEYS:
                    raise ConfigError(f"unknown key run.{name}")
                value = _parse_value(raw, _RUN_KEYS[name])
                setattr(config, "seeds" if name == "seeds" else name, value)
            else:
                raise ConfigError(f"unknown section {section!r} in key {key!r}")
    except ValueError as exc:
        raise ConfigError(f"bad value: {exc}") from exc

    if not config.problem_family:
        raise ConfigError("problem.family is required")
    defaults = solver_defaults(config.solver)
    for name, raw in solver_params_raw.items():
        if name not in defaults:
            raise ConfigError(
                f"unknown key solver.{name} for solver {config.solver!r}"
            )
        default = defaults[name]
        if raw.lower() == "none":
            config.solver_params[name] = None
        elif isinstance(default, bool):
            config.solver_params[name] = raw.lower() in ("1", "true", "yes")
        elif isinstance(default, int) and not isinstance(default, bool):
            config.solver_params[name] = int(raw)
        elif isinstance(default, float):
            config.solver_params[name] = float(raw)
        else:
            try:
                config.solver_params[name] = int(raw)
            except ValueError:
                try:
                    config.solver_params[name] = float(raw)
                except ValueError:
                    config.solver_params[name] = raw
    config.problem_config()  # validate family/params now
    return config


def serialize_config(config: ExperimentConfig) -> str:
    """Lossless inverse of `parse_config`."""
    lines = [f"problem.family = {config.problem_family}"]
    for name in sorted(config.problem_params):
        lines.append(f"problem.{name} = {config.problem_params[name]}")
    lines.append(f"solver.name = {config.solver}")
    for name in sorted(config.solver_params):
        value = config.solver_params[name]
        lines.append(f"solver.{name} = {'none' if value is None else value}")
    lines.append("run.seeds = " + ",".join(str(s) for s in config.seeds))
    lines.append(f"run.budget = {config.budget}")
    lines.append(f"run.n_init = {config.n_init}")
    for name in ("output_dir", "remote", "task"):
        value = getattr(config, name)
        if value is not None:
            lines.append(f"run.{name} = {value}")
    return "\n".join(lines) + "\n"


@dataclass
class RunRecord:
    task: str
    solver: str
    seed: int
    best_score: float
    trajectory: np.ndarray
    total_calls: int
    duration_ms: int
    run_dir: Optional[str] = None
    error: Optional[str] = None


def output_root(explicit: Optional[str] = None) -> Path:
    return Path(explicit or os.environ.get(OUTPUT_ROOT_ENV, "results"))


def _run_dir(root: Path, config: ExperimentConfig, seed: int) -> Path:
    return root / config.task_name() / config.solver / f"seed_{seed}"


def run_single(
    config: ExperimentConfig, seed: int, out_root: Optional[Path] = None, clock=None
) -> RunRecord:
    """One seeded replication with its own observer directory."""
    t_start = time.monotonic()
    solver_fn = get_solver(config.solver)
    params = {**solver_defaults(config.solver), **config.solver_params}
    problem_config = config.problem_config()
    run_dir = _run_dir(output_root(out_root), config, seed) if out_root is not None else None

    def observer_for(problem_doc: dict):
        if run_dir is None:
            return None
        return FileObserver(run_dir).initialize(
            RunMetadata(
                problem=problem_doc,
                solver=config.solver,
                solver_params={k: params[k] for k in sorted(params)},
                seed=seed,
                budget=config.budget,
                n_init=config.n_init,
                artifact_version=__version__,
            )
        )

    if config.remote:
        host, _, port = config.remote.rpartition(":")
        oracle = build_oracle(problem_config, seed)  # local twin for init draws
        observer = observer_for(oracle.metadata())
        handle = remote_blackbox_client(
            host or "127.0.0.1", int(port), budget=config.budget,
            init_budget=config.n_init, observer=observer, clock=clock,
        )
        from .ehrlich import sample_chain_batch

        init_rng = stream_rng(seed, "init")
        init_data = []
        if config.n_init > 0:
            X = sample_chain_batch(
                oracle.matrix, oracle.sequence_length, config.n_init, init_rng
            )
            scores = handle.evaluate_init(list(X))
            init_data = list(zip(list(X), scores))
    else:
        observer = None
        handle, init_data = create_problem(
            problem_config, seed,
            observer=(lambda doc: observer_for(doc)) if run_dir is not None else None,
            clock=clock,
        )
        observer = handle.observer

    result = solver_fn(
        handle, SolverRunConfig(seed=seed, budget=config.budget, init_data=init_data),
        **params,
    )
    duration_ms = int((time.monotonic() - t_start) * 1000)
    if observer is not None:
        observer.finalize(
            best_score=handle.best_so_far,
            total_calls=handle.ledger.consumed,
            init_calls=handle.init_ledger.consumed,
            duration_ms=duration_ms,
            extra={"task": config.task_name(), "solver": config.solver, "seed": seed},
        )
    if config.remote and hasattr(handle, "connection"):
        handle.connection.shutdown()
    return RunRecord(
        task=config.task_name(),
        solver=config.solver,
        seed=seed,
        best_score=result.best_score,
        trajectory=result.trajectory,
        total_calls=handle.ledger.consumed,
        duration_ms=duration_ms,
        run_dir=str(run_dir) if run_dir is not None else None,
    )


def run_experiment(
    config: ExperimentConfig, out_root: Optional[str] = None, clock=None
) -> list[RunRecord]:
    """One RunRecord per seed; a failed seed does not stop the others."""
    root = output_root(out_root or config.output_dir)
    records = []
    for seed in config.seeds:
        try:
            records.append(run_single(config, seed, out_root=root, clock=clock))
        except SeqbenchError as exc:
            records.append(
                RunRecord(
                    task=config.task_name(), solver=config.solver, seed=seed,
                    best_score=float("nan"), trajectory=np.empty(0),
                    total_calls=0, duration_ms=0, error=f"{type(exc).__name__}: {exc}",
                )
            )
    return records


@dataclass
class ResultsTable:
    solvers: list[str]
    tasks: list[str]
    cells: dict  # (solver, task) -> (mean, std, n)
    normalized: dict  # (solver, task) -> float
    sums: dict  # solver -> float
    missing: list  # (solver, task) pairs with no records


def aggregate(records) -> ResultsTable:
    """Mean +/- sample std per (solver, task) plus min-max-normalized sums."""
    groups: dict[tuple, list[float]] = {}
    solvers: list[str] = []
    tasks: list[str] = []
    for record in records:
        if isinstance(record, RunRecord):
            solver, task, best, error = (
                record.solver, record.task, record.best_score, record.error,
            )
        else:
            solver, task, best = record["solver"], record["task"], record["best_score"]
            error = record.get("error")
        if solver not in solvers:
            solvers.append(solver)
        if task not in tasks:
            tasks.append(task)
        if error is None and np.isfinite(best):
            groups.setdefault((solver, task), []).append(float(best))

    cells, missing = {}, []
    for solver in solvers:
        for task in tasks:
            values = groups.get((solver, task))
            if not values:
                missing.append((solver, task))
                continue
            arr = np.asarray(values)
            std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            cells[(solver, task)] = (float(arr.mean()), std, arr.size)

    normalized = {}
    for task in tasks:
        means = {s: cells[(s, task)][0] for s in solvers if (s, task) in cells}
        if not means:
            continue
        lo, hi = min(means.values()), max(means.values())
        for solver, mean in means.items():
            normalized[(solver, task)] = 0.0 if hi == lo else (mean - lo) / (hi - lo)
    sums = {
        solver: sum(normalized[(solver, t)] for t in tasks if (solver, t) in normalized)
        for solver in solvers
    }
    return ResultsTable(solvers, tasks, cells, normalized, sums, missing)


SUM_COLUMN = "Sum (normalized per row)"


def emit_table(table: ResultsTable, format: str = "markdown") -> str:
    """Deterministic rendering: 3 decimals for means, 2 for stds."""
    if format == "markdown":
        header = ["Solver \\ Oracle", *table.tasks, SUM_COLUMN]
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join(" --- " for _ in header) + "|"]
        for solver in table.solvers:
            row = [solver]
            for task in table.tasks:
                cell = table.cells.get((solver, task))
                row.append("" if cell is None else f"{cell[0]:.3f} ± {cell[1]:.2f}")
            row.append(f"{table.sums[solver]:.3f}")
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    if format == "csv":
        columns = ["solver"]
        for task in table.tasks:
            columns += [f"{task} mean", f"{task} std", f"{task} n"]
        columns.append("sum_normalized")
        lines = [",".join(columns)]
        for solver in table.solvers:
            row = [solver]
            for task in table.tasks:
                cell = table.cells.get((solver, task))
                row += ["", "", ""] if cell is None else [
                    repr(cell[0]), repr(cell[1]), str(cell[2])
                ]
            row.append(repr(table.sums[solver]))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown table format {format!r}")


def parse_table_csv(text: str) -> dict:
    """Numeric cells of an emitted CSV, keyed like ResultsTable.cells."""
    lines = [line for line in text.splitlines() if line]
    columns = lines[0].split(",")
    tasks = [c[: -len(" mean")] for c in columns if c.endswith(" mean")]
    cells, sums = {}, {}
    for line in lines[1:]:
        parts = line.split(",")
        solver = parts[0]
        for i, task in enumerate(tasks):
            mean, std, n = parts[1 + 3 * i : 4 + 3 * i]
            if mean:
                cells[(solver, task)] = (float(mean), float(std), int(n))
        sums[solver] = float(parts[-1])
    return {"cells": cells, "sums": sums}


def collect_records(run_dirs) -> list[dict]:
    """Summaries of finished runs under one or more directory trees."""
    records = []
    for root in run_dirs:
        for summary_path in sorted(Path(root).rglob("summary.json")):
            doc = read_summary(summary_path.parent)
            records.append(doc)
    return records


@dataclass
class BruteForceReport:
    max_score: float
    argmax_count: int
    histogram: np.ndarray
    bin_edges: np.ndarray
    n_enumerated: int


def brute_force(problem_config, seed: int, bound: int = 10**6,
                batch: int = 65536) -> BruteForceReport:
    """Exhaustively enumerate the search space against the oracle."""
    oracle = build_oracle(problem_config, seed)
    size, L = oracle.alphabet.size, oracle.sequence_length
    total = size**L
    if total > bound:
        raise InstanceTooLarge(f"|A|^L = {total} exceeds bound {bound}")
    hist = np.zeros(20, dtype=np.int64)
    edges = np.linspace(0.0, 1.0, 21)
    max_score, argmax_count = -np.inf, 0
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total))
        X = np.stack(np.unravel_index(idx, (size,) * L), axis=1).astype(np.int64)
        scores = oracle.score_batch(X)
        hist += np.histogram(scores, bins=edges)[0]
        chunk_max = scores.max()
        if chunk_max > max_score:
            max_score, argmax_count = float(chunk_max), int((scores == chunk_max).sum())
        elif chunk_max == max_score:
            argmax_count += int((scores == chunk_max).sum())
    return BruteForceReport(max_score, argmax_count, hist, edges, total)


def optimum_report(problem_config, seed: int) -> tuple[str, float]:
    oracle = build_oracle(problem_config, seed)
    best = construct_optimum(oracle)
    return oracle.alphabet.render(best), oracle.score(best)
