"""Structured run logging: one JSON document of metadata, one JSONL
event per oracle call, one summary document.

The file observer fails closed: if an event cannot be appended, the
triggering evaluation does not count, so the event stream and the
evaluation ledger can never diverge.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import IoError

EVENTS_FILE = "events.jsonl"
METADATA_FILE = "metadata.json"
SUMMARY_FILE = "summary.json"


@dataclass
class RunMetadata:
    """Everything needed to reconstruct a run's configuration."""

    problem: dict
    solver: str
    solver_params: dict
    seed: int
    budget: int
    n_init: int
    artifact_version: str
    started: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S"))

    def as_dict(self) -> dict:
        return {
            "problem": self.problem,
            "solver": self.solver,
            "solver_params": self.solver_params,
            "seed": self.seed,
            "budget": self.budget,
            "n_init": self.n_init,
            "artifact_version": self.artifact_version,
            "started": self.started,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunMetadata":
        return cls(**{k: doc[k] for k in (
            "problem", "solver", "solver_params", "seed", "budget",
            "n_init", "artifact_version", "started",
        )})


@dataclass
class ObservationEvent:
    call_index: int
    phase: str
    sequence: str
    score: float
    best_so_far: float
    wall_time_ms: int

    def as_dict(self) -> dict:
        return {
            "call_index": self.call_index,
            "phase": self.phase,
            "sequence": self.sequence,
            "score": self.score,
            "best_so_far": self.best_so_far,
            "wall_time_ms": self.wall_time_ms,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ObservationEvent":
        # Unknown fields are ignored for forward compatibility.
        return cls(
            call_index=int(doc["call_index"]),
            phase=str(doc["phase"]),
            sequence=str(doc["sequence"]),
            score=float(doc["score"]),
            best_so_far=float(doc["best_so_far"]),
            wall_time_ms=int(doc["wall_time_ms"]),
        )


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class FileObserver:
    """Append-only observer writing the run-directory layout."""

    def __init__(self, run_dir):
        self.run_dir = Path(run_dir)
        self._events = None
        self._finalized = False
        self._n_events = 0

    def initialize(self, metadata: RunMetadata) -> "FileObserver":
        meta_path = self.run_dir / METADATA_FILE
        if meta_path.exists():
            raise IoError(f"{meta_path} already initialized; refusing to overwrite")
        try:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            meta_path.write_text(_dump(metadata.as_dict()) + "\n")
            self._events = open(self.run_dir / EVENTS_FILE, "w", encoding="utf-8")
        except OSError as exc:
            raise IoError(str(exc)) from exc
        return self

    def observe_call(self, sequence: str, score: float, best_so_far: float,
                     wall_time_ms: int, phase: str) -> None:
        if self._events is None or self._finalized:
            raise IoError("observer not initialized or already finalized")
        event = ObservationEvent(
            call_index=self._n_events, phase=phase, sequence=sequence,
            score=score, best_so_far=best_so_far, wall_time_ms=wall_time_ms,
        )
        try:
            self._events.write(_dump(event.as_dict()) + "\n")
            self._events.flush()
        except OSError as exc:
            raise IoError(str(exc)) from exc
        self._n_events += 1

    def finalize(self, best_score: float, total_calls: int, init_calls: int = 0,
                 duration_ms: Optional[int] = None,
                 extra: Optional[dict] = None) -> dict:
        if self._finalized:
            raise IoError("finalize called twice")
        if self._events is None:
            raise IoError("observer was never initialized")
        summary = {
            "best_score": best_score,
            "total_calls": total_calls,
            "init_calls": init_calls,
            "n_events": self._n_events,
            "duration_ms": duration_ms,
            "ended": time.strftime("%Y-%m-%dT%H:%M:%S"),
            **(extra or {}),
        }
        try:
            self._events.close()
            (self.run_dir / SUMMARY_FILE).write_text(_dump(summary) + "\n")
        except OSError as exc:
            raise IoError(str(exc)) from exc
        self._finalized = True
        return summary


def initialize_observer(metadata: RunMetadata, run_dir) -> FileObserver:
    return FileObserver(run_dir).initialize(metadata)


def read_metadata(run_dir) -> RunMetadata:
    return RunMetadata.from_dict(
        json.loads((Path(run_dir) / METADATA_FILE).read_text())
    )


def read_summary(run_dir) -> dict:
    return json.loads((Path(run_dir) / SUMMARY_FILE).read_text())


def read_events(run_dir, tolerate_partial_last: bool = True) -> list[ObservationEvent]:
    """Parse the event stream; a partial trailing line is dropped on request."""
    raw = (Path(run_dir) / EVENTS_FILE).read_bytes().decode("utf-8")
    events = []
    lines = raw.split("\n")
    complete, tail = lines[:-1], lines[-1]
    if tail and not tolerate_partial_last:
        raise IoError("event stream ends mid-line")
    for line in complete:
        if line:
            events.append(ObservationEvent.from_dict(json.loads(line)))
    return events
