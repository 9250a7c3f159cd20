"""Solver registry and the shared campaign bookkeeping.

Every solver is a function `solve(handle, config, **hyperparams)`
returning a `SolveResult`. Solvers see only the black-box handle: the
alphabet, the sequence length, scores, and the remaining budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..core import BlackBoxHandle
from ..errors import UnknownSolver
from ..rng import stream_rng


@dataclass
class SolverRunConfig:
    seed: int
    budget: int
    init_data: list = field(default_factory=list)


@dataclass
class SolveResult:
    best_sequence: np.ndarray
    best_score: float
    trajectory: np.ndarray  # best-so-far after each charged call
    n_calls: int


class Campaign:
    """Tracks the incumbent and per-call best-so-far trajectory."""

    def __init__(self, handle: BlackBoxHandle, config: SolverRunConfig, name: str):
        self.handle = handle
        self.rng = stream_rng(config.seed, f"solver/{name}")
        self.best_sequence: Optional[np.ndarray] = None
        self.best_score = -np.inf
        self.trajectory: list[float] = []
        for seq, score in config.init_data:
            if score > self.best_score:
                self.best_score, self.best_sequence = float(score), np.asarray(seq)

    @property
    def remaining(self) -> int:
        return self.handle.remaining_budget()

    def evaluate(self, batch) -> list[float]:
        """Charge a batch (pre-shrunk to the remaining budget) and track bests."""
        scores = self.handle.evaluate(batch)
        for seq, score in zip(batch, scores):
            if score > self.best_score:
                self.best_score, self.best_sequence = score, np.asarray(seq)
            self.trajectory.append(self.best_score)
        return scores

    def random_sequence(self) -> np.ndarray:
        info = self.handle.info
        return self.rng.integers(
            0, info.alphabet.size, size=info.sequence_length
        ).astype(np.int64)

    def result(self) -> SolveResult:
        if self.best_sequence is None:
            raise RuntimeError("campaign ended with no evaluations and no init data")
        return SolveResult(
            best_sequence=self.best_sequence,
            best_score=self.best_score,
            trajectory=np.asarray(self.trajectory),
            n_calls=len(self.trajectory),
        )


_SOLVERS: dict[str, Callable] = {}
_DEFAULTS: dict[str, dict] = {}


def register_solver(name: str, fn: Callable, defaults: Optional[dict] = None) -> None:
    _SOLVERS[name] = fn
    _DEFAULTS[name] = dict(defaults or {})


def get_solver(name: str) -> Callable:
    try:
        return _SOLVERS[name]
    except KeyError:
        raise UnknownSolver(
            f"unknown solver {name!r}; registered: {', '.join(solver_names())}"
        ) from None


def solver_defaults(name: str) -> dict:
    get_solver(name)
    return dict(_DEFAULTS[name])


def solver_names() -> tuple[str, ...]:
    return tuple(sorted(_SOLVERS))


from . import baseline as _baseline  # noqa: E402,F401  (registration side effects)
from . import bo as _bo  # noqa: E402,F401
