"""Alphabets, sequences and the budgeted black-box evaluation contract.

A sequence is a 1-D integer array of token indices over a finite
alphabet. Black boxes are only reachable through a `BlackBoxHandle`,
which validates inputs, enforces the evaluation budget, appends every
call to an append-only ledger and emits exactly one observer event per
evaluation. Problem instances are built by registered factories via
`create_problem`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence as SequenceT

import numpy as np

from .errors import (
    BudgetExhausted,
    LengthMismatch,
    UnknownProblem,
    UnknownToken,
)

_UPPER = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"

#: The 20 amino acids, the paper-standard alphabet for protein-like tasks.
AMINO_ACIDS = tuple("ACDEFGHIKLMNPQRSTVWY")


class Alphabet:
    """Ordered set of distinct token strings."""

    def __init__(self, tokens: SequenceT[str]):
        tokens = tuple(tokens)
        if len(tokens) < 2:
            raise ValueError("alphabet needs at least 2 tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("alphabet tokens must be unique")
        if any(not t for t in tokens):
            raise ValueError("alphabet tokens must be non-empty")
        self.tokens = tokens
        self.size = len(tokens)
        self._index = {t: i for i, t in enumerate(tokens)}
        self._single_char = all(len(t) == 1 for t in tokens)

    @classmethod
    def generic(cls, size: int) -> "Alphabet":
        """First `size` uppercase letters (size <= 26)."""
        if size > len(_UPPER):
            raise ValueError("generic alphabet supports at most 26 tokens")
        return cls(_UPPER[:size])

    @classmethod
    def amino_acids(cls) -> "Alphabet":
        return cls(AMINO_ACIDS)

    def render(self, seq: np.ndarray) -> str:
        """Token-string rendering used at I/O boundaries."""
        parts = [self.tokens[i] for i in np.asarray(seq, dtype=np.int64)]
        return "".join(parts) if self._single_char else ",".join(parts)

    def parse(self, text: str) -> np.ndarray:
        """Inverse of `render`."""
        parts = list(text) if self._single_char else text.split(",")
        try:
            return np.array([self._index[p] for p in parts], dtype=np.int64)
        except KeyError as exc:
            raise UnknownToken(f"token {exc.args[0]!r} not in alphabet") from None

    def to_tokens(self, seq: np.ndarray) -> list[str]:
        return [self.tokens[i] for i in np.asarray(seq, dtype=np.int64)]

    def from_tokens(self, tokens: SequenceT[str]) -> np.ndarray:
        try:
            return np.array([self._index[t] for t in tokens], dtype=np.int64)
        except KeyError as exc:
            raise UnknownToken(f"token {exc.args[0]!r} not in alphabet") from None

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.tokens == other.tokens

    def __repr__(self) -> str:
        return f"Alphabet({''.join(self.tokens) if self._single_char else self.tokens})"


def as_sequence(seq) -> np.ndarray:
    """Coerce to the canonical 1-D int64 representation."""
    arr = np.asarray(seq, dtype=np.int64)
    if arr.ndim != 1:
        raise LengthMismatch(f"sequence must be 1-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ProblemInfo:
    """What a solver is allowed to know about a black box."""

    name: str
    alphabet: Alphabet
    sequence_length: int
    deterministic: bool = True
    known_optimum: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "tokens": list(self.alphabet.tokens),
            "sequence_length": self.sequence_length,
            "deterministic": self.deterministic,
            "known_optimum": self.known_optimum,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemInfo":
        return cls(
            name=doc["name"],
            alphabet=Alphabet(doc["tokens"]),
            sequence_length=int(doc["sequence_length"]),
            deterministic=bool(doc["deterministic"]),
            known_optimum=doc.get("known_optimum"),
        )


def validate_sequence(seq: np.ndarray, info: ProblemInfo) -> np.ndarray:
    """Check length and index range; returns the canonical array."""
    arr = as_sequence(seq)
    if arr.shape[0] != info.sequence_length:
        raise LengthMismatch(
            f"expected length {info.sequence_length}, got {arr.shape[0]}"
        )
    if arr.size and (arr.min() < 0 or arr.max() >= info.alphabet.size):
        bad = arr[(arr < 0) | (arr >= info.alphabet.size)][0]
        raise UnknownToken(f"index {bad} outside alphabet of size {info.alphabet.size}")
    return arr


@dataclass
class LedgerEntry:
    call_index: int
    sequence: np.ndarray
    score: float
    wall_time_ms: int


class EvaluationLedger:
    """Append-only record of every oracle call, capped by a budget."""

    def __init__(self, budget: int):
        if budget < 0:
            raise ValueError("budget must be nonnegative")
        self.budget = budget
        self.entries: list[LedgerEntry] = []

    @property
    def consumed(self) -> int:
        return len(self.entries)

    @property
    def remaining(self) -> int:
        return self.budget - self.consumed

    def charge(self, n: int) -> None:
        """Reject the whole batch if it does not fit; never partial."""
        if self.consumed + n > self.budget:
            raise BudgetExhausted(
                f"batch of {n} exceeds remaining budget "
                f"{self.budget - self.consumed} of {self.budget}"
            )

    def append(self, sequence: np.ndarray, score: float, wall_time_ms: int) -> LedgerEntry:
        entry = LedgerEntry(self.consumed, sequence.copy(), float(score), wall_time_ms)
        self.entries.append(entry)
        return entry


class BlackBoxHandle:
    """Budgeted, observed evaluation endpoint.

    `evaluate` charges the solver ledger; `evaluate_init` charges a
    separate initialization ledger so supervised seeding never eats into
    the campaign budget. Confined to one logical thread of execution.
    """

    def __init__(
        self,
        info: ProblemInfo,
        score_batch: Callable[[np.ndarray], np.ndarray],
        budget: int,
        init_budget: int = 0,
        observer=None,
        metadata: Optional[dict] = None,
        clock: Optional[Callable[[], float]] = None,
    ):
        self.info = info
        self._score_batch = score_batch
        self.ledger = EvaluationLedger(budget)
        self.init_ledger = EvaluationLedger(init_budget)
        self.observer = observer
        self.metadata = metadata or {}
        self.best_so_far = -np.inf
        self._clock = clock or time.monotonic
        self._t0 = self._clock()

    def _now_ms(self) -> int:
        return int((self._clock() - self._t0) * 1000)

    def remaining_budget(self) -> int:
        return self.ledger.remaining

    def _evaluate(self, batch, ledger: EvaluationLedger, phase: str) -> list[float]:
        seqs = [validate_sequence(s, self.info) for s in batch]
        ledger.charge(len(seqs))
        if not seqs:
            return []
        scores = np.asarray(self._score_batch(np.stack(seqs)), dtype=np.float64)
        out = []
        for seq, score in zip(seqs, scores):
            score = float(score)
            wall = self._now_ms()
            self.best_so_far = max(self.best_so_far, score)
            if self.observer is not None:
                # Fail-closed: if the observer cannot record the call, the
                # call does not count and the ledger stays in sync.
                self.observer.observe_call(
                    sequence=self.info.alphabet.render(seq),
                    score=score,
                    best_so_far=self.best_so_far,
                    wall_time_ms=wall,
                    phase=phase,
                )
            ledger.append(seq, score, wall)
            out.append(score)
        return out

    def evaluate(self, batch) -> list[float]:
        """Score a batch against the solver budget; whole-batch rejection."""
        return self._evaluate(batch, self.ledger, "solve")

    def evaluate_init(self, batch) -> list[float]:
        """Score initialization samples against the init ledger."""
        return self._evaluate(batch, self.init_ledger, "init")


def remaining_budget(handle: BlackBoxHandle) -> int:
    return handle.remaining_budget()


def evaluate(handle: BlackBoxHandle, batch) -> list[float]:
    return handle.evaluate(batch)


_PROBLEM_FAMILIES: dict[str, Callable] = {}


def register_problem(name: str, factory: Callable) -> None:
    _PROBLEM_FAMILIES[name] = factory


def problem_families() -> tuple[str, ...]:
    return tuple(sorted(_PROBLEM_FAMILIES))


def create_problem(config, seed: int, observer=None, clock=None):
    """Build (handle, init_data) for a registered problem family.

    `config` is a family config object with a `family` attribute. The
    same (config, seed) always yields an identical problem and identical
    initial data. Initialization calls are charged to the handle's init
    ledger, not the solver budget.
    """
    try:
        factory = _PROBLEM_FAMILIES[config.family]
    except KeyError:
        raise UnknownProblem(
            f"unknown problem family {config.family!r}; "
            f"registered: {', '.join(problem_families())}"
        ) from None
    return factory(config, seed, observer, clock)
