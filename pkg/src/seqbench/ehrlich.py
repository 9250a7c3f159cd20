"""Procedural generation and scoring of Ehrlich oracles.

An instance is generated from a seed in three steps: an ergodic sparse
transition matrix over the alphabet, motifs sampled as one Markov-chain
walk split into pieces, and spaced offset patterns for each motif. A
sequence scores the product over motifs of its quantized best partial
match, gated by chain feasibility, so the known optimum is exactly 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import (
    Alphabet,
    BlackBoxHandle,
    ProblemInfo,
    register_problem,
)
from .errors import InfeasibleConfig
from .rng import stream_rng

_OPTIMUM_RETRIES = 32


@dataclass
class TransitionMatrix:
    """Row-stochastic matrix whose support graph is ergodic."""

    probs: np.ndarray
    achieved_sparsity: float = 0.0

    @property
    def support(self) -> np.ndarray:
        return self.probs > 0.0

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    def validate(self) -> None:
        p = self.probs
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("transition matrix must be square")
        if not np.allclose(p.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("rows must sum to 1")
        if not (np.diag(p) > 0).all():
            raise ValueError("every self-transition must have positive probability")
        if not _strongly_connected(self.support):
            raise ValueError("support graph must be strongly connected")


@dataclass
class SpacedMotif:
    """Motif symbols plus the offsets (relative to an anchor) they must occupy."""

    symbols: np.ndarray
    offsets: np.ndarray

    @property
    def length(self) -> int:
        return len(self.symbols)

    @property
    def span(self) -> int:
        return int(self.offsets[-1]) + 1


def _strongly_connected(support: np.ndarray) -> bool:
    n_comp, _ = connected_components(
        csr_matrix(support), directed=True, connection="strong"
    )
    return n_comp == 1


def generate_transition_matrix(
    alphabet_size: int, sparsity: float, rng: np.random.Generator
) -> TransitionMatrix:
    """Sparse ergodic transition matrix over `alphabet_size` symbols.

    Starts from dense per-row Dirichlet(1) weights, zeroes a `sparsity`
    fraction of off-diagonal entries, then restores entries one at a
    time until the support graph is strongly connected again. The
    achieved off-diagonal sparsity is recorded on the result.
    """
    if alphabet_size < 2:
        raise ValueError("alphabet_size must be >= 2")
    if not 0.0 <= sparsity < 1.0:
        raise ValueError("sparsity must lie in [0, 1)")
    n = alphabet_size
    weights = rng.dirichlet(np.ones(n), size=n)
    off_rows, off_cols = np.nonzero(~np.eye(n, dtype=bool))
    n_off = off_rows.size
    n_zero = int(round(sparsity * n_off))
    removal = rng.permutation(n_off)
    mask = np.ones((n, n), dtype=bool)
    mask[off_rows[removal[:n_zero]], off_cols[removal[:n_zero]]] = False
    # Put entries back (most recently removed first) until ergodic again.
    restore = list(removal[:n_zero])
    while not _strongly_connected(mask):
        k = restore.pop()
        mask[off_rows[k], off_cols[k]] = True
    probs = np.where(mask, weights, 0.0)
    probs /= probs.sum(axis=1, keepdims=True)
    achieved = 1.0 - (mask.sum() - n) / n_off
    matrix = TransitionMatrix(probs, achieved_sparsity=float(achieved))
    matrix.validate()
    return matrix


def sample_chain(
    matrix: TransitionMatrix, length: int, rng: np.random.Generator
) -> np.ndarray:
    """One random walk of the chain: uniform start, then row transitions."""
    return sample_chain_batch(matrix, length, 1, rng)[0]


def sample_chain_batch(
    matrix: TransitionMatrix, length: int, count: int, rng: np.random.Generator
) -> np.ndarray:
    """`count` independent walks as a (count, length) index matrix."""
    if length < 1:
        raise ValueError("length must be >= 1")
    cum = np.cumsum(matrix.probs, axis=1)
    out = np.empty((count, length), dtype=np.int64)
    out[:, 0] = rng.integers(0, matrix.size, size=count)
    for j in range(1, length):
        u = rng.random(count)
        out[:, j] = (u[:, None] > cum[out[:, j - 1]]).sum(axis=1)
    return out


def sample_motifs(
    matrix: TransitionMatrix,
    n_motifs: int,
    motif_length: int,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Split one walk of length n_motifs*motif_length into motif symbol runs."""
    if n_motifs < 1 or motif_length < 1:
        raise ValueError("n_motifs and motif_length must be >= 1")
    chain = sample_chain(matrix, n_motifs * motif_length, rng)
    return [chain[i * motif_length : (i + 1) * motif_length] for i in range(n_motifs)]


def sample_spacings(
    motif_length: int, window: int, rng: np.random.Generator
) -> np.ndarray:
    """Random offsets for one motif inside a window of positions.

    The total span is drawn uniformly from [motif_length, window] (the
    slack-maximizing bias), then the gaps between consecutive offsets are
    drawn uniformly from the compositions of span-1 into positive parts.
    """
    if window < motif_length:
        raise InfeasibleConfig(
            f"window of {window} positions cannot hold a motif of length {motif_length}"
        )
    if motif_length == 1:
        return np.zeros(1, dtype=np.int64)
    span = int(rng.integers(motif_length, window + 1))
    total = span - 1
    n_gaps = motif_length - 1
    # Compositions of `total` into `n_gaps` positive parts <-> cut points.
    cuts = np.sort(rng.choice(np.arange(1, total), size=n_gaps - 1, replace=False))
    bounds = np.concatenate(([0], cuts, [total]))
    gaps = np.diff(bounds)
    offsets = np.concatenate(([0], np.cumsum(gaps)))
    return offsets.astype(np.int64)


def is_feasible(seq: np.ndarray, matrix: TransitionMatrix) -> bool:
    """True iff every adjacent pair of the sequence is a supported transition."""
    seq = np.asarray(seq, dtype=np.int64)
    if seq.size < 2:
        return True
    return bool(matrix.support[seq[:-1], seq[1:]].all())


def motif_satisfaction(seq: np.ndarray, motif: SpacedMotif, quantization: int) -> float:
    """Quantized best partial match of the motif over all anchors."""
    seq = np.asarray(seq, dtype=np.int64)
    n_anchor = seq.size - motif.span + 1
    if n_anchor <= 0:
        return 0.0
    anchors = np.arange(n_anchor)
    hits = seq[anchors[:, None] + motif.offsets[None, :]] == motif.symbols
    best = int(hits.sum(axis=1).max())
    return (best * quantization // motif.length) / quantization


@dataclass
class EhrlichOracle:
    """Immutable problem instance; scoring is a pure function."""

    alphabet: Alphabet
    sequence_length: int
    matrix: TransitionMatrix
    motifs: list[SpacedMotif]
    quantization: int
    seed: Optional[int] = None
    requested_sparsity: float = 0.5
    name: str = "ehrlich"

    def info(self) -> ProblemInfo:
        return ProblemInfo(
            name=self.name,
            alphabet=self.alphabet,
            sequence_length=self.sequence_length,
            deterministic=True,
            known_optimum=1.0,
        )

    def score(self, seq: np.ndarray) -> float:
        return float(self.score_batch(np.asarray(seq, dtype=np.int64)[None, :])[0])

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        """Scores for a (n, L) batch of sequences."""
        X = np.asarray(X, dtype=np.int64)
        feasible = (
            matrixwise_feasible(X, self.matrix)
            if X.shape[1] > 1
            else np.ones(X.shape[0], dtype=bool)
        )
        scores = np.ones(X.shape[0], dtype=np.float64)
        q = self.quantization
        for motif in self.motifs:
            n_anchor = self.sequence_length - motif.span + 1
            anchors = np.arange(n_anchor)
            idx = anchors[:, None] + motif.offsets[None, :]
            hits = X[:, idx] == motif.symbols
            best = hits.sum(axis=2).max(axis=1)
            scores *= (best * q // motif.length) / q
        scores[~feasible] = 0.0
        return scores

    def metadata(self) -> dict:
        """Self-describing document sufficient to rebuild this oracle exactly."""
        return {
            "family": self.name,
            "seed": self.seed,
            "tokens": list(self.alphabet.tokens),
            "alphabet_size": self.alphabet.size,
            "sequence_length": self.sequence_length,
            "n_motifs": len(self.motifs),
            "motif_length": self.motifs[0].length,
            "quantization": self.quantization,
            "sparsity": self.requested_sparsity,
            "achieved_sparsity": self.matrix.achieved_sparsity,
            "window_policy": "equal-partition-remainder-last",
            "transition_probs": self.matrix.probs.tolist(),
            "motif_symbols": [m.symbols.tolist() for m in self.motifs],
            "motif_offsets": [m.offsets.tolist() for m in self.motifs],
        }

    @classmethod
    def from_metadata(cls, doc: dict) -> "EhrlichOracle":
        matrix = TransitionMatrix(
            np.asarray(doc["transition_probs"], dtype=np.float64),
            achieved_sparsity=doc.get("achieved_sparsity", 0.0),
        )
        motifs = [
            SpacedMotif(np.asarray(s, dtype=np.int64), np.asarray(o, dtype=np.int64))
            for s, o in zip(doc["motif_symbols"], doc["motif_offsets"])
        ]
        return cls(
            alphabet=Alphabet(doc["tokens"]),
            sequence_length=int(doc["sequence_length"]),
            matrix=matrix,
            motifs=motifs,
            quantization=int(doc["quantization"]),
            seed=doc.get("seed"),
            requested_sparsity=doc.get("sparsity", 0.5),
            name=doc.get("family", "ehrlich"),
        )


def matrixwise_feasible(X: np.ndarray, matrix: TransitionMatrix) -> np.ndarray:
    return matrix.support[X[:, :-1], X[:, 1:]].all(axis=1)


def ehrlich_score(seq: np.ndarray, oracle: EhrlichOracle) -> float:
    return oracle.score(seq)


def motif_windows(sequence_length: int, n_motifs: int) -> list[tuple[int, int]]:
    """Contiguous equal windows (start, width); the remainder widens the last."""
    base = sequence_length // n_motifs
    windows = []
    for i in range(n_motifs):
        start = i * base
        width = base if i < n_motifs - 1 else sequence_length - start
        windows.append((start, width))
    return windows


def construct_optimum(oracle: EhrlichOracle) -> np.ndarray:
    """A feasible sequence scoring exactly 1.0.

    Each motif is anchored at the start of its window; free positions
    repeat the previous symbol (positive by the self-loop invariant)
    until hopping to the next planted symbol, which is reachable in one
    step because consecutive planted symbols are consecutive in the
    generating walk.
    """
    L = oracle.sequence_length
    seq = np.full(L, -1, dtype=np.int64)
    windows = motif_windows(L, len(oracle.motifs))
    for (start, width), motif in zip(windows, oracle.motifs):
        if motif.span > width:
            raise InfeasibleConfig("motif span exceeds its window")
        seq[start + motif.offsets] = motif.symbols
    fixed = np.flatnonzero(seq >= 0)
    seq[: fixed[0]] = seq[fixed[0]]
    for pos, nxt in zip(fixed[:-1], fixed[1:]):
        if not oracle.matrix.support[seq[pos], seq[nxt]]:
            raise InfeasibleConfig("planted symbols are not chain-adjacent")
        seq[pos + 1 : nxt] = seq[pos]
    seq[fixed[-1] :] = seq[fixed[-1]]
    if not is_feasible(seq, oracle.matrix) or oracle.score(seq) != 1.0:
        raise InfeasibleConfig("constructed optimum does not reach 1.0")
    return seq


def sample_initial_dataset(
    oracle: EhrlichOracle, n: int, rng: np.random.Generator
) -> list[tuple[np.ndarray, float]]:
    """n feasible chain samples of full length, each scored once."""
    if n == 0:
        return []
    X = sample_chain_batch(oracle.matrix, oracle.sequence_length, n, rng)
    y = oracle.score_batch(X)
    return [(X[i], float(y[i])) for i in range(n)]


def generate_oracle(
    alphabet: Alphabet,
    sequence_length: int,
    n_motifs: int,
    motif_length: int,
    rng: np.random.Generator,
    quantization: Optional[int] = None,
    sparsity: float = 0.5,
    seed: Optional[int] = None,
    name: str = "ehrlich",
) -> EhrlichOracle:
    """Run the three generation steps and verify an optimum exists."""
    windows = motif_windows(sequence_length, n_motifs)
    base_window = sequence_length // n_motifs
    if base_window < motif_length:
        raise InfeasibleConfig(
            f"{n_motifs} motifs of length {motif_length} do not fit in "
            f"sequence length {sequence_length}"
        )
    matrix = generate_transition_matrix(alphabet.size, sparsity, rng)
    symbol_runs = sample_motifs(matrix, n_motifs, motif_length, rng)
    q = motif_length if quantization is None else quantization
    last_error: Optional[Exception] = None
    for _ in range(_OPTIMUM_RETRIES):
        # Spans are sampled within the base window so n_motifs * max span
        # never exceeds the sequence length.
        motifs = [
            SpacedMotif(run, sample_spacings(motif_length, base_window, rng))
            for run in symbol_runs
        ]
        oracle = EhrlichOracle(
            alphabet=alphabet,
            sequence_length=sequence_length,
            matrix=matrix,
            motifs=motifs,
            quantization=q,
            seed=seed,
            requested_sparsity=sparsity,
            name=name,
        )
        try:
            construct_optimum(oracle)
            return oracle
        except InfeasibleConfig as exc:  # pragma: no cover - safety net
            last_error = exc
    raise InfeasibleConfig(f"no satisfiable spacing found: {last_error}")


@dataclass
class EhrlichConfig:
    """Parameters of the `ehrlich` problem family."""

    sequence_length: int
    n_motifs: int
    motif_length: int
    alphabet_size: int = 20
    quantization: Optional[int] = None
    sparsity: float = 0.5
    n_init: int = 10
    budget: int = 300
    family: str = "ehrlich"

    def problem_name(self) -> str:
        return (
            f"ehrlich-A{self.alphabet_size}-L{self.sequence_length}"
            f"-m{self.n_motifs}x{self.motif_length}"
        )


@dataclass
class PestControlEquivConfig:
    """PestControl equivalent: |A|=5, L=25, one motif of length 25."""

    quantization: Optional[int] = None
    sparsity: float = 0.5
    n_init: int = 10
    budget: int = 300
    family: str = "pest_control_equiv"
    alphabet_size: int = field(default=5, init=False)
    sequence_length: int = field(default=25, init=False)
    n_motifs: int = field(default=1, init=False)
    motif_length: int = field(default=25, init=False)

    def problem_name(self) -> str:
        return "pest_control_equiv"


def build_oracle(config, seed: int) -> EhrlichOracle:
    """Oracle for an ehrlich-family config, deterministic in (config, seed)."""
    alphabet = (
        Alphabet.amino_acids()
        if config.alphabet_size == 20
        else Alphabet.generic(config.alphabet_size)
    )
    return generate_oracle(
        alphabet=alphabet,
        sequence_length=config.sequence_length,
        n_motifs=config.n_motifs,
        motif_length=config.motif_length,
        rng=stream_rng(seed, "problem"),
        quantization=config.quantization,
        sparsity=config.sparsity,
        seed=seed,
        name=config.problem_name(),
    )


def _ehrlich_family(config, seed: int, observer=None, clock=None):
    oracle = build_oracle(config, seed)
    if callable(observer) and not hasattr(observer, "observe_call"):
        # Deferred construction: the caller needs the problem metadata
        # (known only now) to initialize its observer.
        observer = observer(oracle.metadata())
    handle = BlackBoxHandle(
        info=oracle.info(),
        score_batch=oracle.score_batch,
        budget=config.budget,
        init_budget=config.n_init,
        observer=observer,
        metadata=oracle.metadata(),
        clock=clock,
    )
    init_rng = stream_rng(seed, "init")
    init_data: list[tuple[np.ndarray, float]] = []
    if config.n_init > 0:
        X = sample_chain_batch(oracle.matrix, oracle.sequence_length, config.n_init, init_rng)
        scores = handle.evaluate_init(list(X))
        init_data = [(X[i], scores[i]) for i in range(config.n_init)]
    return handle, init_data


register_problem("ehrlich", _ehrlich_family)
register_problem("pest_control_equiv", _ehrlich_family)
