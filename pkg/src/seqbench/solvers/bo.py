"""Gaussian-process Bayesian optimization over the one-hot relaxation.

Acquisition is Expected Improvement maximized over a discrete candidate
pool (mutations of top incumbents plus uniform random sequences), since
gradient ascent followed by decoding is ill-posed on one-hot space.
Surrogate refits follow a data-size-aware schedule so campaigns at
N>1000, D>1000 stay tractable; between refits the factorization is
simply rebuilt with the previous hyperparameters.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import islice, product

import numpy as np

from ..errors import NumericalError, SearchSpaceExhausted
from ..gp import GPModel, LengthscalePrior, expected_improvement, fit_gp
from ..onehot import one_hot_decode, one_hot_encode
from . import Campaign, SolverRunConfig, SolveResult, register_solver

logger = logging.getLogger(__name__)

_ENUM_LIMIT = 4096  # exhaustive back-fill only on spaces this small


def propose_candidates(
    incumbents: list[np.ndarray],
    rng: np.random.Generator,
    count: int,
    alphabet_size: int,
    sequence_length: int,
    evaluated: set[tuple],
    n_random: int = 64,
) -> np.ndarray:
    """Candidate pool of unevaluated sequences, back-filled after dedup.

    Raises SearchSpaceExhausted when every sequence of the space has
    already been evaluated.
    """
    space = alphabet_size**sequence_length
    if len(evaluated) >= space:
        raise SearchSpaceExhausted("all sequences already evaluated")
    seen = set(evaluated)
    pool: list[np.ndarray] = []
    n_mut = max(count - n_random, 0) if incumbents else 0
    attempts, stall = 0, 50 * count
    while len(pool) < count and attempts < stall:
        attempts += 1
        if len(seen) >= space:
            break
        if len(pool) < n_mut:
            cand = incumbents[rng.integers(len(incumbents))].copy()
            for _ in range(int(rng.integers(1, 3))):  # 1 or 2 positions
                pos = rng.integers(sequence_length)
                tok = rng.integers(alphabet_size - 1)
                cand[pos] = tok + (tok >= cand[pos])
        else:
            cand = rng.integers(0, alphabet_size, size=sequence_length)
        key = tuple(cand.tolist())
        if key not in seen:
            seen.add(key)
            pool.append(cand.astype(np.int64))
    if len(pool) < count and space <= _ENUM_LIMIT:
        for combo in islice(product(range(alphabet_size), repeat=sequence_length), space):
            if len(pool) >= count:
                break
            if combo not in seen:
                seen.add(combo)
                pool.append(np.array(combo, dtype=np.int64))
    if not pool:
        raise SearchSpaceExhausted("no unevaluated sequence could be proposed")
    return np.stack(pool)


class _PairwiseCache:
    """Squared-distance matrix grown one batch at a time."""

    def __init__(self, dim: int):
        self.X = np.empty((0, dim))
        self._sq = np.empty(0)
        self.d2 = np.empty((0, 0))

    def add(self, rows: np.ndarray) -> None:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        sq_new = (rows * rows).sum(axis=1)
        cross = np.maximum(self._sq[:, None] + sq_new[None, :] - 2.0 * self.X @ rows.T, 0.0)
        block = np.maximum(sq_new[:, None] + sq_new[None, :] - 2.0 * rows @ rows.T, 0.0)
        self.d2 = np.block([[self.d2, cross], [cross.T, block]]) if self.d2.size else block
        self.X = np.vstack([self.X, rows])
        self._sq = np.concatenate([self._sq, sq_new])


def _fit_schedule(n: int) -> tuple[int, int, int, int, int, int]:
    """(warm_every, full_every, starts_full, starts_warm, fev_full, fev_warm)."""
    if n <= 400:
        return 1, 20, 16, 3, 120, 60
    if n <= 900:
        return 5, 50, 8, 2, 80, 50
    return 10, 100, 4, 2, 60, 40


class _Surrogate:
    """Refit scheduler; keeps the last hyperparameters between refits."""

    def __init__(self, prior: LengthscalePrior):
        self.prior = prior
        self.hyper = None
        self.iters = 0

    def fit(self, X: np.ndarray, y: np.ndarray, d2=None) -> GPModel:
        self.iters += 1
        warm_every, full_every, ns_full, ns_warm, fev_full, fev_warm = _fit_schedule(len(y))
        if self.hyper is None or self.iters % full_every == 0:
            model = fit_gp(X, y, self.prior, n_starts=ns_full, max_fev=fev_full,
                           warm_start=self.hyper, d2=d2)
        elif self.iters % warm_every == 0:
            model = fit_gp(X, y, self.prior, n_starts=ns_warm, max_fev=fev_warm,
                           warm_start=self.hyper, d2=d2)
        else:
            return GPModel(X, y, self.hyper, d2=d2)
        self.hyper = model.hyper
        return model


def _top_sequences(seqs: list[np.ndarray], scores: list[float], k: int) -> list[np.ndarray]:
    order = np.argsort(-np.asarray(scores))[:k]
    return [seqs[i] for i in order]


def vanilla_bo_solve(
    handle,
    config: SolverRunConfig,
    pool_size: int = 512,
    n_random: int = 64,
    top_k: int = 8,
    xi: float = 0.0,
    prior_offset: float = 0.0,
    prior_scale: float = 1.0,
) -> SolveResult:
    """EI over a candidate pool under a dimension-scaled lengthscale prior."""
    run = Campaign(handle, config, "vanilla_bo")
    info = handle.info
    size, L = info.alphabet.size, info.sequence_length
    dim = size * L
    prior = LengthscalePrior.for_dimension(dim, offset=prior_offset, scale=prior_scale)
    surrogate = _Surrogate(prior)
    cache = _PairwiseCache(dim)

    seqs = [np.asarray(s) for s, _ in config.init_data]
    scores = [float(y) for _, y in config.init_data]
    evaluated = {tuple(s.tolist()) for s in seqs}
    if seqs:
        cache.add(np.stack([one_hot_encode(s, info.alphabet) for s in seqs]))
    while run.remaining > 0 and len(seqs) < 2:
        cand = run.random_sequence()
        if tuple(cand.tolist()) in evaluated:
            continue
        y = run.evaluate([cand])[0]
        seqs.append(cand), scores.append(y)
        evaluated.add(tuple(cand.tolist()))
        cache.add(one_hot_encode(cand, info.alphabet))

    while run.remaining > 0:
        try:
            pool = propose_candidates(
                _top_sequences(seqs, scores, top_k), run.rng, pool_size,
                size, L, evaluated, n_random,
            )
        except SearchSpaceExhausted:
            break
        try:
            model = surrogate.fit(cache.X, np.asarray(scores), d2=cache.d2)
            mean, var = model.posterior(
                np.stack([one_hot_encode(s, info.alphabet) for s in pool])
            )
            ei = expected_improvement(mean, var, run.best_score, xi)
            choice = pool[int(np.argmax(ei))]
        except NumericalError as exc:
            logger.warning("surrogate fit failed (%s); random step", exc)
            choice = pool[int(run.rng.integers(len(pool)))]
        y = run.evaluate([choice])[0]
        seqs.append(choice), scores.append(y)
        evaluated.add(tuple(choice.tolist()))
        cache.add(one_hot_encode(choice, info.alphabet))
    return run.result()


@dataclass
class TrustRegionState:
    """Side length plus success/failure bookkeeping of one trust region."""

    center: np.ndarray
    side_length: float = 0.8
    success_count: int = 0
    failure_count: int = 0
    success_tolerance: int = 3
    failure_tolerance: int = 4
    side_min: float = 0.5**7
    side_max: float = 1.6

    @property
    def needs_restart(self) -> bool:
        return self.side_length < self.side_min


def turbo_update(state: TrustRegionState, improved: bool) -> TrustRegionState:
    """Expand on enough successes, halve on enough failures; reset counters."""
    if improved:
        state.success_count += 1
        state.failure_count = 0
    else:
        state.failure_count += 1
        state.success_count = 0
    if state.success_count >= state.success_tolerance:
        state.side_length = min(2.0 * state.side_length, state.side_max)
        state.success_count = state.failure_count = 0
    elif state.failure_count >= state.failure_tolerance:
        state.side_length /= 2.0
        state.success_count = state.failure_count = 0
    return state


def turbo_solve(
    handle,
    config: SolverRunConfig,
    pool_size: int = 512,
    xi: float = 0.0,
    side_init: float = 0.8,
    side_min: float = 0.5**7,
    side_max: float = 1.6,
    success_tolerance: int = 3,
    failure_tolerance: int | None = None,
    min_region_points: int = 10,
    prior_offset: float = 0.0,
    prior_scale: float = 1.0,
) -> SolveResult:
    """Trust-region BO around the incumbent.

    Candidates keep most coordinates at the center and resample a random
    subset whose expected size shrinks with the region side, so
    contraction localizes the search even though one-hot vertices sit
    farther apart than any sub-unit box reaches.
    """
    run = Campaign(handle, config, "turbo")
    info = handle.info
    size, L = info.alphabet.size, info.sequence_length
    dim = size * L
    if failure_tolerance is None:
        failure_tolerance = max(4, math.ceil(dim))
    prior = LengthscalePrior.for_dimension(dim, offset=prior_offset, scale=prior_scale)
    surrogate = _Surrogate(prior)
    cache = _PairwiseCache(dim)
    base_perturb = min(20.0 / dim, 1.0)

    ys: list[float] = [float(y) for _, y in config.init_data]
    if config.init_data:
        cache.add(np.stack([one_hot_encode(s, info.alphabet) for s, _ in config.init_data]))
    while run.remaining > 0 and len(ys) < 2:
        cand = run.random_sequence()
        ys.append(run.evaluate([cand])[0])
        cache.add(one_hot_encode(cand, info.alphabet))
    if not ys:
        return run.result()

    center = cache.X[int(np.argmax(ys))].copy()
    state = TrustRegionState(
        center=center, side_length=side_init,
        success_tolerance=success_tolerance, failure_tolerance=failure_tolerance,
        side_min=side_min, side_max=side_max,
    )
    while run.remaining > 0:
        if state.needs_restart:
            fresh = run.random_sequence()
            y = run.evaluate([fresh])[0]
            ys.append(y)
            cache.add(one_hot_encode(fresh, info.alphabet))
            state = TrustRegionState(
                center=one_hot_encode(fresh, info.alphabet), side_length=side_init,
                success_tolerance=success_tolerance, failure_tolerance=failure_tolerance,
                side_min=side_min, side_max=side_max,
            )
            continue
        half = state.side_length / 2.0
        inside = np.flatnonzero(np.abs(cache.X - state.center).max(axis=1) <= half)
        use_all = inside.size < min_region_points
        idx = np.arange(len(ys)) if use_all else inside
        X_fit = cache.X[idx]
        y_fit = np.asarray(ys)[idx]
        d2_fit = cache.d2[np.ix_(idx, idx)]

        p = min(1.0, base_perturb * state.side_length / 0.8)
        mask = run.rng.random((pool_size, dim)) < p
        mask[~mask.any(axis=1), run.rng.integers(dim)] = True
        cand_X = np.where(mask, run.rng.random((pool_size, dim)), state.center)
        try:
            model = surrogate.fit(X_fit, y_fit, d2=d2_fit)
            mean, var = model.posterior(cand_X)
            ei = expected_improvement(mean, var, run.best_score, xi)
            pick = cand_X[int(np.argmax(ei))]
        except NumericalError as exc:
            logger.warning("surrogate fit failed (%s); random step", exc)
            pick = cand_X[int(run.rng.integers(pool_size))]
        prev_best = run.best_score
        y = run.evaluate([one_hot_decode(pick, info.alphabet)])[0]
        ys.append(y)
        cache.add(pick)
        improved = y > prev_best
        if improved:
            state.center = pick.copy()
        turbo_update(state, improved)
    return run.result()


def random_line_bo_solve(
    handle,
    config: SolverRunConfig,
    line_steps: int = 10,
    grid_size: int = 257,
    xi: float = 0.0,
) -> SolveResult:
    """1-D BO along random directions through the incumbent.

    The line is parameterized as x* + t*sqrt(D)*d for t in [-1, 1] with d
    a uniform unit direction; the sqrt(D) scale makes block flips
    reachable from one-hot vertices. t=0 is always evaluated first.
    """
    run = Campaign(handle, config, "random_line_bo")
    info = handle.info
    dim = info.alphabet.size * info.sequence_length
    scale = math.sqrt(dim)
    prior = LengthscalePrior.for_dimension(1)
    if run.best_sequence is None and run.remaining > 0:
        run.evaluate([run.random_sequence()])
    x_star = one_hot_encode(run.best_sequence, info.alphabet)
    grid = np.linspace(-1.0, 1.0, grid_size)

    while run.remaining > 0:
        d = run.rng.standard_normal(dim)
        d /= np.linalg.norm(d)

        def point(t: float) -> np.ndarray:
            return np.clip(x_star + t * scale * d, 0.0, 1.0)

        ts = [0.0]
        ys = [run.evaluate([one_hot_decode(point(0.0), info.alphabet)])[0]]
        for _ in range(line_steps):
            if run.remaining <= 0:
                break
            if len(ts) >= 2 and np.ptp(ys) > 0:
                try:
                    model = fit_gp(
                        np.asarray(ts)[:, None], np.asarray(ys), prior,
                        n_starts=4, max_fev=60,
                    )
                    mean, var = model.posterior(grid[:, None])
                    ei = expected_improvement(mean, var, max(ys), xi)
                    t = float(grid[int(np.argmax(ei))])
                except NumericalError:
                    t = float(run.rng.uniform(-1.0, 1.0))
            else:
                t = float(run.rng.uniform(-1.0, 1.0))
            ts.append(t)
            ys.append(run.evaluate([one_hot_decode(point(t), info.alphabet)])[0])
        best_line = int(np.argmax(ys))
        if ys[best_line] > ys[0]:
            x_star = point(ts[best_line])
    return run.result()


register_solver(
    "vanilla_bo",
    vanilla_bo_solve,
    {"pool_size": 512, "n_random": 64, "top_k": 8, "xi": 0.0,
     "prior_offset": 0.0, "prior_scale": 1.0},
)
register_solver(
    "turbo",
    turbo_solve,
    {"pool_size": 512, "xi": 0.0, "side_init": 0.8, "side_min": 0.5**7,
     "side_max": 1.6, "success_tolerance": 3, "failure_tolerance": None,
     "min_region_points": 10, "prior_offset": 0.0, "prior_scale": 1.0},
)
register_solver(
    "random_line_bo",
    random_line_bo_solve,
    {"line_steps": 10, "grid_size": 257, "xi": 0.0},
)
