"""Non-GP reference solvers: directed evolution, hill climbing over
one-hot space, a generational genetic algorithm, and CMA-ES."""

from __future__ import annotations

import math

import numpy as np

from ..onehot import one_hot_decode, one_hot_encode
from . import Campaign, SolverRunConfig, SolveResult, register_solver


def _mutate_one(seq: np.ndarray, rng: np.random.Generator, alphabet_size: int) -> np.ndarray:
    out = seq.copy()
    pos = rng.integers(seq.size)
    tok = rng.integers(alphabet_size - 1)
    out[pos] = tok + (tok >= seq[pos])
    return out


def directed_evolution_solve(handle, config: SolverRunConfig) -> SolveResult:
    """Greedily mutate the incumbent, one position per call."""
    run = Campaign(handle, config, "directed_evolution")
    size = handle.info.alphabet.size
    if run.best_sequence is None and run.remaining > 0:
        run.evaluate([run.random_sequence()])
    incumbent, inc_score = run.best_sequence, run.best_score
    while run.remaining > 0:
        cand = _mutate_one(incumbent, run.rng, size)
        score = run.evaluate([cand])[0]
        if score > inc_score:
            incumbent, inc_score = cand, score
    return run.result()


def hill_climbing_solve(handle, config: SolverRunConfig, step_sigma: float = 0.25) -> SolveResult:
    """Random Gaussian steps on the one-hot relaxation, greedy accept."""
    run = Campaign(handle, config, "hill_climbing")
    alphabet = handle.info.alphabet
    if run.best_sequence is None and run.remaining > 0:
        run.evaluate([run.random_sequence()])
    z = one_hot_encode(run.best_sequence, alphabet)
    z_score = run.best_score
    while run.remaining > 0:
        proposal = np.clip(z + step_sigma * run.rng.standard_normal(z.size), 0.0, 1.0)
        score = run.evaluate([one_hot_decode(proposal, alphabet)])[0]
        if score > z_score:
            z, z_score = proposal, score
    return run.result()


def genetic_algorithm_solve(
    handle,
    config: SolverRunConfig,
    population_size: int = 20,
    tournament_k: int = 3,
    mutation_rate: float | None = None,
) -> SolveResult:
    """Tournament selection, uniform crossover, single-elite replacement."""
    run = Campaign(handle, config, "genetic_algorithm")
    info = handle.info
    size, L = info.alphabet.size, info.sequence_length
    if mutation_rate is None:
        mutation_rate = 1.0 / L
    rng = run.rng

    pop = sorted(
        ([np.asarray(s), float(y)] for s, y in config.init_data),
        key=lambda p: p[1],
        reverse=True,
    )[:population_size]
    # Pad with single-point mutants of init members (uniform random when
    # there is nothing to mutate); padding calls are charged.
    pad = []
    while len(pop) + len(pad) < population_size and run.remaining > len(pad):
        if pop:
            base = pop[rng.integers(len(pop))][0]
            pad.append(_mutate_one(base, rng, size))
        else:
            pad.append(run.random_sequence())
    if pad:
        for seq, score in zip(pad, run.evaluate(pad)):
            pop.append([seq, score])

    def tournament() -> np.ndarray:
        best = None
        for _ in range(min(tournament_k, len(pop))):
            cand = pop[rng.integers(len(pop))]
            if best is None or cand[1] > best[1]:
                best = cand
        return best[0]

    while run.remaining > 0 and len(pop) >= 2:
        elite = max(pop, key=lambda p: p[1])
        children = []
        for _ in range(min(population_size - 1, run.remaining)):
            p1, p2 = tournament(), tournament()
            mask = rng.random(L) < 0.5
            child = np.where(mask, p1, p2)
            mut = rng.random(L) < mutation_rate
            if mut.any():
                shift = rng.integers(1, size, size=int(mut.sum()))
                child[mut] = (child[mut] + shift) % size
            children.append(child.astype(np.int64))
        scores = run.evaluate(children)
        pop = [elite] + [[c, s] for c, s in zip(children, scores)]
    return run.result()


def cma_es_solve(
    handle,
    config: SolverRunConfig,
    population_lambda: int | None = None,
    sigma0: float = 0.3,
) -> SolveResult:
    """(mu/mu_w, lambda) covariance-matrix-adaptation over the one-hot box.

    Candidates are clipped and decoded only for evaluation; the strategy
    updates use the unclipped samples. The covariance eigenvalues are
    floored at 1e-12 to preserve positive definiteness.
    """
    run = Campaign(handle, config, "cmaes")
    alphabet = handle.info.alphabet
    if run.best_sequence is None and run.remaining > 0:
        run.evaluate([run.random_sequence()])
    dim = handle.info.sequence_length * alphabet.size
    lam = population_lambda or (4 + int(3 * math.log(dim)))
    mu = lam // 2
    w = np.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mu_eff = 1.0 / (w**2).sum()
    c_sigma = (mu_eff + 2) / (dim + mu_eff + 5)
    d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (dim + 1)) - 1) + c_sigma
    c_c = (4 + mu_eff / dim) / (dim + 4 + 2 * mu_eff / dim)
    c_1 = 2 / ((dim + 1.3) ** 2 + mu_eff)
    c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((dim + 2) ** 2 + mu_eff))
    chi_n = math.sqrt(dim) * (1 - 1 / (4 * dim) + 1 / (21 * dim**2))

    m = one_hot_encode(run.best_sequence, alphabet)
    sigma = sigma0
    C = np.eye(dim)
    B, d = np.eye(dim), np.ones(dim)
    p_sigma = np.zeros(dim)
    p_c = np.zeros(dim)
    gen = 0
    while run.remaining > 0:
        gen += 1
        n = min(lam, run.remaining)
        Z = run.rng.standard_normal((n, dim))
        Y = Z * d @ B.T  # y_i = B (d * z_i)
        X = m + sigma * Y
        batch = [one_hot_decode(np.clip(x, 0.0, 1.0), alphabet) for x in X]
        scores = np.asarray(run.evaluate(batch))
        if n < lam:
            break  # partial final generation: incumbent updated, no strategy step
        order = np.argsort(-scores)[:mu]
        y_w = w @ Y[order]
        z_w = w @ Z[order]
        m = m + sigma * y_w
        p_sigma = (1 - c_sigma) * p_sigma + math.sqrt(
            c_sigma * (2 - c_sigma) * mu_eff
        ) * (B @ z_w)
        norm_ps = np.linalg.norm(p_sigma)
        sigma *= math.exp((c_sigma / d_sigma) * (norm_ps / chi_n - 1))
        h_sigma = float(
            norm_ps / math.sqrt(1 - (1 - c_sigma) ** (2 * gen)) / chi_n
            < 1.4 + 2 / (dim + 1)
        )
        p_c = (1 - c_c) * p_c + h_sigma * math.sqrt(c_c * (2 - c_c) * mu_eff) * y_w
        rank1 = np.outer(p_c, p_c)
        rank_mu = (Y[order].T * w) @ Y[order]
        C = (
            (1 - c_1 - c_mu) * C
            + c_1 * (rank1 + (1 - h_sigma) * c_c * (2 - c_c) * C)
            + c_mu * rank_mu
        )
        C = (C + C.T) / 2
        eigvals, B = np.linalg.eigh(C)
        eigvals = np.maximum(eigvals, 1e-12)
        C = (B * eigvals) @ B.T
        d = np.sqrt(eigvals)
    return run.result()


register_solver("directed_evolution", directed_evolution_solve)
register_solver("hill_climbing", hill_climbing_solve, {"step_sigma": 0.25})
register_solver(
    "genetic_algorithm",
    genetic_algorithm_solve,
    {"population_size": 20, "tournament_k": 3, "mutation_rate": None},
)
register_solver("cmaes", cma_es_solve, {"population_lambda": None, "sigma0": 0.3})
