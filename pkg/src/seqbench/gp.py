"""Exact Gaussian-process regression and Expected Improvement.

A single shared-lengthscale squared-exponential kernel is used for all
one-hot surrogates; the cubic-cost Cholesky factorization is cached on
the model so posterior queries are triangular solves. Hyperparameters
maximize log marginal likelihood plus a lognormal lengthscale prior
whose location grows with sqrt(dimension).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .errors import DimensionMismatch, NumericalError

NOISE_FLOOR = 1e-8
_JITTER_MAX = 1e-4
_LOG_2PI = math.log(2.0 * math.pi)

#: Search bounds for (lengthscale, signal variance, noise variance).
DEFAULT_BOUNDS = ((1e-2, 1e3), (1e-4, 1e2), (NOISE_FLOOR, 1.0))


@dataclass
class GPHyperparams:
    lengthscale: float
    signal_variance: float = 1.0
    noise_variance: float = 1e-4

    def __post_init__(self):
        if min(self.lengthscale, self.signal_variance) <= 0:
            raise ValueError("lengthscale and signal variance must be positive")
        self.noise_variance = max(self.noise_variance, NOISE_FLOOR)


@dataclass
class LengthscalePrior:
    """Lognormal prior over the shared lengthscale."""

    loc: float
    scale: float = 1.0

    @classmethod
    def for_dimension(cls, dim: int, offset: float = 0.0, scale: float = 1.0):
        """Location log(sqrt(dim)) + offset, the dimensionality-scaled default."""
        return cls(loc=0.5 * math.log(dim) + offset, scale=scale)

    def log_density(self, lengthscale: float) -> float:
        z = (math.log(lengthscale) - self.loc) / self.scale
        return -0.5 * z * z - math.log(lengthscale * self.scale) - 0.5 * _LOG_2PI


def _sq_dists(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    xx = (X * X).sum(axis=1)[:, None]
    zz = (Z * Z).sum(axis=1)[None, :]
    d2 = xx + zz - 2.0 * (X @ Z.T)
    return np.maximum(d2, 0.0)


def kernel_matrix(X: np.ndarray, Z: np.ndarray, hyper: GPHyperparams) -> np.ndarray:
    """Squared-exponential kernel sf2 * exp(-|x-z|^2 / (2 l^2))."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatch(f"column mismatch: {X.shape[1]} vs {Z.shape[1]}")
    return _kernel_from_d2(_sq_dists(X, Z), hyper)


def _kernel_from_d2(d2: np.ndarray, hyper: GPHyperparams) -> np.ndarray:
    return hyper.signal_variance * np.exp(-0.5 * d2 / hyper.lengthscale**2)


def _chol_with_jitter(K: np.ndarray, noise: float) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    jitter = 0.0
    while True:
        try:
            L = cholesky(K + (noise + jitter) * np.eye(n), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter = 1e-8 if jitter == 0.0 else jitter * 10.0
            if jitter > _JITTER_MAX:
                raise NumericalError(
                    f"kernel matrix not factorizable at jitter {jitter:.1e}"
                ) from None


class GPModel:
    """Posterior of a fitted GP; immutable after construction."""

    def __init__(
        self,
        train_inputs: np.ndarray,
        targets_raw: np.ndarray,
        hyper: GPHyperparams,
        standardize: bool = True,
        d2: Optional[np.ndarray] = None,
    ):
        self.train_inputs = np.atleast_2d(np.asarray(train_inputs, dtype=np.float64))
        targets_raw = np.asarray(targets_raw, dtype=np.float64).ravel()
        if standardize:
            self.y_mean = float(targets_raw.mean())
            std = float(targets_raw.std())
            self.y_std = std if std > 1e-12 else 1.0
        else:
            self.y_mean, self.y_std = 0.0, 1.0
        self.train_targets = (targets_raw - self.y_mean) / self.y_std
        self.hyper = hyper
        self._d2 = _sq_dists(self.train_inputs, self.train_inputs) if d2 is None else d2
        K = _kernel_from_d2(self._d2, hyper)
        self.chol, self.jitter = _chol_with_jitter(K, hyper.noise_variance)
        self.alpha = cho_solve((self.chol, True), self.train_targets)

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]

    def log_marginal_likelihood(self) -> float:
        """Marginal likelihood of the (standardized) targets."""
        y = self.train_targets
        log_det = 2.0 * np.log(np.diag(self.chol)).sum()
        return float(
            -0.5 * y @ self.alpha - 0.5 * log_det - 0.5 * y.size * _LOG_2PI
        )

    def posterior(self, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """De-standardized mean and latent variance (clamped at 0)."""
        Q = np.atleast_2d(np.asarray(query, dtype=np.float64))
        if Q.shape[1] != self.train_inputs.shape[1]:
            raise DimensionMismatch(
                f"query dim {Q.shape[1]} != train dim {self.train_inputs.shape[1]}"
            )
        k_star = _kernel_from_d2(_sq_dists(Q, self.train_inputs), self.hyper)
        mean = k_star @ self.alpha * self.y_std + self.y_mean
        v = solve_triangular(self.chol, k_star.T, lower=True)
        var = self.hyper.signal_variance - (v * v).sum(axis=0)
        var = np.maximum(var, 0.0) * self.y_std**2
        return mean, var


def gp_posterior(model: GPModel, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return model.posterior(query)


def _objective(log_params, d2, y, prior):
    hyper = GPHyperparams(*np.exp(log_params))
    try:
        K = _kernel_from_d2(d2, hyper)
        L, _ = _chol_with_jitter(K, hyper.noise_variance)
    except NumericalError:
        return 1e12
    alpha = cho_solve((L, True), y)
    nlml = 0.5 * y @ alpha + np.log(np.diag(L)).sum() + 0.5 * y.size * _LOG_2PI
    if prior is not None:
        nlml -= prior.log_density(hyper.lengthscale)
    return float(nlml)


def fit_gp(
    X: np.ndarray,
    y: np.ndarray,
    prior: Optional[LengthscalePrior] = None,
    n_starts: int = 16,
    max_fev: int = 120,
    bounds=DEFAULT_BOUNDS,
    warm_start: Optional[GPHyperparams] = None,
    standardize: bool = True,
    d2: Optional[np.ndarray] = None,
) -> GPModel:
    """Maximize log marginal likelihood + log prior over log-parameters.

    Multi-start Nelder-Mead within `bounds`; the start layout is fixed
    (internal seed) so fitting is a deterministic function of the data.
    A `warm_start` is prepended to the start list when given.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y_raw = np.asarray(y, dtype=np.float64).ravel()
    if y_raw.size < 2:
        raise ValueError("need at least 2 observations to fit")
    if standardize:
        mean, std = y_raw.mean(), y_raw.std()
        y_fit = (y_raw - mean) / (std if std > 1e-12 else 1.0)
    else:
        y_fit = y_raw
    if d2 is None:
        d2 = _sq_dists(X, X)

    log_bounds = np.log(np.asarray(bounds, dtype=np.float64))
    starts = []
    if warm_start is not None:
        starts.append(
            np.log(
                [
                    warm_start.lengthscale,
                    warm_start.signal_variance,
                    warm_start.noise_variance,
                ]
            )
        )
    center = np.array(
        [prior.loc if prior is not None else 0.5 * np.log(X.shape[1]), 0.0, np.log(1e-3)]
    )
    starts.append(np.clip(center, log_bounds[:, 0], log_bounds[:, 1]))
    start_rng = np.random.default_rng(20240521)
    while len(starts) < n_starts:
        starts.append(start_rng.uniform(log_bounds[:, 0], log_bounds[:, 1]))

    best_val, best_params = np.inf, starts[0]
    for s in starts[:n_starts] if n_starts > 0 else starts[:1]:
        res = minimize(
            _objective,
            s,
            args=(d2, y_fit, prior),
            method="Nelder-Mead",
            bounds=log_bounds,
            options={"maxfev": max_fev, "xatol": 1e-3, "fatol": 1e-6},
        )
        val = res.fun if np.isfinite(res.fun) else _objective(res.x, d2, y_fit, prior)
        if val < best_val:
            best_val, best_params = val, res.x
    hyper = GPHyperparams(*np.exp(best_params))
    return GPModel(X, y_raw, hyper, standardize=standardize, d2=d2)


def expected_improvement(mean, variance, best_so_far: float, xi: float = 0.0):
    """Closed-form EI for maximization; nonnegative everywhere."""
    from scipy.stats import norm

    mean = np.asarray(mean, dtype=np.float64)
    s = np.sqrt(np.asarray(variance, dtype=np.float64))
    improve = mean - best_so_far - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(s > 0, improve / np.where(s > 0, s, 1.0), 0.0)
        ei = np.where(
            s > 0,
            improve * norm.cdf(z) + s * norm.pdf(z),
            np.maximum(improve, 0.0),
        )
    return ei if ei.ndim else float(ei)
