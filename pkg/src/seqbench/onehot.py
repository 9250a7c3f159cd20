"""Bijection between sequences and one-hot vectors in [0,1]^(L*|A|).

Continuous solvers work in the unit box; arbitrary real vectors decode
via per-block argmax (ties to the lowest index), so decoding is total.
"""

import numpy as np

from .core import Alphabet
from .errors import DimensionMismatch


def one_hot_encode(seq: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    """Block b carries a single 1 at index seq[b]."""
    seq = np.asarray(seq, dtype=np.int64)
    out = np.zeros(seq.size * alphabet.size)
    out[np.arange(seq.size) * alphabet.size + seq] = 1.0
    return out


def one_hot_decode(vec: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    """Per-block argmax; total on any real vector of the right dimension."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1 or vec.size % alphabet.size != 0:
        raise DimensionMismatch(
            f"vector of size {vec.size} is not a multiple of |A|={alphabet.size}"
        )
    return vec.reshape(-1, alphabet.size).argmax(axis=1).astype(np.int64)


def decode_batch(X: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] % alphabet.size != 0:
        raise DimensionMismatch(f"bad batch shape {X.shape} for |A|={alphabet.size}")
    n = X.shape[0]
    return X.reshape(n, -1, alphabet.size).argmax(axis=2).astype(np.int64)


def encode_batch(X: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    X = np.asarray(X, dtype=np.int64)
    n, L = X.shape
    out = np.zeros((n, L * alphabet.size))
    rows = np.repeat(np.arange(n), L)
    cols = (np.tile(np.arange(L), n) * alphabet.size + X.ravel())
    out[rows, cols] = 1.0
    return out
