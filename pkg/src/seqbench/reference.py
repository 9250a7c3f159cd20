"""Straightforward re-implementation of oracle scoring for verification.

Deliberately written with plain nested loops and no code shared with the
vectorized scorer, so the two can cross-check each other on small
instances.
"""

import math


def reference_score(oracle, seq) -> float:
    """Score one sequence the slow, obvious way."""
    seq = [int(s) for s in seq]
    length = len(seq)
    for i in range(length - 1):
        if oracle.matrix.probs[seq[i]][seq[i + 1]] <= 0.0:
            return 0.0
    total = 1.0
    q = oracle.quantization
    for motif in oracle.motifs:
        symbols = [int(s) for s in motif.symbols]
        offsets = [int(o) for o in motif.offsets]
        span = offsets[-1] + 1
        best = 0
        for anchor in range(length - span + 1):
            count = 0
            for sym, off in zip(symbols, offsets):
                if seq[anchor + off] == sym:
                    count += 1
            best = max(best, count)
        total *= math.floor(best * q / len(symbols)) / q
    return total
