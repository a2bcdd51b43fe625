"""Pure-numpy scoring kernels; fallback when the compiled twin is absent.

Both backends must agree bit for bit: counts are exact integers and the
log-likelihood is a sum of N * ln(N / Nj) terms in table order.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def family_counts(codes: np.ndarray, child: int, parents, r: int) -> np.ndarray:
    """Tally child values per parent configuration.

    codes: (S, m) small non-negative ints, one column per variable.
    parents: column positions, first listed is the most significant digit
    of the mixed-radix configuration index.
    Returns an (r^len(parents), r) int64 table.
    """
    parents = list(parents)
    q = r ** len(parents)
    idx = codes[:, child].astype(np.int64, copy=True)
    weight = r
    for p in reversed(parents):
        idx += codes[:, p].astype(np.int64) * weight
        weight *= r
    counts = np.bincount(idx, minlength=q * r)
    return counts.reshape(q, r).astype(np.int64)


def loglik_from_counts(counts: np.ndarray) -> float:
    """Sum of N_jk * ln(N_jk / N_j) with empty cells contributing zero."""
    total = 0.0
    for row in counts:
        nj = int(row.sum())
        if nj == 0:
            continue
        log_nj = math.log(nj)
        for njk in row:
            njk = int(njk)
            if njk > 0:
                total += njk * (math.log(njk) - log_nj)
    return total


def family_loglik(codes: np.ndarray, child: int, parents, r: int) -> float:
    return loglik_from_counts(family_counts(codes, child, parents, r))
