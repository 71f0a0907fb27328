"""Friedman rank test and Nemenyi critical difference over a settings x methods table."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata


class FriedmanResult(NamedTuple):
    avg_ranks: np.ndarray
    tau_chi2: float
    tau_f: float
    cd: float | None


def average_ranks(table, lower_is_better: bool = True) -> np.ndarray:
    """Per-row ranks (1 = best, ties averaged), averaged over rows."""
    M = np.asarray(table, dtype=np.float64)
    ranks = rankdata(M if lower_is_better else -M, method="average", axis=1)
    return ranks.mean(axis=0)


def critical_difference(k: int, N: int, q_alpha: float) -> float:
    if k < 2 or N < 1:
        raise ValueError(f"need k >= 2 methods and N >= 1 settings, got k={k}, N={N}")
    return q_alpha * math.sqrt(k * (k + 1) / (6.0 * N))


def friedman(table, q_alpha: float | None = None, lower_is_better: bool = True) -> FriedmanResult:
    """Friedman chi-square, its F-form, and optionally the Nemenyi CD.

    ``table`` has one row per dataset/setting and one column per method.
    """
    M = np.asarray(table, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"metrics table must be 2-D, got shape {M.shape}")
    N, k = M.shape
    if k < 2 or N < 2:
        raise ValueError(f"need at least 2 methods and 2 settings, got {N}x{k}")
    if not np.all(np.isfinite(M)):
        raise ValueError("metrics table contains non-finite entries")
    r = average_ranks(M, lower_is_better)
    chi2 = 12.0 * N / (k * (k + 1)) * (float(np.sum(r**2)) - k * (k + 1) ** 2 / 4.0)
    denom = N * (k - 1) - chi2
    if denom <= 0:
        raise ValueError("degenerate table: every setting ranks the methods identically, F undefined")
    tau_f = (N - 1) * chi2 / denom
    cd = critical_difference(k, N, q_alpha) if q_alpha is not None else None
    return FriedmanResult(r, chi2, tau_f, cd)
