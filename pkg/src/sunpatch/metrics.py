"""External cluster-agreement indices and the Jonckheere-Terpstra trend test."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm

from .errors import SunpatchError


def _contingency(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise SunpatchError(f"label vectors differ in length ({a.size} vs {b.size})")
    if a.size == 0:
        raise SunpatchError("label vectors are empty")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(a, b) -> float:
    """Mutual information over ``sqrt(H(a) H(b))`` in nats; 0 when either labeling is constant."""
    table = _contingency(a, b)
    n = table.sum()
    ha = _entropy(table.sum(axis=1))
    hb = _entropy(table.sum(axis=0))
    if ha == 0 or hb == 0:
        return 0.0
    nonzero = table > 0
    if np.all(nonzero.sum(axis=0) == 1) and np.all(nonzero.sum(axis=1) == 1):
        # one-to-one class matching; skip the round-off of the log sums
        return 1.0
    pij = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / n**2
    mi = float(np.sum(pij[nonzero] * np.log(pij[nonzero] / outer[nonzero])))
    return float(np.clip(mi / np.sqrt(ha * hb), 0.0, 1.0))


def _pairs(counts) -> int:
    return sum(int(c) * (int(c) - 1) // 2 for c in np.ravel(counts))


def ari(a, b) -> float:
    """Hubert-Arabie adjusted Rand index.

    Pair counts are exact integers and the index is formed with a single
    division, so rational cases come out exactly.
    """
    table = _contingency(a, b)
    total = _pairs([table.sum()])
    sum_ij = _pairs(table)
    sum_a = _pairs(table.sum(axis=1))
    sum_b = _pairs(table.sum(axis=0))
    # (sum_ij - sa*sb/T) / ((sa+sb)/2 - sa*sb/T), scaled by 2T
    num = 2 * (sum_ij * total - sum_a * sum_b)
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den


def jt_statistic(groups) -> float:
    """Count of cross-group pairs ``(x in g_i, y in g_j), i < j`` with ``x < y``; ties count 1/2."""
    stat = 0.0
    for i in range(len(groups)):
        gi = np.sort(np.asarray(groups[i], dtype=np.float64))
        for j in range(i + 1, len(groups)):
            gj = np.asarray(groups[j], dtype=np.float64)
            below = np.searchsorted(gi, gj, side="left")
            at_or_below = np.searchsorted(gi, gj, side="right")
            stat += float(np.sum(below) + 0.5 * np.sum(at_or_below - below))
    return stat


def jtrend(groups) -> dict:
    """Jonckheere-Terpstra test for an ordered trend across ``groups``.

    The p-value is two-sided, from the normal approximation with the
    tie-corrected variance. When every observation is tied the variance is
    zero and the p-value is 1.
    """
    groups = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(groups) < 2:
        raise SunpatchError("need at least two ordered groups")
    if any(g.size == 0 for g in groups):
        raise SunpatchError("every group must be nonempty")
    stat = jt_statistic(groups)
    sizes = np.array([g.size for g in groups], dtype=np.float64)
    N = sizes.sum()
    _, ties = np.unique(np.concatenate(groups), return_counts=True)
    t = ties.astype(np.float64)
    mean = (N**2 - np.sum(sizes**2)) / 4
    var = (
        N * (N - 1) * (2 * N + 5)
        - np.sum(sizes * (sizes - 1) * (2 * sizes + 5))
        - np.sum(t * (t - 1) * (2 * t + 5))
    ) / 72
    if N > 2:
        var += np.sum(sizes * (sizes - 1) * (sizes - 2)) * np.sum(t * (t - 1) * (t - 2)) / (36 * N * (N - 1) * (N - 2))
    var += np.sum(sizes * (sizes - 1)) * np.sum(t * (t - 1)) / (8 * N * (N - 1))
    if var <= 1e-12 * max(mean, 1.0):
        return {"statistic": stat, "p_value": 1.0, "z": 0.0, "mean": mean, "variance": 0.0}
    z = (stat - mean) / np.sqrt(var)
    return {"statistic": stat, "p_value": float(min(1.0, 2 * norm.sf(abs(z)))), "z": float(z), "mean": mean, "variance": float(var)}
