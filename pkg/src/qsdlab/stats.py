"""Small statistical helpers shared by estimators and tests."""

from __future__ import annotations

import numpy as np
from scipy import stats as _sp


def tv_distance(p, q) -> float:
    """Total-variation distance between two probability vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return 0.5 * float(np.abs(p - q).sum())


def merge_small_bins(counts, probs, min_expected: float = 5.0):
    """Merge adjacent bins until every expected count reaches ``min_expected``.

    Keeps the chi-square approximation honest in thin tail bins; returns the
    merged (counts, probs).
    """
    counts = np.asarray(counts, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    total = counts.sum()
    out_c, out_p = [], []
    acc_c = acc_p = 0.0
    for c, p in zip(counts, probs):
        acc_c += c
        acc_p += p
        if acc_p * total >= min_expected:
            out_c.append(acc_c)
            out_p.append(acc_p)
            acc_c = acc_p = 0.0
    if acc_p > 0:
        if out_c:
            out_c[-1] += acc_c
            out_p[-1] += acc_p
        else:
            out_c.append(acc_c)
            out_p.append(acc_p)
    return np.asarray(out_c), np.asarray(out_p)


def chi2_gof(counts, probs, min_expected: float = 5.0):
    """Pearson goodness-of-fit test of histogram counts against bin masses.

    Returns (statistic, p_value, dof) after tail-bin merging; probs are
    renormalized so rounding slack cannot masquerade as lack of fit.
    """
    counts, probs = merge_small_bins(counts, probs, min_expected)
    probs = probs / probs.sum()
    total = counts.sum()
    expected = probs * total
    stat = float(((counts - expected) ** 2 / expected).sum())
    dof = len(counts) - 1
    if dof <= 0:
        return stat, 1.0, dof
    return stat, float(_sp.chi2.sf(stat, dof)), dof


def mann_kendall(series):
    """Mann-Kendall trend statistic.

    Returns (S, z, p_decreasing): S is the signed concordance count, z the
    normal score with continuity correction, and p_decreasing the one-sided
    p-value for a monotone *decreasing* trend (small = strong evidence of
    decrease).
    """
    x = np.asarray(series, dtype=np.float64)
    x = x[np.isfinite(x)]
    n = len(x)
    if n < 3:
        return 0, 0.0, 1.0
    s = 0
    for i in range(n - 1):
        s += int(np.sign(x[i + 1:] - x[i]).sum())
    var = n * (n - 1) * (2 * n + 5) / 18.0
    if s > 0:
        z = (s - 1) / np.sqrt(var)
    elif s < 0:
        z = (s + 1) / np.sqrt(var)
    else:
        z = 0.0
    return s, float(z), float(_sp.norm.cdf(z))


def bootstrap_counts(counts, n_resamples: int, seed: int):
    """Multinomial resamples of a count vector, one row per resample."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.zeros((n_resamples, len(counts)), dtype=np.int64)
    gen = np.random.Generator(np.random.PCG64(seed))
    return gen.multinomial(total, counts / total, size=n_resamples)
