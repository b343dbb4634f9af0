"""Random reversible generators for property sweeps and cross-checks."""

from __future__ import annotations

import numpy as np

from .spectral import ReversibleGenerator, validate_generator


def random_reversible_generator(
    n: int,
    seed: int,
    density: float = 0.6,
    kill_low: float = 0.05,
    kill_high: float = 0.6,
    tridiagonal: bool = False,
) -> ReversibleGenerator:
    """Draw an irreducible sub-Markovian generator in detailed balance.

    Construction: a symmetric nonnegative weight matrix ``W`` (a connectivity
    backbone plus sparse extras) and random masses ``m`` define conductance
    rates ``Q_ij = W_ij / m_i``, which satisfy detailed balance identically.
    Killing rates drawn uniformly from ``[kill_low, kill_high]`` are added to
    the diagonal deficit.  The result goes through the standard validator.
    """
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.2, 2.0, size=n)
    W = np.zeros((n, n))
    # nearest-neighbour backbone keeps the graph strongly connected
    back = rng.uniform(0.3, 1.5, size=n - 1)
    W[np.arange(n - 1), np.arange(1, n)] = back
    if not tridiagonal:
        extra = rng.uniform(0.0, 1.0, size=(n, n)) < density
        vals = rng.uniform(0.05, 1.0, size=(n, n))
        W = W + np.triu(extra * vals, k=2)
    W = W + W.T
    Q = W / m[:, None]
    kill = rng.uniform(kill_low, kill_high, size=n)
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -(Q.sum(axis=1) + kill))
    return validate_generator(Q, m)
