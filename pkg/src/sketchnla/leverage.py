"""Leverage scores and the row-sampling primitive built on them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import constants as C
from .core import dense, qr, svd
from .sketch import WastefulSketchWarning, apply_sketch, make_sketch

__all__ = ["SamplingPlan", "leverage_exact", "leverage_approx", "rand_sampling"]


@dataclass(frozen=True)
class SamplingPlan:
    """The sampling/rescaling pair (Omega, D) of leverage-score row sampling.

    ``indices`` holds s row draws (with replacement) from the distribution
    ``q``; ``scales[j] = 1/sqrt(q[indices[j]] * s)`` so that the map
    A -> A[indices] * scales[:, None] preserves squared norms in expectation.
    """

    s: int
    indices: np.ndarray
    scales: np.ndarray
    q: np.ndarray

    def apply_rows(self, a):
        """Return D^T Omega^T A, the rescaled sampled rows."""
        a = dense(a)
        return a[self.indices] * self.scales[:, None]


def leverage_exact(a, rank_tol=None):
    """Exact leverage scores: squared row norms of an orthonormal basis.

    They sum to rank(A) and are independent of the choice of basis.
    """
    res = svd(a, rank_tol)
    if res.rank == 0:
        raise ValueError("leverage scores of a zero matrix are undefined")
    return (res.u**2).sum(axis=1)


def leverage_approx(a, beta_target=0.5, seed=0, gauss_cols_const=None):
    """Sketch-accelerated leverage-score distribution.

    Computes a QR factor R from a sparse embedding of A, then estimates the
    row norms of A R^{-1} with a narrow Gaussian map.  The returned vector is
    normalized to a distribution q satisfying q_i >= beta_target * p_i for
    all i with constant probability, where p is the exact leverage
    distribution.

    ``gauss_cols_const`` overrides the width multiplier of the Gaussian
    estimator (the unspecified constant in its O(log n) column count).
    """
    a = dense(a)
    n, k = a.shape
    if not 0.0 < beta_target < 1.0:
        raise ValueError("beta_target must lie in (0, 1)")
    # gamma solving (1 - gamma)(1 - 2 gamma) >= beta_target, the error chain of
    # the embedding step and the basis change
    gamma = min(0.125, (1.0 - beta_target) / 3.0)
    if gauss_cols_const is None:
        gauss_cols_const = C.LEVERAGE_GAUSS_COLS_CONST
    r = int(math.ceil(C.LEVERAGE_EMBED_ROWS_CONST * k * k / gamma**2))
    t = int(math.ceil(gauss_cols_const * math.log(max(n, 2)) / gamma**2))

    for attempt in range(2):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WastefulSketchWarning)
            op = make_sketch("sparse", r, n, seed + attempt)
        sa = apply_sketch(op, a)
        fact = qr(sa)
        if fact.rank_deficient:
            continue
        g = np.random.default_rng(np.random.SeedSequence([seed, 7, attempt]))
        gauss = g.standard_normal((k, t)) / math.sqrt(t)
        probe = a @ np.linalg.solve(fact.r, gauss)
        q = (probe**2).sum(axis=1)
        total = q.sum()
        if total > 0:
            return q / total
    raise RuntimeError("sketched matrix was rank deficient twice; cannot estimate leverage")


def rand_sampling(q, s, seed=0):
    """Draw s row indices i.i.d. from q with the matching rescaling factors.

    Categorical sampling runs by inverse CDF on a prefix-sum array.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("q must be a nonempty vector")
    if (q < 0).any():
        raise ValueError("q must be nonnegative")
    total = q.sum()
    if total <= 0:
        raise ValueError("q sums to zero; nothing to sample")
    if abs(total - 1.0) > 1e-12:
        q = q / total
    s = int(s)
    if s < 1:
        raise ValueError("sample count must be >= 1")
    cdf = np.cumsum(q)
    cdf[-1] = 1.0
    u = np.random.default_rng(seed).random(s)
    idx = np.searchsorted(cdf, u, side="right")
    return SamplingPlan(s, idx, 1.0 / np.sqrt(q[idx] * s), q)
