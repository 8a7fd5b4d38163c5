"""CUR decomposition: dual-set spectral sparsification, adaptive sampling,
and the end-to-end column/row selection pipeline.

The BSS greedy loop is deterministic and its two exit bounds are hard
postconditions, re-checked exactly on every invocation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import constants as C
from .core import dense, pinv, svd
from .leverage import leverage_exact, rand_sampling
from .lowrank import frobenius_lowrank
from .sketch import WastefulSketchWarning, apply_sketch, make_sketch

__all__ = [
    "BssWeights",
    "CurResult",
    "CurStageError",
    "bss_sampling",
    "bss_sampling_sparse",
    "adaptive_cols",
    "adaptive_cols_residual",
    "cur_decompose",
]


class CurStageError(RuntimeError):
    """A pipeline stage failed after its reseed retry; carries the stage name."""


@dataclass(frozen=True)
class BssWeights:
    """Output of dual-set sparsification: nonnegative weights, <= r nonzero."""

    weights: np.ndarray
    r: int
    k: int
    history: tuple | None = None

    @property
    def support(self):
        return np.flatnonzero(self.weights)


def _low_scores(vrows, lam, basis, l_cur):
    # LOW(v, 1, M, L) for every row of V at once, from the eigensystem of M
    l_next = l_cur + 1.0
    p = vrows @ basis  # coordinates of each v_j in the eigenbasis
    inv1 = 1.0 / (lam - l_next)
    phi_next = inv1.sum()
    phi_cur = (1.0 / (lam - l_cur)).sum()
    quad2 = (p * p) @ (inv1 * inv1)
    quad1 = (p * p) @ inv1
    return quad2 / (phi_next - phi_cur) - quad1, phi_cur


def bss_sampling(vrows, avecs, r, track=False):
    """Deterministic dual-set spectral-Frobenius sparsification.

    ``vrows`` is n x k with sum_i v_i v_i^T = I_k; ``avecs`` is n x l holding
    the companion vectors as rows.  Greedily reweights at most r indices so
    that lambda_k of the weighted identity decomposition stays above
    (1 - sqrt(k/r))^2 while the companion Frobenius mass does not grow.
    """
    vrows = dense(vrows, "V")
    avecs = dense(avecs, "A vectors")
    n, k = vrows.shape
    r = int(r)
    if not k < r <= n:
        raise ValueError(f"need k < r <= n, got k={k}, r={r}, n={n}")
    if avecs.shape[0] != n:
        raise ValueError("V and the companion vectors must pair up row by row")
    gram_dev = np.abs(vrows.T @ vrows - np.eye(k)).max()
    if gram_dev > 1e-8:
        raise ValueError(f"rows of V do not decompose the identity (dev {gram_dev:.2e})")

    anorm2 = (avecs**2).sum(axis=1)
    total_a = float(anorm2.sum())
    delta_up = total_a / (1.0 - math.sqrt(k / r))
    weights = np.zeros(n)
    m = np.zeros((k, k))
    trace_w = 0.0
    phi_prev = None
    history = [] if track else None

    for tau in range(r):
        l_cur = tau - math.sqrt(r * k)
        u_cur = tau * delta_up
        lam, basis = np.linalg.eigh(m)
        if lam[0] <= l_cur:
            raise RuntimeError(
                f"BSS invariant broken at step {tau}: lambda_k={lam[0]:.6g} <= L={l_cur:.6g}"
            )
        low, phi_cur = _low_scores(vrows, lam, basis, l_cur)
        if phi_prev is not None and phi_cur > phi_prev + 1e-9 * max(1.0, abs(phi_prev)):
            raise RuntimeError(f"BSS potential increased at step {tau}")
        phi_prev = phi_cur
        if trace_w > u_cur + 1e-9 * max(1.0, abs(u_cur)):
            raise RuntimeError(f"BSS trace bound broken at step {tau}")
        if delta_up > 0:
            up = anorm2 / delta_up
        else:
            up = np.zeros(n)
        slack = low - up
        j = int(np.argmax(slack))
        if slack[j] < 0:
            # numerically widen once; a genuine miss means broken preconditions
            tol = 1e-12 * max(1.0, float(np.abs(low).max()))
            if slack[j] < -tol:
                raise RuntimeError(
                    f"no index satisfies UP <= LOW at step {tau} (gap {slack[j]:.3e})"
                )
        t_inv = 0.5 * (up[j] + low[j])
        if t_inv <= 0:
            raise RuntimeError(f"nonpositive step weight at iteration {tau}")
        t = 1.0 / t_inv
        weights[j] += t
        m += t * np.outer(vrows[j], vrows[j])
        trace_w += t * anorm2[j]
        if track:
            history.append((l_cur, u_cur, phi_cur))

    scale = (1.0 - math.sqrt(k / r)) / r
    weights *= scale

    # hard postconditions of the sparsification theorem, checked exactly
    lam_final = np.linalg.eigvalsh((vrows * weights[:, None]).T @ vrows)
    lower = (1.0 - math.sqrt(k / r)) ** 2
    if lam_final[0] < lower - 1e-10:
        raise RuntimeError(
            f"BSS exit bound failed: lambda_k={lam_final[0]:.12g} < {lower:.12g}"
        )
    mass = float(weights @ anorm2)
    if mass > total_a * (1.0 + 1e-10) + 1e-30:
        raise RuntimeError("BSS exit bound failed: companion mass grew")
    if np.count_nonzero(weights) > r:
        raise RuntimeError("BSS produced more than r nonzero weights")
    return BssWeights(weights, r, k, tuple(history) if track else None)


def bss_sampling_sparse(vrows, avecs, r, eps, seed=0):
    """Randomized dual-set sparsification with sketched companion vectors.

    The companion vectors are compressed by a sparse embedding with
    xi = n^2/eps^2 rows (capped at their dimension, where the embedding
    degenerates to the identity); the Frobenius exit bound relaxes to a
    (1+eps)/(1-eps) factor while the spectral bound is untouched.
    """
    vrows = dense(vrows, "V")
    avecs = dense(avecs, "A vectors")
    n = vrows.shape[0]
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    ell = avecs.shape[1]
    xi = min(int(math.ceil(n * n / (eps * eps))), ell)
    if xi < ell:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WastefulSketchWarning)
            op = make_sketch("sparse", xi, ell, seed)
        compressed = apply_sketch(op, avecs.T).T
    else:
        compressed = avecs
    return bss_sampling(vrows, compressed, r)


def _estimate_col_norms(b, seed):
    """Squared column norms of B estimated through a narrow Gaussian map."""
    t = int(math.ceil(C.ADAPTIVE_GAUSS_ROWS_CONST * math.log(max(*b.shape, 3))))
    g = np.random.default_rng(np.random.SeedSequence([seed, 29]))
    gb = (g.standard_normal((t, b.shape[0])) / math.sqrt(t)) @ b
    return (gb**2).sum(axis=0)


def adaptive_cols(a, v, alpha, c2, seed=0):
    """Adaptive column sampling from the residual of a pilot subspace.

    Samples ``c2`` column indices i.i.d. with probability proportional to the
    (Gaussian-estimated) squared column norms of B = A - V V^+ A; the
    estimate's distortion is what the ``alpha`` slack in the expectation
    bound absorbs.  Returns an empty index set when V already spans A.
    """
    a = dense(a)
    v = dense(v, "V")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    b = a - v @ (pinv(v) @ a)
    norm2 = _estimate_col_norms(b, seed)
    total = float(norm2.sum())
    exact_total = float((b**2).sum())
    if exact_total <= 1e-24 * float((a**2).sum() + 1e-300) or total <= 0.0:
        return np.empty(0, dtype=np.int64)
    plan = rand_sampling(norm2 / total, int(c2), seed=np.random.SeedSequence([seed, 31]).entropy % (2**32))
    return plan.indices


def adaptive_cols_residual(a, r_rows, c1, alpha, c2, seed=0):
    """Adaptive sampling against an arbitrary row-space constraint.

    Requires rank(R) = rank(A R^+ R); the sampling itself draws from the
    residual of the pilot columns C1, exactly as in :func:`adaptive_cols`.
    """
    a = dense(a)
    r_rows = dense(r_rows, "R")
    c1 = dense(c1, "C1")
    rank_r = svd(r_rows).rank
    rank_ar = svd(a @ pinv(r_rows) @ r_rows).rank
    if rank_r != rank_ar:
        raise ValueError(
            f"rank(R)={rank_r} but rank(A R^+ R)={rank_ar}; adaptive bound void"
        )
    return adaptive_cols(a, c1, alpha, c2, seed)


@dataclass(frozen=True)
class CurResult:
    """CUR factors: C and R hold rescaled columns/rows of A, U has rank <= k."""

    c: np.ndarray
    col_indices: np.ndarray
    col_scales: np.ndarray
    r: np.ndarray
    row_indices: np.ndarray
    row_scales: np.ndarray
    u: np.ndarray
    k: int

    def reconstruct(self):
        return self.c @ self.u @ self.r


def _dedup_scaled(indices, scales):
    """Keep one copy per index (the projector only sees the span)."""
    seen = {}
    for i, s in zip(indices, scales):
        if i not in seen:
            seen[int(i)] = float(s)
    idx = np.fromiter(seen.keys(), dtype=np.int64)
    sc = np.fromiter(seen.values(), dtype=np.float64)
    return idx, sc


def _pilot_columns(a, z, k, eps, seed, stage):
    """Leverage-sample columns of A by the row weights of Z, then BSS down to 4k."""
    n, d = a.shape
    lev = (z**2).sum(axis=1)
    p = lev / lev.sum()
    s1 = min(d, max(4 * k + 2, int(math.ceil(C.CUR_LEVERAGE_SAMPLES_CONST * k * math.log(2 * k)))))
    for attempt in range(2):
        plan = rand_sampling(p, s1, seed=seed + 37 * attempt)
        m = (z[plan.indices] * plan.scales[:, None]).T  # k x s1 = Z^T Omega D
        res = svd(m)
        if res.rank < k:
            continue
        # V factor of M decomposes the identity over the s1 samples
        v_m = res.vt.T
        resid = a - (a @ z) @ z.T
        avecs = (resid[:, plan.indices] * plan.scales[None, :]).T
        try:
            w = bss_sampling_sparse(v_m, avecs, 4 * k, 0.5, seed=seed + 41 * attempt)
        except (RuntimeError, ValueError):
            continue
        keep = w.support
        col_idx = plan.indices[keep]
        col_scale = plan.scales[keep] * np.sqrt(w.weights[keep])
        return col_idx, col_scale
    raise CurStageError(f"{stage}: leverage + BSS stage lost rank twice")


def cur_decompose(a, k, eps, seed=0):
    """Column/row CUR decomposition with (1 + eps) Frobenius error.

    Pipeline: a constant-accuracy rank-k right basis Z; O(k log k) leverage
    samples of its rows downsampled to 4k columns by sparse BSS; 270 k/eps
    adaptive residual samples; the mirrored process on rows through a rank-k
    left basis confined to span(C); and U = (C^+ L)(L^T A R^+) which has rank
    at most k by construction.
    """
    a = dense(a)
    n, d = a.shape
    k = int(k)
    if k < 1 or k > min(n, d):
        raise ValueError("k out of range")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")

    try:
        fact = frobenius_lowrank(a, k, 1.0 / 9.0, seed=seed)
    except RuntimeError as exc:
        raise CurStageError(f"initial basis: {exc}") from exc
    z = fact.right.T  # d x k, orthonormal columns

    c2 = int(math.ceil(C.CUR_ADAPTIVE_CONST * k / eps))

    # --- columns ---
    col_idx, col_scale = _pilot_columns(a, z, k, eps, seed, "column pilot")
    c1 = a[:, col_idx] * col_scale[None, :]
    extra_cols = adaptive_cols(a, c1, 1.0 / 3.0, c2, seed=seed + 43)
    col_idx = np.concatenate([col_idx, extra_cols])
    col_scale = np.concatenate([col_scale, np.ones(extra_cols.size)])
    col_idx, col_scale = _dedup_scaled(col_idx, col_scale)
    c_mat = a[:, col_idx] * col_scale[None, :]

    # --- rank-k left basis inside span(C) ---
    u_c = svd(c_mat).u
    ahat = u_c @ (u_c.T @ a)
    left = svd(ahat).u
    if left.shape[1] < k:
        raise CurStageError("left basis: projected matrix has rank below k")
    left = left[:, :k]

    # --- rows, mirrored through the left basis ---
    row_idx, row_scale = _pilot_columns(a.T, left, k, eps, seed + 47, "row pilot")
    r1 = a[row_idx] * row_scale[:, None]
    extra_rows = adaptive_cols_residual(a.T, left.T, r1.T, 1.0 / 3.0, c2, seed=seed + 53)
    row_idx = np.concatenate([row_idx, extra_rows])
    row_scale = np.concatenate([row_scale, np.ones(extra_rows.size)])
    row_idx, row_scale = _dedup_scaled(row_idx, row_scale)
    r_mat = a[row_idx] * row_scale[:, None]

    u = (pinv(c_mat) @ left) @ (left.T @ a @ pinv(r_mat))
    return CurResult(
        c=c_mat,
        col_indices=col_idx,
        col_scales=col_scale,
        r=r_mat,
        row_indices=row_idx,
        row_scales=row_scale,
        u=u,
        k=k,
    )
