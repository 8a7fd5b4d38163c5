"""Sketched low-rank approximation in Frobenius and spectral norm."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import constants as C
from .core import dense, pinv, svd
from .sketch import WastefulSketchWarning, apply_sketch, make_sketch

__all__ = [
    "FactoredLowRank",
    "best_rank_k_in_rowspace",
    "frobenius_lowrank",
    "spectral_lowrank_power",
    "project_residual_norm",
]

_DENSE_LIMIT = 10**6


@dataclass(frozen=True)
class FactoredLowRank:
    """A low-rank approximation held as the product left @ core @ right."""

    left: np.ndarray
    core: np.ndarray
    right: np.ndarray
    k: int

    @property
    def shape(self):
        return (self.left.shape[0], self.right.shape[1])

    def dense(self, force=False):
        """Materialize the product; refuses silently huge outputs."""
        n, d = self.shape
        if n * d > _DENSE_LIMIT and not force:
            raise ValueError(
                f"refusing to densify a {n} x {d} factored matrix; pass force=True"
            )
        return self.left @ (self.core @ self.right)


def _check_orthonormal_rows(ut, tol=1e-8):
    gram = ut @ ut.T
    return float(np.abs(gram - np.eye(gram.shape[0])).max()) <= tol


def best_rank_k_in_rowspace(a, ut, k):
    """Best Frobenius rank-k approximation of A within a given row space.

    For row-orthonormal ``ut`` the optimum is [A U]_k U^T: project, truncate,
    lift back.  Returned with an orthonormal-row right factor.
    """
    a = dense(a)
    ut = dense(ut, "row basis")
    if not _check_orthonormal_rows(ut):
        raise ValueError("row basis is not orthonormal")
    k = int(k)
    if not 1 <= k <= ut.shape[0]:
        raise ValueError("k must lie in [1, rows(ut)]")
    proj = a @ ut.T
    u, s, vt = np.linalg.svd(proj, full_matrices=False)
    return FactoredLowRank(
        left=u[:, :k],
        core=np.diag(s[:k]),
        right=vt[:k] @ ut,
        k=k,
    )


def frobenius_lowrank(a, k, eps, seed=0):
    """Rank-k approximation with (1 + eps) Frobenius error via two sketches.

    A left sparse embedding S compresses the rows; a second sparse embedding
    R compresses the columns so the projection of A onto the row space of
    S A reduces to small regression problems.  The output is
    [A R U]_k U^T (S A R)^+ (S A) in factored form, where U spans the row
    space of S A R.
    """
    a = dense(a)
    n, d = a.shape
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    r_s = int(math.ceil(C.LOWRANK_LEFT_ROWS_CONST * (k * k + k / eps)))
    r_r = int(math.ceil(C.LOWRANK_RIGHT_COLS_CONST * (r_s * r_s + r_s / eps)))
    for attempt in range(2):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WastefulSketchWarning)
            s_op = make_sketch("sparse", r_s, n, seed + 503 * attempt)
            r_op = None if r_r >= d else make_sketch("sparse", r_r, d, seed + 503 * attempt + 1)
        sa = apply_sketch(s_op, a)
        if r_op is None:
            sar, ar = sa, a
        else:
            ar = apply_sketch(r_op, a.T).T
            sar = apply_sketch(r_op, sa.T).T
        res = svd(sar)
        if res.rank < k:
            continue
        ut = res.vt  # orthonormal basis of the row space of S A R
        inner = best_rank_k_in_rowspace(ar, ut, k)
        # right factor: V_k^T U^T (S A R)^+ (S A), re-orthonormalized
        tail = (inner.right @ pinv(sar)) @ sa
        u2, s2, vt2 = np.linalg.svd(tail, full_matrices=False)
        return FactoredLowRank(
            left=inner.left,
            core=inner.core @ (u2 * s2),
            right=vt2,
            k=k,
        )
    raise RuntimeError("sketched matrix lost rank twice; cannot build rank-k model")


def spectral_lowrank_power(a, k, eps, seed=0, power_iters=None):
    """Subspace power method: rank-k approximation in the spectral norm.

    Runs q = ceil(c ln(mn)/eps) alternating multiplications of a Gaussian
    start block, orthonormalizing between steps, and returns the basis Z
    together with Z Z^T A in factored form.  Error is within (1 + eps) of
    sigma_{k+1} with constant probability.
    """
    a = dense(a)
    n, d = a.shape
    k = int(k)
    if k < 1 or k > min(n, d):
        raise ValueError("k out of range")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if power_iters is None:
        power_iters = int(math.ceil(C.POWER_ITERS_CONST * math.log(n * d) / eps))
    for attempt in range(2):
        g = np.random.default_rng(np.random.SeedSequence([seed, 23, attempt]))
        y = a @ g.standard_normal((d, k))
        for _ in range(power_iters):
            q, _ = np.linalg.qr(y)  # re-orthonormalize: same span, no overflow
            y = a @ (a.T @ q)
        q, r = np.linalg.qr(y)
        diag = np.abs(np.diag(r))
        if diag.min() <= 1e-12 * max(diag.max(), 1e-300):
            continue
        z = q
        return z, FactoredLowRank(left=z, core=np.eye(k), right=z.T @ a, k=k)
    raise RuntimeError("power iteration block lost rank twice")


def project_residual_norm(a, z, ord="spectral"):
    """Norm of A - Z Z^T A computed from the d x d residual Gram matrix.

    Never forms Z Z^T A: the Gram of the residual is A^T A - (Z^T A)^T (Z^T A)
    for column-orthonormal Z.
    """
    a = dense(a)
    z = dense(z, "Z")
    if not _check_orthonormal_rows(z.T):
        raise ValueError("Z must have orthonormal columns")
    za = z.T @ a
    gram = a.T @ a - za.T @ za
    if ord == "fro":
        return math.sqrt(max(float(np.trace(gram)), 0.0))
    if ord == "spectral":
        ev = np.linalg.eigvalsh((gram + gram.T) / 2.0)
        return math.sqrt(max(float(ev[-1]), 0.0))
    raise ValueError("ord must be 'spectral' or 'fro'")
