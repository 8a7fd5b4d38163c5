"""Oblivious sketching operators and their quality checks.

Supported kinds:

``gaussian``
    i.i.d. N(0, 1/r) entries.
``sparse``
    CountSketch: one random sign per column, hashed to a random row
    (``nnz_per_col > 1`` gives the multi-nonzero generalization with
    entries +/- 1/sqrt(s)).
``srht``
    Subsampled randomized Hadamard transform; the input is zero-padded to a
    power of two, hit with a random sign diagonal and the fast Walsh-Hadamard
    transform, then r rows are sampled uniformly with replacement.
``sign``
    Dense +/- 1/sqrt(r) entries.
``cauchy``
    i.i.d. standard Cauchy entries (used for l1 embeddings; no 1/r scale).
``exp_recip_diag``
    Square diagonal of reciprocals of standard exponentials.

Operators are frozen value objects: the same (kind, r, n, seed) always
reproduces the identical operator, bit for bit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import constants as C
from .core import dense, svd
from .core import SparseMatrix

__all__ = [
    "SketchOperator",
    "EmbeddingReport",
    "BoostResult",
    "SketchBoostError",
    "WastefulSketchWarning",
    "make_sketch",
    "apply_sketch",
    "verify_embedding",
    "approx_matmul",
    "jl_moment_estimate",
    "boost_embedding",
    "sparse_embed_rows",
    "fwht",
]

KINDS = ("gaussian", "sparse", "srht", "sign", "cauchy", "exp_recip_diag")


class SketchBoostError(RuntimeError):
    """No boosted embedding candidate passed the cross-validation test."""


class WastefulSketchWarning(UserWarning):
    """A sketch was requested with more output rows than inputs."""


def _rng(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *stream]))


def sparse_embed_rows(d, eps, delta):
    """Sparse-embedding rows for a (1 +/- eps) embedding of a d-space: d^2/(delta eps^2)."""
    return int(math.ceil(C.SPARSE_EMBED_ROWS_CONST * d * d / (delta * eps * eps)))


@dataclass(frozen=True)
class SketchOperator:
    """A seeded random linear map S in R^{r x n}, applied via :func:`apply_sketch`."""

    kind: str
    out_dim: int
    in_dim: int
    seed: int
    hash_rows: np.ndarray | None = field(default=None, repr=False)
    signs: np.ndarray | None = field(default=None, repr=False)
    sampled_rows: np.ndarray | None = field(default=None, repr=False)
    diag: np.ndarray | None = field(default=None, repr=False)
    nnz_per_col: int = 1

    @property
    def padded_dim(self):
        """Power-of-two internal width (SRHT only)."""
        return 1 << max(0, (self.in_dim - 1).bit_length())

    def matrix(self):
        """Materialize S as a dense array; intended for small dimensions."""
        return apply_sketch(self, np.eye(self.in_dim))


def make_sketch(kind, r, n, seed, nnz_per_col=1):
    """Construct a seeded sketching operator of the given kind and shape.

    For ``srht`` the number of rows may not exceed the padded input width.
    ``exp_recip_diag`` is square by construction and requires ``r == n``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown sketch kind {kind!r}")
    r, n = int(r), int(n)
    if r < 1 or n < 1:
        raise ValueError("sketch dimensions must be positive")
    rng = _rng(seed, 0)
    if kind == "sparse":
        s = int(nnz_per_col)
        if s < 1:
            raise ValueError("nnz_per_col must be >= 1")
        if r > n:
            warnings.warn(
                f"sparse embedding with {r} rows on {n} inputs is wasteful",
                WastefulSketchWarning,
                stacklevel=2,
            )
        hash_rows = rng.integers(0, r, size=(s, n))
        signs = rng.choice([-1.0, 1.0], size=(s, n))
        return SketchOperator(kind, r, n, seed, hash_rows=hash_rows, signs=signs,
                              nnz_per_col=s)
    if kind == "srht":
        n_pad = 1 << max(0, (n - 1).bit_length())
        if r > n_pad:
            raise ValueError(f"srht rows {r} exceed padded width {n_pad}")
        signs = rng.choice([-1.0, 1.0], size=n)
        sampled = rng.integers(0, n_pad, size=r)
        return SketchOperator(kind, r, n, seed, signs=signs, sampled_rows=sampled)
    if kind == "exp_recip_diag":
        if r != n:
            raise ValueError("exp_recip_diag is diagonal; r must equal n")
        diag = 1.0 / rng.standard_exponential(n)
        return SketchOperator(kind, r, n, seed, diag=diag)
    # dense kinds are regenerated on application from the stored seed
    return SketchOperator(kind, r, n, seed)


def fwht(x):
    """In-place fast Walsh-Hadamard transform along axis 0 (unnormalized).

    ``x.shape[0]`` must be a power of two; the result is H x with H the
    +/- 1 Hadamard matrix, computed in n log2(n) scalar operations per column.
    """
    n = x.shape[0]
    if n & (n - 1):
        raise ValueError("fwht length must be a power of two")
    h = 1
    while h < n:
        x = x.reshape(-1, 2, h, *x.shape[1:])
        a = x[:, 0] + x[:, 1]
        b = x[:, 0] - x[:, 1]
        x[:, 0], x[:, 1] = a, b
        x = x.reshape(n, *x.shape[3:])
        h *= 2
    return x


def _dense_entries(op, rng):
    if op.kind == "gaussian":
        return rng.standard_normal((op.out_dim, op.in_dim)) / math.sqrt(op.out_dim)
    if op.kind == "sign":
        return rng.choice([-1.0, 1.0], size=(op.out_dim, op.in_dim)) / math.sqrt(op.out_dim)
    if op.kind == "cauchy":
        # inverse CDF of the Cauchy law applied to uniforms
        return np.tan(np.pi * (rng.random((op.out_dim, op.in_dim)) - 0.5))
    raise AssertionError(op.kind)


def apply_sketch(op, a):
    """Compute S A.

    Dense input may be an (n, d) array or a length-n vector.  A CountSketch
    applied to a :class:`SparseMatrix` touches each stored entry exactly once.
    """
    if isinstance(a, SparseMatrix):
        if op.in_dim != a.rows:
            raise ValueError(f"sketch expects {op.in_dim} rows, got {a.rows}")
        if op.kind == "sparse":
            out = np.zeros((op.out_dim, a.cols))
            scale = 1.0 / math.sqrt(op.nnz_per_col)
            for h, sg in zip(op.hash_rows, op.signs):
                np.add.at(out, (h[a.row], a.col), sg[a.row] * a.val * scale)
            return out
        return apply_sketch(op, a.to_dense())

    arr = np.asarray(a, dtype=np.float64)
    vec = arr.ndim == 1
    arr = dense(arr.reshape(-1, 1) if vec else arr, "sketch input")
    if arr.shape[0] != op.in_dim:
        raise ValueError(f"sketch expects {op.in_dim} rows, got {arr.shape[0]}")

    if op.kind == "sparse":
        out = np.zeros((op.out_dim, arr.shape[1]))
        scale = 1.0 / math.sqrt(op.nnz_per_col)
        for h, sg in zip(op.hash_rows, op.signs):
            np.add.at(out, h, (sg[:, None] * arr) * scale)
    elif op.kind == "srht":
        n_pad = op.padded_dim
        buf = np.zeros((n_pad, arr.shape[1]))
        buf[: op.in_dim] = op.signs[:, None] * arr
        buf = fwht(buf)
        # uniform row sampling; 1/sqrt(r) on the +/-1 transform output makes
        # the implicit map an isometry in expectation
        out = buf[op.sampled_rows] / math.sqrt(op.out_dim)
    elif op.kind == "exp_recip_diag":
        out = op.diag[:, None] * arr
    else:
        out = _dense_entries(op, _rng(op.seed, 1)) @ arr
    return out[:, 0] if vec else out


@dataclass(frozen=True)
class EmbeddingReport:
    """Observed embedding quality of S on the column space of a test matrix.

    ``eps_obs`` is the operator-norm distortion ||I - U^T S^T S U||_2, i.e.
    the worst deviation of a squared singular value of S U from 1;
    ``norm_distortion`` is the same deviation measured on the singular values
    themselves (the (1 +/- eps) guarantee on norms rather than squared norms).
    """

    singular_values: np.ndarray
    eps_obs: float
    norm_distortion: float


def verify_embedding(op, a, basis_tol=None):
    """Measure how well S embeds the column space of ``a``.

    An orthonormal basis U is extracted from ``a`` by SVD; the report carries
    the singular values of S U.
    """
    res = svd(a, basis_tol)
    if res.rank == 0:
        raise ValueError("cannot verify an embedding of a rank-0 matrix")
    sv = np.linalg.svd(apply_sketch(op, res.u), compute_uv=False)
    if sv.size < res.rank:  # sketch had fewer rows than the rank
        sv = np.concatenate([sv, np.zeros(res.rank - sv.size)])
    return EmbeddingReport(
        singular_values=sv,
        eps_obs=float(np.abs(sv**2 - 1.0).max()),
        norm_distortion=float(np.abs(sv - 1.0).max()),
    )


def approx_matmul(op, a, b):
    """Approximate A^T B as (S A)^T (S B).

    With an (eps, delta, 2)-JL-moment sketch of at least 2/(eps^2 delta) rows
    the Frobenius error exceeds 3 eps ||A||_F ||B||_F with probability at most
    delta.
    """
    a = dense(a, "A")
    b = dense(b, "B")
    if a.shape[0] != b.shape[0]:
        raise ValueError("A and B must have the same number of rows")
    return apply_sketch(op, a).T @ apply_sketch(op, b)


def jl_moment_estimate(kind, r, n, ell, trials, seed=0, nnz_per_col=1):
    """Monte-Carlo estimate of E |  ||S x||^2 - 1 |^ell over fresh operators.

    The probe is the fixed unit vector with equal coordinates, the spread
    direction where CountSketch collisions actually matter.
    """
    if ell not in (2, 4):
        raise ValueError("ell must be 2 or 4")
    if trials < 100:
        raise ValueError("need at least 100 trials")
    x = np.full(n, 1.0 / math.sqrt(n))
    acc = 0.0
    for t in range(trials):
        op = make_sketch(kind, r, n, _rng(seed, 2, t).integers(2**63), nnz_per_col)
        sx = apply_sketch(op, x)
        acc += abs(float(sx @ sx) - 1.0) ** ell
    return acc / trials


@dataclass(frozen=True)
class BoostResult:
    """Outcome of success-probability boosting: the certified sketch."""

    operator: SketchOperator
    sketch: np.ndarray
    chosen: int
    candidates: int


def boost_embedding(a, eps, delta, seed=0):
    """Cross-validate independent sparse embeddings to boost success probability.

    Builds t = ceil(3 log2(1/delta)) sparse embeddings of accuracy eps/6 and
    returns one whose sketched singular-value geometry agrees with at least
    half of the others to within eps/2, which holds for a genuine embedding
    with probability at least 1 - delta.
    """
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    a = dense(a)
    n, d = a.shape
    t = max(2, int(math.ceil(C.BOOST_REPEAT_CONST * math.log2(1.0 / delta))))
    r = sparse_embed_rows(d, eps / 6.0, C.BOOST_SINGLE_FAIL)
    ops, sketches, factors = [], [], []
    for j in range(t):
        op = make_sketch("sparse", r, n, _rng(seed, 3, j).integers(2**63))
        sa = apply_sketch(op, a)
        u, s, vt = np.linalg.svd(sa, full_matrices=False)
        ops.append(op)
        sketches.append(sa)
        factors.append((s, vt))
    lo, hi = 1.0 - eps / 2.0, 1.0 + eps / 2.0
    for j in range(t):
        s_j, vt_j = factors[j]
        agree = 0
        for jp in range(t):
            if jp == j:
                continue
            s_p, vt_p = factors[jp]
            if s_p.min() <= 0:
                continue
            # sigma(D_j V_j^T V_j' D_j'^+) within 1 +/- eps/2 certifies that the
            # two sketches distort every direction of the column space alike
            m = (s_j[:, None] * (vt_j @ vt_p.T)) / s_p[None, :]
            sv = np.linalg.svd(m, compute_uv=False)
            if lo <= sv.min() and sv.max() <= hi:
                agree += 1
        if 2 * agree >= t - 1:
            return BoostResult(ops[j], sketches[j], j, t)
    raise SketchBoostError(
        f"no candidate among {t} sparse embeddings passed the agreement test"
    )
