"""Dense and sparse matrix kernels: SVD, QR, pseudoinverse, Matrix Market I/O.

Dense matrices are plain float64 ndarrays (row-major); :func:`dense` is the
validating constructor every public entry point funnels through.  Sparse
matrices are sorted, deduplicated COO triplets.  Factorizations are backed by
LAPACK through numpy and re-exposed with the truncation and sign conventions
the rest of the toolkit relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DecompositionError",
    "MatrixMarketError",
    "SvdResult",
    "QrResult",
    "SparseMatrix",
    "dense",
    "svd",
    "pinv",
    "qr",
    "mm_read",
    "mm_write",
]


class DecompositionError(RuntimeError):
    """A factorization failed to converge or its input was unusable."""


class MatrixMarketError(ValueError):
    """Malformed Matrix Market content; carries the offending line number."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


def dense(a, name="matrix"):
    """Validate and return ``a`` as a 2-D float64 C-contiguous array.

    Raises ``ValueError`` if the input contains NaN or infinities, which are
    rejected at construction so downstream kernels can assume finite data.
    """
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim == 1:
        out = out.reshape(-1, 1)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.isfinite(out).all():
        raise ValueError(f"{name} contains non-finite entries")
    return out


def _default_rank_tol(shape):
    # standard numerical-rank convention: eps-scale times the larger dimension
    return 1e-10 * max(shape)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD truncated at the numerical rank.

    ``u`` is n x rank with orthonormal columns, ``sigma`` strictly positive
    and non-increasing, ``vt`` rank x d with orthonormal rows.
    """

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray
    rank: int

    def reconstruct(self):
        return (self.u * self.sigma) @ self.vt


def svd(a, rank_tol=None):
    """Singular value decomposition with relative rank truncation.

    Singular values at or below ``rank_tol * sigma_max`` are dropped.  The
    default tolerance is ``1e-10 * max(rows, cols)``.
    """
    a = dense(a)
    if rank_tol is None:
        rank_tol = _default_rank_tol(a.shape)
    if rank_tol < 0:
        raise ValueError("rank_tol must be nonnegative")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(
            f"SVD of a {a.shape[0]} x {a.shape[1]} matrix did not converge"
        ) from exc
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > rank_tol * s[0]))
    return SvdResult(u[:, :rank], s[:rank], vt[:rank], rank)


def pinv(a, rank_tol=None):
    """Moore-Penrose pseudoinverse via the truncated SVD.

    Retained singular values are inverted; truncated ones map to zero.
    """
    res = svd(a, rank_tol)
    if res.rank == 0:
        return np.zeros((np.shape(a)[1], np.shape(a)[0]))
    return (res.vt.T / res.sigma) @ res.u.T


@dataclass(frozen=True)
class QrResult:
    """Householder QR with nonnegative diagonal of R.

    ``rank_deficient`` flags a diagonal entry of R at or below roundoff
    scale; callers that invert R must check it.
    """

    q: np.ndarray
    r: np.ndarray
    rank_deficient: bool


def qr(a):
    """Reduced QR factorization of a matrix with rows >= cols."""
    a = dense(a)
    n, d = a.shape
    if n < d:
        raise ValueError(f"qr requires rows >= cols, got {n} x {d}")
    q, r = np.linalg.qr(a)
    # canonicalize: flip signs so diag(R) >= 0
    flip = np.sign(np.diag(r))
    flip[flip == 0] = 1.0
    q = q * flip
    r = flip[:, None] * r
    diag = np.abs(np.diag(r))
    tol = _default_rank_tol(a.shape) * (diag.max() if diag.size else 0.0)
    return QrResult(q, r, bool((diag <= tol).any()))


class SparseMatrix:
    """COO matrix with sorted, deduplicated triplets and no stored zeros."""

    __slots__ = ("rows", "cols", "row", "col", "val")

    def __init__(self, rows, cols, row, col, val, _skip_normalize=False):
        self.rows = int(rows)
        self.cols = int(cols)
        row = np.asarray(row, dtype=np.int64)
        col = np.asarray(col, dtype=np.int64)
        val = np.asarray(val, dtype=np.float64)
        if not (row.shape == col.shape == val.shape) or row.ndim != 1:
            raise ValueError("triplet arrays must be 1-D and equally long")
        if val.size and not np.isfinite(val).all():
            raise ValueError("sparse values must be finite")
        if val.size:
            if row.min(initial=0) < 0 or row.max(initial=0) >= self.rows:
                raise ValueError("row index out of range")
            if col.min(initial=0) < 0 or col.max(initial=0) >= self.cols:
                raise ValueError("column index out of range")
        if not _skip_normalize:
            row, col, val = self._normalize(self.cols, row, col, val)
        self.row, self.col, self.val = row, col, val

    @staticmethod
    def _normalize(ncols, row, col, val):
        # sort row-major, sum duplicates, drop exact zeros
        key = row * ncols + col
        order = np.argsort(key, kind="stable")
        key, row, col, val = key[order], row[order], col[order], val[order]
        if key.size:
            uniq, inverse = np.unique(key, return_inverse=True)
            summed = np.zeros(uniq.size)
            np.add.at(summed, inverse, val)
            row = uniq // ncols
            col = uniq % ncols
            val = summed
        keep = val != 0.0
        return row[keep], col[keep], val[keep]

    @classmethod
    def from_triplets(cls, rows, cols, triplets):
        """Build from an iterable of ``(i, j, value)``; duplicates are summed."""
        triplets = list(triplets)
        if triplets:
            row, col, val = map(np.asarray, zip(*triplets))
        else:
            row = col = val = np.zeros(0)
        return cls(rows, cols, row, col, val)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self):
        return int(self.val.size)

    def to_dense(self):
        out = np.zeros((self.rows, self.cols))
        out[self.row, self.col] = self.val
        return out

    def transpose(self):
        return SparseMatrix(self.cols, self.rows, self.col, self.row, self.val)

    def matmul_dense(self, x):
        """Product with a dense matrix or vector, one pass over the triplets."""
        x = np.asarray(x, dtype=np.float64)
        vec = x.ndim == 1
        if vec:
            x = x.reshape(-1, 1)
        if x.shape[0] != self.cols:
            raise ValueError("dimension mismatch in sparse-dense product")
        out = np.zeros((self.rows, x.shape[1]))
        np.add.at(out, self.row, self.val[:, None] * x[self.col])
        return out[:, 0] if vec else out

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row, other.row)
            and np.array_equal(self.col, other.col)
            and np.array_equal(self.val, other.val)
        )

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"


# --- Matrix Market --------------------------------------------------------

_BANNER = "%%MatrixMarket"


def mm_read(path):
    """Read a Matrix Market file.

    ``coordinate real general`` content (duplicate entries summed, the
    format's convention) comes back as :class:`SparseMatrix`; ``array real
    general`` comes back dense.  Parse failures report the line number.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    banner = lines[0].split()
    if len(banner) != 5 or banner[0] != _BANNER or banner[1].lower() != "matrix":
        raise MatrixMarketError(f"bad banner {lines[0]!r}", 1)
    layout, field, symmetry = (tok.lower() for tok in banner[2:])
    if layout not in ("coordinate", "array"):
        raise MatrixMarketError(f"unsupported layout {layout!r}", 1)
    if field != "real" or symmetry != "general":
        raise MatrixMarketError(f"only 'real general' supported, got {field} {symmetry}", 1)

    body = [
        (no, ln)
        for no, ln in enumerate(lines[1:], start=2)
        if ln.strip() and not ln.lstrip().startswith("%")
    ]
    if not body:
        raise MatrixMarketError("missing size line", len(lines))
    (size_no, size_line), entries = body[0], body[1:]
    size = size_line.split()

    if layout == "coordinate":
        if len(size) != 3:
            raise MatrixMarketError("coordinate size line needs 'rows cols nnz'", size_no)
        try:
            rows, cols, nnz = (int(tok) for tok in size)
        except ValueError:
            raise MatrixMarketError(f"bad size line {size_line!r}", size_no) from None
        if len(entries) != nnz:
            raise MatrixMarketError(
                f"expected {nnz} entries, found {len(entries)}", size_no
            )
        triplets = []
        for no, ln in entries:
            tok = ln.split()
            if len(tok) != 3:
                raise MatrixMarketError(f"bad coordinate entry {ln!r}", no)
            try:
                i, j, v = int(tok[0]), int(tok[1]), float(tok[2])
            except ValueError:
                raise MatrixMarketError(f"bad coordinate entry {ln!r}", no) from None
            if not (1 <= i <= rows and 1 <= j <= cols):
                raise MatrixMarketError(f"index ({i}, {j}) out of bounds", no)
            triplets.append((i - 1, j - 1, v))
        return SparseMatrix.from_triplets(rows, cols, triplets)

    if len(size) != 2:
        raise MatrixMarketError("array size line needs 'rows cols'", size_no)
    try:
        rows, cols = int(size[0]), int(size[1])
    except ValueError:
        raise MatrixMarketError(f"bad size line {size_line!r}", size_no) from None
    if len(entries) != rows * cols:
        raise MatrixMarketError(
            f"expected {rows * cols} values, found {len(entries)}", size_no
        )
    vals = np.empty(rows * cols)
    for pos, (no, ln) in enumerate(entries):
        try:
            vals[pos] = float(ln)
        except ValueError:
            raise MatrixMarketError(f"bad array value {ln!r}", no) from None
    # array format is column-major
    return np.ascontiguousarray(vals.reshape((cols, rows)).T)


def mm_write(matrix, path):
    """Write a matrix in Matrix Market format, round-trip exact for doubles."""
    if isinstance(matrix, SparseMatrix):
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{_BANNER} matrix coordinate real general\n")
            fh.write(f"{matrix.rows} {matrix.cols} {matrix.nnz}\n")
            for i, j, v in zip(matrix.row, matrix.col, matrix.val):
                fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")
        return
    a = dense(matrix)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{_BANNER} matrix array real general\n")
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for v in a.T.ravel():
            fh.write(f"{float(v)!r}\n")
