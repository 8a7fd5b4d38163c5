"""Sketched least-squares and least-absolute-deviation regression.

The l2 side offers the one-shot sketch-and-solve route, its constrained
variant, and a sketch-preconditioned iterative scheme that reaches machine
precision.  The l1 side builds well-conditioned bases from heavy-tailed
embeddings, samples rows by their basis weight, and solves the reduced
problem with a smoothed iteratively-reweighted scheme.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import constants as C
from .core import dense, pinv, qr
from .sketch import WastefulSketchWarning, apply_sketch, make_sketch

__all__ = [
    "RegressionProblem",
    "IterationTrace",
    "WellConditionedBasis",
    "solve_l2_exact",
    "sketch_solve_l2",
    "sketch_solve_l2_constrained",
    "precond_solve_l2",
    "wcb_from_sketch",
    "l1_sampling_probs",
    "solve_l1_small",
    "solve_l1_sketched",
    "l1_hyperplane_fit",
]


@dataclass(frozen=True)
class RegressionProblem:
    """An overconstrained regression instance min_x ||A x - b|| in l1 or l2."""

    a: np.ndarray
    b: np.ndarray
    norm: str = "l2"

    def __post_init__(self):
        object.__setattr__(self, "a", dense(self.a, "A"))
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if b.shape[0] != self.a.shape[0]:
            raise ValueError("b length must match the row count of A")
        if not np.isfinite(b).all():
            raise ValueError("b contains non-finite entries")
        object.__setattr__(self, "b", b)
        if self.norm not in ("l1", "l2"):
            raise ValueError("norm must be 'l1' or 'l2'")
        if self.a.shape[0] < self.a.shape[1]:
            raise ValueError("problem must be overconstrained (rows >= cols)")


def _expect_norm(problem, norm):
    if problem.norm != norm:
        raise ValueError(f"expected an {norm} problem, got {problem.norm}")


# --------------------------------------------------------------------- l2 --


def solve_l2_exact(problem):
    """Minimum-norm least-squares solution via the pseudoinverse."""
    _expect_norm(problem, "l2")
    return pinv(problem.a) @ problem.b


def _l2_sketch_rows(d, eps):
    return int(math.ceil(C.REGRESS_SKETCH_ROWS_CONST * (d + 1) ** 2 / eps))


def sketch_solve_l2(problem, eps, seed=0):
    """Sketch-and-solve l2 regression with a sparse embedding of d^2/eps rows.

    Sketches the stacked matrix [A b] once and solves the small problem
    exactly; the cost is within (1 + eps) of optimal with large constant
    probability.
    """
    _expect_norm(problem, "l2")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    return sketch_solve_l2_constrained(
        problem, lambda sa, sb: np.linalg.lstsq(sa, sb, rcond=None)[0], eps, seed
    )


def sketch_solve_l2_constrained(problem, small_solver, eps, seed=0):
    """Constrained sketch-and-solve: the caller supplies the small solver.

    ``small_solver(SA, Sb)`` must minimize ||SA x - Sb||_2 over the feasible
    set; the (1 + eps) guarantee transfers from the subspace embedding of the
    column space of [A b].
    """
    _expect_norm(problem, "l2")
    a, b = problem.a, problem.b
    n, d = a.shape
    r = _l2_sketch_rows(d, eps)
    stacked = np.hstack([a, b[:, None]])
    for attempt in range(2):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WastefulSketchWarning)
            op = make_sketch("sparse", r, n, seed + 101 * attempt)
        sk = apply_sketch(op, stacked)
        sa, sb = sk[:, :d], sk[:, d]
        if np.linalg.matrix_rank(sa) == min(sa.shape):
            return small_solver(sa, sb)
    # the second sketch was rank-deficient too; solve it anyway and let the
    # caller judge the residual
    return small_solver(sa, sb)


@dataclass(frozen=True)
class IterationTrace:
    """Record of the preconditioned iterative solve."""

    x: np.ndarray
    residuals: np.ndarray
    iterations: int
    kappa: float


def precond_solve_l2(problem, eps, seed=0, eps0=0.5):
    """Iterative l2 regression with a sketched QR preconditioner.

    A sparse embedding of accuracy ``eps0`` yields R with kappa(R^T A^T A R)
    at most ((1+eps0)/(1-eps0))^2; simple residual correction in the
    preconditioned space then contracts the error gap by the measured factor
    max_i |1 - sigma_i(AR)^2| per step until the relative gap falls below
    ``eps``.
    """
    _expect_norm(problem, "l2")
    if not 0.0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    if not 0.0 < eps0 <= 0.5:
        raise ValueError("eps0 must lie in (0, 1/2]")
    a, b = problem.a, problem.b
    n, d = a.shape
    r = int(math.ceil(C.PRECOND_ROWS_CONST * d * d / (eps0 * eps0)))
    for attempt in range(2):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WastefulSketchWarning)
            op = make_sketch("sparse", r, n, seed + 211 * attempt)
        fact = qr(apply_sketch(op, a))
        if fact.rank_deficient:
            continue
        ar = np.linalg.solve(fact.r.T, a.T).T  # A R^{-1} without forming R^{-1}
        sv = np.linalg.svd(ar, compute_uv=False)
        kappa = float((sv[0] / sv[-1]) ** 2)
        contraction = float(np.abs(1.0 - sv**2).max())
        if contraction >= 1.0:
            continue  # preconditioner missed its accuracy; try a fresh sketch
        budget = min(
            int(math.ceil(math.log(1.0 / eps) / math.log(1.0 / contraction))) + 1, 500
        )
        y = np.zeros(d)
        residuals = [float(np.linalg.norm(b))]
        grad = ar.T @ b
        gap0 = float(grad @ grad)
        while len(residuals) - 1 < budget and gap0 > 0.0:
            y = y + grad
            resid = b - ar @ y
            residuals.append(float(np.linalg.norm(resid)))
            grad = ar.T @ resid
            # the gradient norm brackets the true gap within a kappa factor
            if float(grad @ grad) <= eps * gap0 / kappa:
                break
        x = np.linalg.solve(fact.r, y)
        return IterationTrace(
            x=x,
            residuals=np.asarray(residuals),
            iterations=len(residuals) - 1,
            kappa=kappa,
        )
    raise RuntimeError("preconditioning sketch failed twice (rank or accuracy)")


# --------------------------------------------------------------------- l1 --


@dataclass(frozen=True)
class WellConditionedBasis:
    """An l1 well-conditioned basis held implicitly as A R^{-1}.

    ``alpha`` is the certified entrywise l1 mass of the basis; the scaling of
    ``rinv`` is normalized so that ||x||_inf <= ||A rinv x||_1 held on every
    probe direction (the beta = 1 convention).
    """

    rinv: np.ndarray
    alpha: float
    beta: float
    kind: str
    seed: int


def _wcb_rows(d, kind):
    logd = math.log(d + 1.0)
    if kind == "cauchy":
        return int(math.ceil(C.CAUCHY_ROWS_CONST * d * logd))
    return int(math.ceil(C.EXP_EMBED_ROWS_CONST * d * logd * logd))


def wcb_from_sketch(a, embed_kind="cauchy", seed=0, probes=100):
    """Build a well-conditioned basis from a heavy-tailed sketch of A.

    ``embed_kind`` selects the l1 embedding: dense Cauchy rows, or a sparse
    embedding composed with a diagonal of reciprocal exponentials.  R comes
    from the QR factorization of the sketched matrix; the returned basis is
    rescaled so the beta = 1 lower bound holds on random probe directions.
    """
    a = dense(a)
    n, d = a.shape
    if embed_kind not in ("cauchy", "exp"):
        raise ValueError("embed_kind must be 'cauchy' or 'exp'")
    r = _wcb_rows(d, embed_kind)
    for attempt in range(2):
        op_seed = seed + 307 * attempt
        if embed_kind == "cauchy":
            sa = apply_sketch(make_sketch("cauchy", r, n, op_seed), a)
        else:
            diag = make_sketch("exp_recip_diag", n, n, op_seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", WastefulSketchWarning)
                cs = make_sketch("sparse", min(r, n), n, op_seed + 1)
            sa = apply_sketch(cs, apply_sketch(diag, a))
        if sa.shape[0] < d:
            raise ValueError("sketch has fewer rows than columns of A")
        fact = qr(sa)
        if fact.rank_deficient:
            continue
        rinv = np.linalg.inv(fact.r)
        u = a @ rinv
        g = np.random.default_rng(np.random.SeedSequence([seed, 11, attempt]))
        x = g.standard_normal((d, probes))
        ratios = np.abs(x).max(axis=0) / np.abs(u @ x).sum(axis=0)
        scale = max(1.0, 1.01 * float(ratios.max()))
        rinv = rinv * scale
        alpha = float(np.abs(a @ rinv).sum())
        return WellConditionedBasis(rinv=rinv, alpha=alpha, beta=1.0,
                                    kind=embed_kind, seed=seed)
    raise RuntimeError("sketched matrix was rank deficient twice")


def l1_sampling_probs(a, basis, seed=0):
    """Row-sampling distribution proportional to estimated l1 basis weights.

    Instead of forming A R^{-1}, a narrow Gaussian map estimates each row's
    l1 norm; the distortion of the estimate sacrifices only a 1/(4 sqrt(d))
    factor in the sampling guarantee.
    """
    a = dense(a)
    n, d = a.shape
    t = int(math.ceil(C.LEVERAGE_GAUSS_COLS_CONST * math.log(max(n, 2)) / 0.25))
    g = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    gauss = g.standard_normal((d, t)) / math.sqrt(t)
    probe = a @ (basis.rinv @ gauss)
    w = np.abs(probe).sum(axis=1)
    total = w.sum()
    if total <= 0:
        raise ValueError("all estimated row weights vanished")
    return w / total


def solve_l1_small(a, b, tol=1e-8):
    """Least-absolute-deviation solve for instances of modest size.

    Smoothed iteratively-reweighted least squares with a decreasing
    smoothing level, followed by a vertex polish that solves the square
    subsystems through the smallest residuals (an optimal l1 solution
    interpolates d rows).  Warns and returns the best iterate if the
    iteration cap is reached.
    """
    a = dense(a, "A")
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    n, d = a.shape
    if n > 10_000:
        raise ValueError("solve_l1_small is meant for instances up to 10^4 rows")

    def cost(x):
        return float(np.abs(a @ x - b).sum())

    x = np.linalg.lstsq(a, b, rcond=None)[0]
    best_x, best_cost = x, cost(x)
    mu = max(float(np.abs(b).sum()) / max(n, 1), 1e-300)
    mu_floor = max(tol * best_cost / max(n, 1), 1e-300)
    iters = 0
    converged = False
    while iters < C.IRLS_MAX_ITERS:
        stall = 0
        while iters < C.IRLS_MAX_ITERS:
            iters += 1
            res = a @ x - b
            w = 1.0 / np.sqrt(np.maximum(np.abs(res), mu))
            x_new = np.linalg.lstsq(a * w[:, None], b * w, rcond=None)[0]
            step = x_new - x
            c_new = cost(x_new)
            if c_new > best_cost:  # damp rather than overshoot
                x_new = x + 0.5 * step
                c_new = cost(x_new)
            x = x_new
            if c_new < best_cost - tol * max(best_cost, 1e-300):
                best_x, best_cost = x, c_new
                stall = 0
            else:
                if c_new < best_cost:
                    best_x, best_cost = x, c_new
                stall += 1
                if stall >= 2:
                    break
        if mu <= mu_floor:
            converged = True
            break
        mu = max(mu / 10.0, mu_floor)

    if not converged:
        warnings.warn("l1 solver hit its iteration cap; returning best iterate",
                      stacklevel=2)

    # vertex polish: try interpolating subsets among the smallest residuals
    res = np.abs(a @ best_x - b)
    cand = np.argsort(res)[: d + 2]
    for subset in combinations(cand, d):
        sub = a[list(subset)]
        try:
            xv = np.linalg.solve(sub, b[list(subset)])
        except np.linalg.LinAlgError:
            continue
        cv = cost(xv)
        if cv < best_cost:
            best_x, best_cost = xv, cv
    return best_x


def _l1_expected_rows(d, eps):
    # r = eps^{-2} poly(d) / zeta with zeta = 1/(4d) and poly(d) = d^{2.5}
    return C.L1_SAMPLE_ROWS_CONST * (d**2.5) * 4.0 * d / (eps * eps)


def solve_l1_sketched(problem, eps, embed_kind="cauchy", seed=0):
    """l1 regression by well-conditioned-basis row sampling.

    The design matrix is augmented with b as an extra column so the sampled
    subproblem preserves costs of the full residual space; rows are kept
    independently with probability min(1, r w_i) and rescaled by 1/p_i.
    """
    _expect_norm(problem, "l1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    a, b = problem.a, problem.b
    n, d = a.shape
    stacked = np.hstack([a, b[:, None]])
    r = _l1_expected_rows(d + 1, eps)
    for attempt in range(2):
        basis = wcb_from_sketch(stacked, embed_kind, seed + 401 * attempt)
        w = l1_sampling_probs(stacked, basis, seed + 401 * attempt)
        p = np.minimum(1.0, r * w)
        g = np.random.default_rng(np.random.SeedSequence([seed, 17, attempt]))
        keep = g.random(n) < p
        if keep.sum() <= d + 1:
            continue
        scale = 1.0 / p[keep]
        try:
            return solve_l1_small(a[keep] * scale[:, None], b[keep] * scale,
                                  tol=1e-10)
        except np.linalg.LinAlgError:
            continue
    raise RuntimeError("sampled l1 problem was degenerate twice")


def l1_hyperplane_fit(points, eps, seed=0, embed_kind="cauchy", affine=False):
    """Best l1 hyperplane through the origin (or affine with the lifted column).

    Shares one sampled embedding of the point matrix across the d candidate
    coordinate directions; returns ``(j, w, cost)`` where the normal w is
    normalized to w_j = 1.  With ``affine=True`` a constant column is
    appended, w gains a trailing offset coefficient, and j still ranges over
    the d real coordinates only.
    """
    pts = dense(points, "points")
    n, d = pts.shape
    if d < 2:
        raise ValueError("hyperplane fitting needs at least two coordinates")
    if n <= d:
        raise ValueError("need more points than dimensions")
    work = np.hstack([pts, np.ones((n, 1))]) if affine else pts
    # one shared row sample certified for the whole column space of the points
    r = _l1_expected_rows(work.shape[1], eps)
    basis = wcb_from_sketch(work, embed_kind, seed)
    wts = l1_sampling_probs(work, basis, seed)
    p = np.minimum(1.0, r * wts)
    g = np.random.default_rng(np.random.SeedSequence([seed, 19]))
    keep = g.random(n) < p
    if keep.sum() <= work.shape[1]:
        keep = np.ones(n, dtype=bool)
        p = np.ones(n)
    sampled = work[keep] / p[keep][:, None]

    best = None
    for j in range(d):
        cols = [c for c in range(work.shape[1]) if c != j]
        design, target = sampled[:, cols], -sampled[:, j]
        try:
            wj = solve_l1_small(design, target, tol=1e-10)
        except np.linalg.LinAlgError:
            continue
        w_full = np.empty(work.shape[1])
        w_full[j] = 1.0
        w_full[cols] = wj
        cost = float(np.abs(work @ w_full).sum())
        if best is None or cost < best[2]:
            best = (j, w_full, cost)
    if best is None:
        raise RuntimeError("all coordinate subproblems were degenerate")
    return best
