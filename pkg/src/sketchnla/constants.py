"""Named constants behind every asymptotic bound in the toolkit.

Each entry instantiates a big-O expression with a concrete multiplier.
Values pinned by an explicit formula in the literature keep multiplier 1;
the rest were calibrated so the statistical contracts in the acceptance
suite hold with margin at desk scale.  Tightening a bound means editing
one number here, not hunting through call sites.
"""

# --- sketch sizes ---------------------------------------------------------

#: rows of a sparse embedding delivering a (1 +/- eps) subspace embedding of a
#: d-dimensional space with failure probability delta: r = C * d^2 / (delta eps^2)
SPARSE_EMBED_ROWS_CONST = 1.0

#: rows of a sparse embedding with the (eps, delta, 2)-JL moment property:
#: r = C * 2 / (eps^2 delta)
JL_MOMENT_ROWS_CONST = 1.0

#: repetitions in success-probability boosting: t = ceil(C * log2(1/delta))
BOOST_REPEAT_CONST = 3.0

#: per-repetition failure budget assumed when sizing the boosted embeddings
BOOST_SINGLE_FAIL = 0.1

# --- leverage scores ------------------------------------------------------

#: Gaussian width in the fast leverage-score estimate: t = ceil(C * ln n / gamma^2)
LEVERAGE_GAUSS_COLS_CONST = 1.0

#: sparse-embedding rows in the fast leverage-score estimate: r = C * k^2 / gamma^2
LEVERAGE_EMBED_ROWS_CONST = 1.0

# --- regression -----------------------------------------------------------

#: sketch rows for one-shot l2 regression: r = C * (d+1)^2 / eps  (the +1
#: accounts for the stacked right-hand side)
REGRESS_SKETCH_ROWS_CONST = 1.0

#: rows of the preconditioning sketch: r = C * d^2 / eps0^2.  Calibrated so
#: the measured distortion stays near 1/6, giving per-iteration contraction
#: about 1/3 and kappa(AR) well under the eps0 = 1/2 bound of 9.
PRECOND_ROWS_CONST = 2.5

#: Cauchy embedding rows for the well-conditioned basis: r = C * d * ln(d+1)
CAUCHY_ROWS_CONST = 4.0

#: sparse-embedding rows in the exponential-variables route: r = C * d * ln(d+1)^2
EXP_EMBED_ROWS_CONST = 4.0

#: expected kept rows in l1 sampling: r = C * d^2.5 / (zeta * eps^2), zeta = 1/(4d)
L1_SAMPLE_ROWS_CONST = 0.25

#: iteration cap for the smoothed iteratively-reweighted l1 solver
IRLS_MAX_ITERS = 200

# --- low rank -------------------------------------------------------------

#: left sketch rows for Frobenius low rank: r = C * (k^2 + k/eps)
LOWRANK_LEFT_ROWS_CONST = 2.0

#: right sketch columns, sized to embed the r_S-dimensional row space of SA
LOWRANK_RIGHT_COLS_CONST = 2.0

#: power-method exponent: q = ceil(C * ln(m n) / eps)
POWER_ITERS_CONST = 4.0

# --- CUR ------------------------------------------------------------------

#: leverage-score samples before BSS downsampling: s = C * k * ln(2k), with a
#: floor keeping s strictly above the BSS target of 4k
CUR_LEVERAGE_SAMPLES_CONST = 8.0

#: adaptive samples: c2 = ceil(270 k / eps) (pinned by the CUR pipeline)
CUR_ADAPTIVE_CONST = 270.0

#: Gaussian rows for residual-norm estimates: t = ceil(C * ln(max(n, d)))
ADAPTIVE_GAUSS_ROWS_CONST = 4.0

# --- distributed protocol -------------------------------------------------

#: sign-sketch rows in AdaptiveCompress: m = ceil(C * k / eps)
DIST_SKETCH_ROWS_CONST = 2.0

#: second-stage projection rows: p = ceil(C * k / eps^3)
DIST_PROJ_ROWS_CONST = 2.0

#: words charged for broadcasting one generator seed
SEED_WORDS = 1

# --- graph sparsification -------------------------------------------------

#: edge-sample budget: s = ceil(C * n * ln n / eps^2)
SPARSIFY_SAMPLES_CONST = 1.0

# --- Schatten estimation ---------------------------------------------------

#: Gaussian probes: r = ceil(C / eps^2)
SCHATTEN_PROBES_CONST = 40.0
