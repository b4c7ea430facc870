"""Dense linear algebra for the crafting kernel.

The conflict systems solved here are tiny (n is the number of conflicting
tasks, at most a few dozen), so the factorization is an unblocked,
unpivoted Cholesky with an explicit pivot check. Reductions go through
``np.add.reduce``, whose pairwise summation tree is fixed by numpy for a
given array layout, which keeps results reproducible run to run.
"""

import math

import numpy as np

from .exceptions import SingularSystemError
from .validation import check_square, check_vector

# Escalating diagonal regularization, as multiples of mean(diag(A)).
JITTER_SCALES = (1e-10, 1e-8, 1e-6)

# A pivot at or below this fraction of mean(diag(A)) is treated as a failed
# factorization; numerically zero pivots otherwise leak huge solutions.
_PIVOT_RTOL = 1e-12


def inner(a, b) -> float:
    """Inner product sum_k a_k * b_k.

    Uses numpy's pairwise-block summation, so the reduction order is fixed
    and results are deterministic for identical inputs.
    """
    a = check_vector(a, "a")
    b = check_vector(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.add.reduce(a * b))


def norm(a) -> float:
    """Euclidean norm sqrt(inner(a, a))."""
    a = check_vector(a, "a")
    return math.sqrt(float(np.add.reduce(a * a)))


def gram(rows) -> np.ndarray:
    """Gram matrix of a stack of row vectors: out[j, k] = inner(rows[j], rows[k]).

    Only the upper triangle is computed; the lower triangle is mirrored, so
    the result is symmetric bitwise. Requires 1 <= n <= d.
    """
    mat = np.asarray(rows, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"rows must form a 2-D stack, got shape {mat.shape}")
    n, d = mat.shape
    if n < 1:
        raise ValueError("gram requires at least one row")
    if n > d:
        raise ValueError(f"gram requires n <= d, got n={n}, d={d}")
    out = np.empty((n, n), dtype=np.float64)
    for j in range(n):
        for k in range(j, n):
            val = float(np.add.reduce(mat[j] * mat[k]))
            out[j, k] = val
            out[k, j] = val
    return out


class _PivotFailure(Exception):
    def __init__(self, index: int, pivot: float):
        self.index = index
        self.pivot = pivot


def _cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with A = L L^T, or _PivotFailure."""
    n = a.shape[0]
    tol = _PIVOT_RTOL * float(np.trace(a)) / n
    lower = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - float(np.add.reduce(lower[j, :j] * lower[j, :j]))
        if not math.isfinite(pivot) or pivot <= tol:
            raise _PivotFailure(j, pivot)
        ljj = math.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / ljj
    return lower


def _solve_lower(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = lower.shape[0]
    x = np.zeros(n, dtype=np.float64)
    for i in range(n):
        x[i] = (b[i] - float(np.add.reduce(lower[i, :i] * x[:i]))) / lower[i, i]
    return x


def _solve_upper(upper: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = upper.shape[0]
    x = np.zeros(n, dtype=np.float64)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - float(np.add.reduce(upper[i, i + 1 :] * x[i + 1 :]))) / upper[i, i]
    return x


def solve_spd(a, rhs) -> tuple[np.ndarray, float]:
    """Solve A w = rhs for symmetric positive-definite A.

    If the factorization hits a non-positive (or numerically zero) pivot,
    the solve is retried with A + lambda*I for lambda escalating through
    JITTER_SCALES * trace(A)/n.

    Returns (w, jitter) where jitter is the lambda actually used, 0.0 for a
    clean solve. Raises SingularSystemError, carrying the final pivot, when
    every level fails.
    """
    a = check_square(a, "a")
    rhs = check_vector(rhs, "rhs")
    n = a.shape[0]
    if rhs.shape[0] != n:
        raise ValueError(f"rhs length {rhs.shape[0]} does not match system size {n}")
    mean_diag = float(np.trace(a)) / n
    last_pivot = math.nan
    jitters_tried = []
    tol = _PIVOT_RTOL * mean_diag
    for scale in (0.0,) + JITTER_SCALES:
        lam = scale * mean_diag
        jitters_tried.append(lam)
        system = a if lam == 0.0 else a + lam * np.eye(n)
        if n == 1:
            # scalar system: divide directly, avoiding sqrt round-off
            pivot = system[0, 0]
            if not math.isfinite(pivot) or pivot <= tol:
                last_pivot = pivot
                continue
            return rhs / pivot, lam
        try:
            lower = _cholesky(system)
        except _PivotFailure as fail:
            last_pivot = fail.pivot
            continue
        w = _solve_upper(lower.T, _solve_lower(lower, rhs))
        return w, lam
    raise SingularSystemError(
        f"system is singular at every jitter level (final pivot {last_pivot:g})",
        pivot=last_pivot,
        jitters=tuple(jitters_tried),
    )
