"""Small dense solves, exact ranks and a Jacobi-preconditioned CG."""

import math
from fractions import Fraction

import numpy as np


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not strictly positive."""

    def __init__(self, pivot, batch_index=None):
        self.pivot = pivot
        self.batch_index = batch_index
        where = "" if batch_index is None else f" (system {batch_index})"
        super().__init__(f"not positive definite: pivot {pivot} is nonpositive{where}")


class ConvergenceError(RuntimeError):
    """CG stopped at the iteration cap before reaching the tolerance."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def cholesky_factor(A):
    """Lower Cholesky factor of one SPD matrix or a stack of them.

    ``A`` has shape (..., m, m). The loop runs over the order, so a whole batch
    of small element matrices is factored at numpy speed.
    """
    A = np.asarray(A, dtype=float)
    batched = A.ndim == 3
    L = np.array(A if batched else A[None], copy=True)
    m = L.shape[-1]
    for k in range(m):
        pivot = L[:, k, k] - np.einsum("bj,bj->b", L[:, k, :k], L[:, k, :k])
        bad = np.nonzero(~(pivot > 0.0))[0]
        if bad.size:
            raise NotPositiveDefinite(k, int(bad[0]) if batched else None)
        d = np.sqrt(pivot)
        L[:, k, k] = d
        below = L[:, k + 1 :, k] - np.einsum("bij,bj->bi", L[:, k + 1 :, :k], L[:, k, :k])
        L[:, k + 1 :, k] = below / d[:, None]
    L = np.tril(L)
    return L if batched else L[0]


def cholesky_solve(A, b):
    """Solve ``A x = b`` for symmetric positive definite ``A`` (optionally batched)."""
    L = cholesky_factor(A)
    b = np.asarray(b, dtype=float)
    batched = L.ndim == 3
    if not batched:
        L, b = L[None], b[None]
    m = L.shape[-1]
    y = np.empty_like(b)
    for i in range(m):
        y[:, i] = (b[:, i] - np.einsum("bj,bj->b", L[:, i, :i], y[:, :i])) / L[:, i, i]
    x = np.empty_like(b)
    for i in reversed(range(m)):
        x[:, i] = (y[:, i] - np.einsum("bj,bj->b", L[:, i + 1 :, i], x[:, i + 1 :])) / L[:, i, i]
    return x if batched else x[0]


def _integer_rows(M):
    rows = []
    for row in M:
        row = [Fraction(v) for v in row]
        scale = math.lcm(*(v.denominator for v in row)) if row else 1
        rows.append([int(v * scale) for v in row])
    return rows


def rational_rank(M):
    """Exact rank of a matrix of rationals by fraction-free (Bareiss) elimination."""
    rows = _integer_rows(M)
    if not rows or not rows[0]:
        return 0
    n_rows, n_cols = len(rows), len(rows[0])
    rank = 0
    prev = 1
    for col in range(n_cols):
        if rank == n_rows:
            break
        pivot_row = next((r for r in range(rank, n_rows) if rows[r][col] != 0), None)
        if pivot_row is None:
            continue
        rows[rank], rows[pivot_row] = rows[pivot_row], rows[rank]
        p = rows[rank][col]
        for r in range(rank + 1, n_rows):
            a = rows[r][col]
            rows[r] = [(p * rows[r][c] - a * rows[rank][c]) // prev for c in range(n_cols)]
        prev = p
        rank += 1
    return rank


def rational_solve(A, b):
    """Exact solution of a nonsingular rational system (Gauss-Jordan over Fraction)."""
    n = len(A)
    M = [[Fraction(v) for v in row] + [Fraction(rhs)] for row, rhs in zip(A, b)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            raise ZeroDivisionError(f"singular matrix at column {col}")
        M[col], M[pivot] = M[pivot], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [row[n] for row in M]


def rational_inverse(A):
    n = len(A)
    cols = [rational_solve(A, [Fraction(int(i == j)) for i in range(n)]) for j in range(n)]
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def cg_max_iterations(n_unknowns):
    return int(20 * math.sqrt(n_unknowns)) + 200


def pcg(A, b, tol=1e-12, maxiter=None, x0=None):
    """Conjugate gradients with a diagonal (Jacobi) preconditioner.

    Stops when ``||b - A x|| <= tol * ||b||``. Returns ``(x, history)`` where
    history holds the relative residual at every iteration. Raises
    ConvergenceError if the cap ``20 sqrt(N) + 200`` is hit first.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if maxiter is None:
        maxiter = cg_max_iterations(n)
    diag = np.asarray(A.diagonal(), dtype=float)
    if np.any(diag <= 0.0):
        raise NotPositiveDefinite(int(np.argmax(diag <= 0.0)))
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), [0.0]
    r = b - A @ x
    history = [np.linalg.norm(r) / bnorm]
    if history[-1] <= tol:
        return x, history
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        history.append(np.linalg.norm(r) / bnorm)
        if history[-1] <= tol:
            # confirm with the true residual; the recurrence can drift
            r = b - A @ x
            history[-1] = np.linalg.norm(r) / bnorm
            if history[-1] <= tol:
                return x, history
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach relative residual {tol:g} in {maxiter} iterations "
        f"(last {history[-1]:.3e})",
        history,
    )
