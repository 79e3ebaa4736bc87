"""Small dense linear algebra: kernels, consistent solves, symbolic elimination."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import expr as X
from .errors import DomainError, SingularForm

DEFAULT_TOL = 1e-10


def _svd(A: np.ndarray):
    return np.linalg.svd(A, full_matrices=True)


def numerical_rank(A: np.ndarray, tol: float = DEFAULT_TOL) -> int:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def null_space(A, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal kernel basis as the columns of a ``(cols, k)`` array.

    Singular values at or below ``tol * s_max`` count as zero.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    rows, cols = A.shape
    if rows == 0:
        return np.eye(cols)
    _, s, vt = _svd(A)
    r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return vt[r:].T.copy()


@dataclass(frozen=True)
class Solution:
    x: np.ndarray
    consistent: bool
    residual: float


def solve(A, b, tol: float = DEFAULT_TOL) -> Solution:
    """Minimum-norm least-squares solution of ``A x = b`` with a consistency flag."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    keep = s > tol * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    coef = np.zeros_like(s)
    coef[keep] = (u[:, keep].T @ b) / s[keep]
    x = vt.T @ coef
    res = float(np.linalg.norm(A @ x - b))
    norm_a = float(s[0]) if s.size else 0.0
    bound = 10.0 * tol * (norm_a * float(np.linalg.norm(x)) + float(np.linalg.norm(b)))
    return Solution(x, res <= bound, res)


# ----------------------------------------------------------- symbolic solve

def _score(e: X.Expr, probe: Callable[[X.Expr], np.ndarray]) -> float:
    if X.is_zero(e):
        return 0.0
    if e.is_const:
        return np.inf
    try:
        vals = probe(e)
    except DomainError:
        return 0.0
    return float(np.min(np.abs(vals)))


def solve_symbolic(
    A: Sequence[Sequence[X.Expr]],
    B: Sequence[Sequence[X.Expr]],
    probe: Callable[[X.Expr], np.ndarray],
    tol: float = 1e-9,
) -> tuple[list[list[X.Expr]], list[X.Expr]]:
    """Gauss-Jordan elimination of ``A X = B`` over expression entries.

    Pivots are chosen by evaluating candidates at a few probe points (constant
    entries win), so no symbolic zero-testing is needed.  Returns the solution
    rows and the pivot list; the product of pivots is, up to sign, the
    determinant and serves as the sampling guard.  Raises SingularForm if a
    column has no pivot that is nonzero at every probe point.
    """
    n = len(A)
    if any(len(r) != n for r in A):
        raise ValueError("solve_symbolic needs a square matrix")
    M = [list(A[i]) + list(B[i]) for i in range(n)]
    pivots: list[X.Expr] = []
    for k in range(n):
        scores = [_score(M[i][k], probe) for i in range(k, n)]
        best = int(np.argmax(scores))
        if scores[best] <= tol:
            raise SingularForm(f"matrix is singular in column {k} at the probe points")
        p = k + best
        M[k], M[p] = M[p], M[k]
        piv = M[k][k]
        pivots.append(piv if p == k else X.neg(piv))
        M[k] = [X.ONE if j == k else X.div(M[k][j], piv) for j in range(len(M[k]))]
        for i in range(n):
            if i == k or X.is_zero(M[i][k]):
                continue
            f = M[i][k]
            M[i] = [X.ZERO if j == k else X.sub(M[i][j], X.mul(f, M[k][j])) for j in range(len(M[i]))]
    return [row[n:] for row in M], pivots


def probe_for(chart: X.Chart, count: int = 5, seed: int = 0x5EED) -> Callable[[X.Expr], np.ndarray]:
    pts = X.sample_array(chart, count, seed)
    env = chart.env(pts)

    def probe(e: X.Expr) -> np.ndarray:
        return np.asarray(X.evaluate_many([e], env, size=count)[0])

    return probe
