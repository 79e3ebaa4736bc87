from __future__ import annotations

import numpy as np

from lcsgroupoid.linalg import null_space, numerical_rank, solve


def test_null_space_is_orthonormal_kernel():
    A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    N = null_space(A)
    assert N.shape == (3, 2)
    np.testing.assert_allclose(A @ N, 0.0, atol=1e-12)
    np.testing.assert_allclose(N.T @ N, np.eye(2), atol=1e-12)


def test_numerical_rank():
    assert numerical_rank(np.eye(3)) == 3
    assert numerical_rank(np.outer([1.0, 2.0], [3.0, 4.0])) == 1


def test_solve_consistent_and_inconsistent():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    ok = solve(A, np.array([2.0, 2.0]))
    assert ok.consistent
    np.testing.assert_allclose(A @ ok.x, [2.0, 2.0])
    bad = solve(A, np.array([1.0, 2.0]))
    assert not bad.consistent and bad.residual > 0.1
