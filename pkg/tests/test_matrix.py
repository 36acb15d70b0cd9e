import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ellipcert.matrix import (ConvergenceError, SingularMatrixError, inverse, is_psd,
                              psd_sqrt, sym_eigen, symmetrize)
from helpers import A_LL, P_LL

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(n):
    return arrays(np.float64, (n, n), elements=finite)


def test_diagonal_eigenvalues():
    w, V = sym_eigen(np.diag([3.0, 1.0]))
    assert w.tolist() == [1.0, 3.0]
    assert np.allclose(np.abs(V), [[0, 1], [1, 0]])


def test_two_by_two_eigenvalues():
    w, _ = sym_eigen([[1.0, 2.0], [2.0, 1.0]])
    assert np.allclose(w, [-1.0, 3.0], atol=1e-12)


def test_lyapunov_matrix_eigenvalues_match_quadratic_formula():
    # roots of l^2 - 10.03 l + 0.26
    tr, det = 10.03, 0.03 * 10.0 - 0.2 * 0.2
    disc = np.sqrt(tr * tr - 4 * det)
    expected = [(tr - disc) / 2, (tr + disc) / 2]
    w, _ = sym_eigen(P_LL)
    assert np.allclose(w, expected, rtol=1e-12)
    assert abs(w[0] - 0.0260) < 5e-5 and abs(w[1] - 10.0040) < 5e-5


def test_symmetrize_averages():
    S = symmetrize([[1.0, 2.0], [4.0, 1.0]])
    assert S[0, 1] == S[1, 0] == 3.0


def test_is_psd_examples():
    assert is_psd(np.eye(3), 1e-9) == (True, 1.0)
    ok, lmin = is_psd([[1.0, 2.0], [2.0, 1.0]], 1e-9)
    assert not ok and lmin == pytest.approx(-1.0)


def test_lyapunov_difference_is_negative_definite():
    D = A_LL.T @ P_LL @ A_LL - P_LL
    # hand 2x2 arithmetic
    a, b, c, d = 0.499, -0.05, 0.01, 1.0
    p, q, r = 0.03, 0.2, 10.0
    d00 = a * (a * p + c * q) + c * (a * q + c * r) - p
    d01 = a * (b * p + d * q) + c * (b * q + d * r) - q
    d11 = b * (b * p + d * q) + d * (b * q + d * r) - r
    assert np.allclose(D, [[d00, d01], [d01, d11]], atol=1e-15)
    ok, lmin = is_psd(-D, 1e-9)
    assert ok and lmin > 0


def test_inverse_examples():
    assert np.array_equal(inverse(np.eye(3)), np.eye(3))
    M = np.eye(2) - A_LL
    expected = (1 / 0.0005) * np.array([[0.0, -0.05], [0.01, 0.501]])
    assert np.allclose(inverse(M), expected, rtol=1e-9)
    with pytest.raises(SingularMatrixError):
        inverse([[1.0, 1.0], [1.0, 1.0]])


def test_inverse_rejects_nonsquare():
    with pytest.raises(ValueError):
        inverse(np.ones((2, 3)))


def test_psd_sqrt_squares_back():
    R = psd_sqrt(P_LL)
    assert np.allclose(R @ R, P_LL, atol=1e-12)


def test_eigensolver_handles_wide_dynamic_range():
    S = np.diag([1e12, 1.0, 1e-6])
    S[0, 1] = S[1, 0] = 1e-3
    w, V = sym_eigen(S)
    assert np.allclose(S @ V, V * w, atol=1e-10 * np.max(np.abs(S)))


def test_convergence_error_is_a_matrix_error():
    assert issubclass(ConvergenceError, ValueError)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(square))
def test_reconstruction_and_orthonormality(M):
    S = (M + M.T) / 2
    w, V = sym_eigen(S)
    scale = max(1.0, np.max(np.sum(np.abs(S), axis=1)))
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(V.T @ V, np.eye(len(w)), atol=1e-10)
    assert np.allclose(S @ V, V * w, atol=1e-10 * scale)
    assert np.allclose(V @ np.diag(w) @ V.T, S, atol=1e-9 * scale)
    # general solver as oracle: the symmetric LAPACK driver loses digits
    # when tiny entries sit next to order-one ones
    assert np.allclose(w, np.sort(np.linalg.eigvals(S).real), atol=1e-9 * scale)


def test_tiny_entries_next_to_unit_ones():
    e = 8.28651501e-161
    S = np.array([[e, 0.5, 1.0], [0.5, e, e], [1.0, e, e]])
    w, V = sym_eigen(S)
    assert np.allclose(w, [-np.sqrt(1.25), 0.0, np.sqrt(1.25)], atol=1e-14)
    assert np.allclose(S @ V, V * w, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: arrays(np.float64, (n + 1, n), elements=finite)))
def test_gram_matrices_are_psd(M):
    assert is_psd(M.T @ M, 1e-9)[0]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(square))
def test_inverse_round_trip(M):
    M = M + np.eye(M.shape[0]) * (np.sum(np.abs(M)) + 1.0)  # diagonally dominant
    assert np.allclose(inverse(inverse(M)), M, rtol=1e-8, atol=1e-8)
    assert np.allclose(inverse(M), np.linalg.inv(M), rtol=1e-9, atol=1e-12)
