"""Small dense linear algebra: Jacobi eigensolver, PSD tests, inversion.

Matrices are plain float64 numpy arrays.  Everything here is meant for the
tiny systems that show up in controller code (a handful of states), so the
algorithms favour determinism over speed.
"""

import numpy as np

DEFAULT_TOL = 1e-9
MAX_SWEEPS = 100


class MatrixError(ValueError):
    pass


class SingularMatrixError(MatrixError):
    pass


class ConvergenceError(MatrixError):
    pass


def as_matrix(M):
    """Return M as a finite 2-D float array (vectors become columns)."""
    A = np.array(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise MatrixError("expected a 2-D matrix, got shape %s" % (A.shape,))
    if not np.all(np.isfinite(A)):
        raise MatrixError("matrix has non-finite entries")
    return A


def symmetrize(M):
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise MatrixError("symmetric matrix must be square, got %s" % (A.shape,))
    return (A + A.T) / 2.0


def inf_norm(M):
    A = np.asarray(M, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(A), axis=1)))


def _off_norm(A):
    off = A - np.diag(np.diag(A))
    return float(np.sqrt(np.sum(off * off)))


def sym_eigen(S):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with ``w`` ascending and the columns of ``V`` the
    matching orthonormal eigenvectors.
    """
    A = symmetrize(S)
    n = A.shape[0]
    V = np.eye(n)
    if n == 0:
        return np.zeros(0), V
    fro = np.sqrt(np.sum(A * A))
    if fro == 0.0:
        return np.zeros(n), V
    target = 1e-12 * fro

    for _ in range(MAX_SWEEPS):
        if _off_norm(A) < target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                # smaller root of t^2 + 2 t theta - 1 = 0
                if diff == 0.0:
                    t = 1.0
                elif abs(diff) > 1e150 * abs(apq):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = c
                J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                A[p, q] = A[q, p] = 0.0
                V = V @ J
    else:
        off = _off_norm(A)
        if off >= target:
            raise ConvergenceError(
                "Jacobi eigensolver did not converge in %d sweeps "
                "(off-diagonal norm %.3e)" % (MAX_SWEEPS, off))

    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def is_psd(S, tol=DEFAULT_TOL):
    """PSD test with relative tolerance; returns (flag, min eigenvalue)."""
    if tol < 0:
        raise MatrixError("tolerance must be nonnegative")
    A = symmetrize(S)
    if A.shape[0] == 0:
        return True, 0.0
    w, _ = sym_eigen(A)
    lmin = float(w[0])
    return lmin >= -tol * max(1.0, inf_norm(A)), lmin


def inverse(M):
    """Gauss-Jordan inversion with partial pivoting."""
    A = as_matrix(M)
    n, m = A.shape
    if n != m:
        raise MatrixError("cannot invert a %dx%d matrix" % (n, m))
    scale = inf_norm(A)
    if scale == 0.0:
        raise SingularMatrixError("matrix is zero")
    W = np.hstack([A, np.eye(n)])
    for k in range(n):
        piv = k + int(np.argmax(np.abs(W[k:, k])))
        if abs(W[piv, k]) < 1e-12 * scale:
            raise SingularMatrixError(
                "pivot %.3e below 1e-12*||M|| in column %d" % (abs(W[piv, k]), k))
        if piv != k:
            W[[k, piv]] = W[[piv, k]]
        W[k] = W[k] / W[k, k]
        for i in range(n):
            if i != k and W[i, k] != 0.0:
                W[i] = W[i] - W[i, k] * W[k]
    return W[:, n:].copy()


def psd_sqrt(S):
    """Symmetric square root of a PSD matrix (negative eigenvalues clipped)."""
    w, V = sym_eigen(S)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def max_eig(S):
    w, V = sym_eigen(S)
    return float(w[-1]), V[:, -1]


def min_eig(S):
    w, V = sym_eigen(S)
    return float(w[0]), V[:, 0]
