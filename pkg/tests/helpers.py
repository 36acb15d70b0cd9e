"""Shared fixtures-by-function and independent oracles for the test suite.

Oracles here use numpy/scipy directly and never call the package's own
linear algebra, so agreement is evidence rather than tautology.
"""

from pathlib import Path

import numpy as np

from ellipcert.ellipsoid import QuadForm, ScalarBound
from ellipcert.lang import parse

CORPUS = Path(__file__).resolve().parents[1] / "src" / "ellipcert" / "corpus"

A_LL = np.array([[0.499, -0.05], [0.01, 1.0]])
B_LL = np.array([[1.0], [0.0]])
C_LL = np.array([[564.48, 0.0]])
D_LL = -1280.0
P_LL = np.array([[0.03, 0.2], [0.2, 10.0]])
LAMBDAS_LL = (0.01, 0.99)
AC_LL = np.array([[-50.1, -5.0], [1.0, 0.0]])
BC_LL = np.array([[100.0], [0.0]])


def corpus_text(name):
    return (CORPUS / name).read_text()


def corpus_program(name):
    return parse(corpus_text(name))


def q_matrix(P, lambdas):
    """blkdiag(l1 P, l2) written out by hand."""
    n = P.shape[0]
    Q = np.zeros((n + 1, n + 1))
    Q[:n, :n] = lambdas[0] * P
    Q[n, n] = lambdas[1]
    return Q


def quad_value(P, x):
    x = np.asarray(x, dtype=float)
    return float(x @ P @ x)


def transcribe(A, B):
    """Controller program x := A x + B SAT(y) with copy buffers, as text."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(-1)
    n = A.shape[0]
    lines = ["x%d := 0;" % i for i in range(n)]
    lines += ["loop {", "  input y;", "  if (y > 1) {", "    y := 1;", "  }",
              "  if (y < -1) {", "    y := -1;", "  }"]
    lines += ["  xb%d := x%d;" % (i, i) for i in range(n)]
    for i in range(n):
        terms = ["%r*xb%d" % (float(A[i, j]), j) for j in range(n)] + ["%r*y" % float(B[i])]
        lines.append("  x%d := %s;" % (i, " + ".join(terms)))
    lines.append("}")
    return "\n".join(lines).replace("+ -", "- ") + "\n"


def random_stable(rng, n, rho=0.95):
    A = rng.standard_normal((n, n))
    r = max(abs(np.linalg.eigvals(A)))
    return A * (rng.uniform(0.1, rho) / r)


def dlyap(A):
    """A^T X A - X = -I via scipy (oracle for the package's iteration)."""
    from scipy.linalg import solve_discrete_lyapunov
    return solve_discrete_lyapunov(A.T, np.eye(A.shape[0]))


def _fact_vars(f):
    return (f.var,) if isinstance(f, ScalarBound) else tuple(f.vars)


def holds_mask(f, Z, order, tol=0.0):
    """Vectorized membership of the rows of Z (columns follow ``order``)."""
    idx = [order.index(v) for v in _fact_vars(f)]
    X = Z[:, idx]
    if isinstance(f, ScalarBound):
        return (X[:, 0] >= f.lo - tol) & (X[:, 0] <= f.hi + tol)
    if isinstance(f, QuadForm):
        return np.einsum("ij,jk,ik->i", X, f.Phi, X) <= 1 + tol
    # shape form: z in range(R) and z^T R^+ z <= 1
    pinv = np.linalg.pinv(f.R)
    proj = X @ (f.R @ pinv).T
    resid = np.linalg.norm(proj - X, axis=1)
    scale = np.maximum(1.0, np.linalg.norm(X, axis=1))
    return (resid <= 1e-7 * scale) & (np.einsum("ij,jk,ik->i", X, pinv, X) <= 1 + tol)


def sample_antecedents(antecedents, order, n, seed=0, tol=0.0, max_rounds=200):
    """Rejection sampler for points satisfying every antecedent.

    Each variable is drawn from the first definite ellipsoid or bounded
    interval that covers it (uniformly inside the ellipsoid, with extra mass
    on the boundary); uncovered variables are Gaussian.  Points violating
    any antecedent are rejected.  Returns an (m, len(order)) array, m <= n.
    """
    rng = np.random.default_rng(seed)
    blocks, covered = [], set()
    for a in antecedents:
        vs = _fact_vars(a)
        if covered & set(vs):
            continue
        if isinstance(a, ScalarBound):
            if np.isfinite(a.lo) and np.isfinite(a.hi):
                blocks.append(("iv", [order.index(a.var)], (a.lo, a.hi)))
                covered.add(a.var)
            continue
        if isinstance(a, QuadForm):
            w = np.linalg.eigvalsh(a.Phi)
            if w[0] <= 1e-12 * max(1.0, w[-1]):
                continue
            R = np.linalg.inv(a.Phi)
        else:
            R = a.R
        w, V = np.linalg.eigh(R)
        H = V @ np.diag(np.sqrt(np.clip(w, 0, None))) @ V.T
        blocks.append(("el", [order.index(v) for v in vs], H))
        covered |= set(vs)
    free = [i for i, v in enumerate(order) if v not in covered]
    out = []
    for _ in range(max_rounds):
        Z = np.zeros((n, len(order)))
        for kind, idx, data in blocks:
            if kind == "iv":
                lo, hi = data
                Z[:, idx[0]] = rng.uniform(lo, hi, n)
                edge = rng.random(n) < 0.2
                Z[edge, idx[0]] = np.where(rng.random(edge.sum()) < 0.5, lo, hi)
            else:
                d = len(idx)
                S = rng.standard_normal((n, d))
                S /= np.linalg.norm(S, axis=1, keepdims=True)
                r = rng.random(n) ** (1.0 / d)
                r[rng.random(n) < 0.3] = 1.0
                Z[:, idx] = (S * r[:, None]) @ data
        for i in free:
            Z[:, i] = rng.standard_normal(n) * 10.0
        ok = np.ones(n, dtype=bool)
        for a in antecedents:
            ok &= holds_mask(a, Z, order, tol)
        out.extend(Z[ok])
        if len(out) >= n:
            return np.array(out[:n])
    return np.array(out).reshape(-1, len(order))


def execute(stmt, Z, order, rng):
    """Run one statement on every row of Z (columns follow ``order``), in place."""
    from ellipcert.lang import Assign, Guard, Input, Output, Skip
    if isinstance(stmt, Assign):
        col = np.zeros(len(Z))
        for c, v in stmt.expr.terms:
            col = col + (c if v is None else c * Z[:, order.index(v)])
        Z[:, order.index(stmt.var)] = col
    elif isinstance(stmt, Input):
        Z[:, order.index(stmt.var)] = rng.uniform(-3.0, 3.0, len(Z))
    elif isinstance(stmt, Guard):
        x = Z[:, order.index(stmt.var)]
        mask = {">": x > stmt.const, "<": x < stmt.const,
                ">=": x >= stmt.const, "<=": x <= stmt.const}[stmt.op]
        sub = Z[mask]
        for s in stmt.body:
            execute(s, sub, order, rng)
        Z[mask] = sub
    elif not isinstance(stmt, (Output, Skip)):
        raise TypeError(stmt)
    return Z
