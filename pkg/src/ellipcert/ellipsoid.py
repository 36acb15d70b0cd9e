"""Origin-centred ellipsoids in two parameterisations plus scalar bounds.

``ShapeEllipsoid`` is the set G_R = {z : [[1, z^T], [z, R]] >= 0}; it stays
meaningful when R is singular, which is what affine images of full-rank
ellipsoids onto more variables produce.  ``QuadForm`` is the sublevel set
{z : z^T Phi z <= 1}; weakest preconditions land here and may be degenerate
cylinders.  Conversions between the two only happen for definite matrices.
"""

from dataclasses import dataclass
import math

import numpy as np

from .matrix import (DEFAULT_TOL, SingularMatrixError, as_matrix, inf_norm,
                     inverse, is_psd, psd_sqrt, sym_eigen, symmetrize)


class DomainError(ValueError):
    pass


class DegenerateError(DomainError):
    """Raised when a conversion needs a definite matrix and gets a singular one."""


def _vars(vs):
    vs = tuple(vs)
    if len(set(vs)) != len(vs):
        raise DomainError("duplicate variables in %s" % (vs,))
    return vs


@dataclass(frozen=True, eq=False)
class ShapeEllipsoid:
    vars: tuple
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vars", _vars(self.vars))
        R = symmetrize(self.R) if len(self.vars) else np.zeros((0, 0))
        if R.shape != (len(self.vars), len(self.vars)):
            raise DomainError("shape matrix %s does not match %d variables"
                              % (R.shape, len(self.vars)))
        object.__setattr__(self, "R", R)

    @property
    def dim(self):
        return len(self.vars)

    def index(self, v):
        return self.vars.index(v)

    def __repr__(self):
        return "ShapeEllipsoid(%s, %s)" % (self.vars, self.R.tolist())


@dataclass(frozen=True, eq=False)
class QuadForm:
    vars: tuple
    Phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vars", _vars(self.vars))
        Phi = symmetrize(self.Phi) if len(self.vars) else np.zeros((0, 0))
        if Phi.shape != (len(self.vars), len(self.vars)):
            raise DomainError("form matrix %s does not match %d variables"
                              % (Phi.shape, len(self.vars)))
        object.__setattr__(self, "Phi", Phi)

    @property
    def dim(self):
        return len(self.vars)

    def value(self, z):
        z = np.asarray(z, dtype=float)
        return float(z @ self.Phi @ z)

    def __repr__(self):
        return "QuadForm(%s, %s)" % (self.vars, self.Phi.tolist())


@dataclass(frozen=True)
class ScalarBound:
    """Interval fact lo <= var <= hi; a point fact when lo == hi."""

    var: str
    lo: float = -math.inf
    hi: float = math.inf

    @classmethod
    def point(cls, var, k):
        return cls(var, float(k), float(k))

    @classmethod
    def square(cls, var, c):
        if c < 0:
            raise DomainError("sq(%s) <= %r is empty" % (var, c))
        r = math.sqrt(c)
        return cls(var, -r, r)

    @property
    def is_point(self):
        return self.lo == self.hi

    @property
    def bounded(self):
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def is_top(self):
        return self.lo == -math.inf and self.hi == math.inf

    @property
    def sq(self):
        """Smallest c with var^2 <= c implied by the interval."""
        return max(self.lo * self.lo, self.hi * self.hi)

    def contains(self, x, tol=DEFAULT_TOL):
        slack = tol * max(1.0, abs(x))
        return self.lo - slack <= x <= self.hi + slack


def from_quadform(q):
    try:
        R = inverse(q.Phi)
    except SingularMatrixError as e:
        raise DegenerateError("cannot convert degenerate form over %s: %s"
                              % (q.vars, e)) from None
    if not is_psd(R)[0]:
        raise DomainError("form over %s is not positive definite" % (q.vars,))
    return ShapeEllipsoid(q.vars, R)


def to_quadform(g):
    try:
        Phi = inverse(g.R)
    except SingularMatrixError as e:
        raise DegenerateError("flat ellipsoid over %s has no quadratic form: %s"
                              % (g.vars, e)) from None
    return QuadForm(g.vars, Phi)


def is_definite(M, tol=DEFAULT_TOL):
    M = symmetrize(M)
    if M.shape[0] == 0:
        return True
    w, _ = sym_eigen(M)
    return w[0] > tol * max(1.0, inf_norm(M))


def affine_image(g, M, new_vars):
    M = as_matrix(M)
    new_vars = tuple(new_vars)
    if M.shape != (len(new_vars), g.dim):
        raise DomainError("map of shape %s cannot send %d variables to %d"
                          % (M.shape, g.dim, len(new_vars)))
    return ShapeEllipsoid(new_vars, M @ g.R @ M.T)


def selection_matrix(vars_from, vars_to):
    S = np.zeros((len(vars_to), len(vars_from)))
    for i, v in enumerate(vars_to):
        S[i, vars_from.index(v)] = 1.0
    return S


def project(g, keep):
    keep = tuple(v for v in g.vars if v in set(keep))
    return affine_image(g, selection_matrix(g.vars, keep), keep)


def reorder(g, order):
    order = tuple(order)
    if set(order) != set(g.vars):
        raise DomainError("variable mismatch: %s vs %s" % (g.vars, order))
    return affine_image(g, selection_matrix(g.vars, order), order)


def embed(q, order):
    """Zero-pad a quadratic form onto a larger variable tuple."""
    order = tuple(order)
    missing = set(q.vars) - set(order)
    if missing:
        raise DomainError("cannot embed %s into %s" % (q.vars, order))
    S = selection_matrix(order, q.vars)
    return QuadForm(order, S.T @ q.Phi @ S)


def contains(inner, outer, tol=DEFAULT_TOL):
    """G_inner subset of G_outer iff R_outer - R_inner is PSD."""
    if inner.vars != outer.vars:
        raise DomainError("containment needs matching variables: %s vs %s"
                          % (inner.vars, outer.vars))
    return is_psd(outer.R - inner.R, tol)


def containment_witness(inner, outer):
    """Boundary point of ``inner`` lying outside ``outer``, or None."""
    w, V = sym_eigen(outer.R - inner.R)
    if w.size == 0 or w[0] >= 0:
        return None
    d = V[:, 0]
    s = float(d @ inner.R @ d)
    if s <= 0:
        return None
    return inner.R @ d / math.sqrt(s)


def shape_in_quad(g, q, tol=DEFAULT_TOL):
    """Check G_R subset of {z^T Phi z <= 1}; returns (flag, margin, witness).

    margin = 1 - lambda_max(R^1/2 Phi R^1/2); the witness is the boundary point
    of G_R where the form is largest.
    """
    if g.vars != q.vars:
        raise DomainError("containment needs matching variables: %s vs %s"
                          % (g.vars, q.vars))
    if g.dim == 0:
        return True, 1.0, None
    H = psd_sqrt(g.R)
    w, V = sym_eigen(H @ q.Phi @ H)
    margin = 1.0 - float(w[-1])
    z = H @ V[:, -1]
    return margin >= -tol, margin, (z if margin < 0 else None)


def membership(g, z, tol=DEFAULT_TOL):
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != g.dim:
        raise DomainError("point has %d coordinates, ellipsoid has %d" % (z.size, g.dim))
    B = np.zeros((g.dim + 1, g.dim + 1))
    B[0, 0] = 1.0
    B[0, 1:] = z
    B[1:, 0] = z
    B[1:, 1:] = g.R
    w, _ = sym_eigen(B)
    return bool(w[0] >= -tol * max(1.0, inf_norm(B)))


def coord_bound(g, i):
    if isinstance(i, str):
        i = g.index(i)
    r = g.R[i, i]
    if r < 0:
        raise DomainError("negative diagonal entry %r" % r)
    return math.sqrt(r)


def functional_bound(g, c):
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.size != g.dim:
        raise DomainError("functional has %d coefficients, ellipsoid has %d"
                          % (c.size, g.dim))
    return math.sqrt(max(float(c @ g.R @ c), 0.0))


def output_bound_sum(P, C, D):
    """sqrt(2 (C P^-1 C^T + D^2)): bound on |Cx + Dy| for x in E_P, y^2 <= 1."""
    C = np.asarray(C, dtype=float).reshape(-1)
    Pinv = inverse(P)
    return math.sqrt(2.0 * (float(C @ Pinv @ C) + float(D) ** 2))


def merge_product(facts, lambdas):
    """Weaken a conjunction of disjoint facts to one quadratic form.

    A form fact contributes lambda_i * Phi_i, a scalar fact v^2 <= c the entry
    lambda_i / c.  Sum(lambdas) <= 1 keeps the result a superset of the
    intersection.
    """
    lambdas = _check_lambdas(facts, lambdas)
    order = []
    blocks = []
    for f, lam in zip(facts, lambdas):
        if isinstance(f, QuadForm):
            order.extend(f.vars)
            blocks.append(lam * f.Phi)
        elif isinstance(f, ScalarBound):
            c = f.sq
            if not math.isfinite(c):
                raise DomainError("unbounded scalar fact on %s" % f.var)
            if c == 0:
                raise DomainError("zero-radius fact on %s cannot be weighted" % f.var)
            order.append(f.var)
            blocks.append(np.array([[lam / c]]))
        else:
            raise DomainError("cannot merge %r" % (f,))
    return QuadForm(_vars(order), _blockdiag(blocks))


def merge_shape(facts, lambdas):
    """Shape-form twin of merge_product: blocks R_i / lambda_i and c / lambda_i.

    Describes the same set as merge_product when every shape is definite and
    stays valid for flat shapes, which have no quadratic form.
    """
    lambdas = _check_lambdas(facts, lambdas)
    order = []
    blocks = []
    for f, lam in zip(facts, lambdas):
        if isinstance(f, ShapeEllipsoid):
            order.extend(f.vars)
            blocks.append(f.R / lam)
        elif isinstance(f, ScalarBound):
            c = f.sq
            if not math.isfinite(c):
                raise DomainError("unbounded scalar fact on %s" % f.var)
            order.append(f.var)
            blocks.append(np.array([[c / lam]]))
        else:
            raise DomainError("cannot merge %r" % (f,))
    return ShapeEllipsoid(_vars(order), _blockdiag(blocks))


def _check_lambdas(facts, lambdas):
    lambdas = [float(l) for l in lambdas]
    if len(lambdas) != len(facts):
        raise DomainError("%d multipliers for %d facts" % (len(lambdas), len(facts)))
    if any(l <= 0 for l in lambdas):
        raise DomainError("multipliers must be positive: %s" % lambdas)
    if sum(lambdas) > 1.0 + 1e-12:
        raise DomainError("multiplier budget exceeded: sum %r > 1" % sum(lambdas))
    return lambdas


def _blockdiag(blocks):
    n = sum(b.shape[0] for b in blocks)
    M = np.zeros((n, n))
    k = 0
    for b in blocks:
        m = b.shape[0]
        M[k:k + m, k:k + m] = b
        k += m
    return M
