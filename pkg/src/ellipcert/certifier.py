"""S-procedure certificates, counterexample search and Lyapunov checks."""

from dataclasses import dataclass
import math

import numpy as np

from .ellipsoid import (DomainError, QuadForm, ScalarBound, ShapeEllipsoid, embed,
                        is_definite, membership)
from .matrix import DEFAULT_TOL, SingularMatrixError, as_matrix, inf_norm, inverse, is_psd, psd_sqrt, sym_eigen

WITNESS_SAMPLES = 10_000


def _fact_vars(f):
    return (f.var,) if isinstance(f, ScalarBound) else tuple(f.vars)


@dataclass
class Obligation:
    """antecedents (conjunction) => consequent, all origin-centred."""

    antecedents: list
    consequent: QuadForm
    location: str = ""

    @property
    def vars(self):
        out = []
        for f in list(self.antecedents) + [self.consequent]:
            for v in _fact_vars(f):
                if v not in out:
                    out.append(v)
        return tuple(out)

    def __str__(self):
        from .lang.facts import render_fact
        return "{%s} => {%s}" % (", ".join(render_fact(a) for a in self.antecedents),
                                 render_fact(self.consequent))


@dataclass
class Certificate:
    lambdas: tuple
    slack: np.ndarray
    margin: float
    certified: bool
    vars: tuple


def _antecedent_form(a, order):
    """Embedded quadratic form of an antecedent, or None if it cannot weigh in."""
    if isinstance(a, QuadForm):
        return embed(a, order).Phi
    if isinstance(a, ShapeEllipsoid):
        if not is_definite(a.R):
            return None
        return embed(QuadForm(a.vars, inverse(a.R)), order).Phi
    if isinstance(a, ScalarBound):
        c = a.sq
        if not math.isfinite(c) or c == 0:
            return None
        M = np.zeros((len(order), len(order)))
        i = order.index(a.var)
        M[i, i] = 1.0 / c
        return M
    raise DomainError("unsupported antecedent %r" % (a,))


def check_sprocedure(obligation, lambdas, tol=DEFAULT_TOL):
    lambdas = tuple(float(l) for l in lambdas)
    if len(lambdas) != len(obligation.antecedents):
        raise DomainError("%d multipliers for %d antecedents"
                          % (len(lambdas), len(obligation.antecedents)))
    if any(l < 0 for l in lambdas):
        raise DomainError("multipliers must be nonnegative: %s" % (lambdas,))
    if sum(lambdas) > 1 + 1e-12:
        raise DomainError("multiplier budget exceeded: sum %r > 1" % sum(lambdas))
    order = obligation.vars
    slack = -embed(obligation.consequent, order).Phi
    for lam, a in zip(lambdas, obligation.antecedents):
        F = _antecedent_form(a, order)
        if F is not None and lam:
            slack = slack + lam * F
    ok, margin = is_psd(slack, tol)
    return Certificate(lambdas, slack, margin, ok, order)


def search_multipliers(obligation, grid_steps=200, tol=DEFAULT_TOL):
    """Best certificate on the simplex grid; check ``.certified`` on the result."""
    k = len(obligation.antecedents)
    if k == 1:
        grid = [(1.0,)]
    elif k == 2:
        grid = [(i / grid_steps, 1.0 - i / grid_steps) for i in range(grid_steps + 1)]
    else:
        raise DomainError("multiplier search handles 1 or 2 antecedents, got %d" % k)
    best = None
    for lam in grid:
        c = check_sprocedure(obligation, lam, tol)
        if best is None or c.margin > best.margin:
            best = c
    return best


def satisfies(f, values, tol=1e-9):
    """Does the valuation (dict) satisfy fact f?  Missing variables fail."""
    vs = _fact_vars(f)
    if any(v not in values for v in vs):
        return False
    z = np.array([values[v] for v in vs])
    if isinstance(f, ScalarBound):
        return f.contains(z[0], tol)
    if isinstance(f, QuadForm):
        return f.value(z) <= 1.0 + tol
    if isinstance(f, ShapeEllipsoid):
        return membership(f, z, tol)
    raise DomainError("unsupported fact %r" % (f,))


def violates(f, values, tol=1e-9):
    vs = _fact_vars(f)
    z = np.array([values.get(v, 0.0) for v in vs])
    if isinstance(f, QuadForm):
        return f.value(z) > 1.0 + tol
    if isinstance(f, ScalarBound):
        return not f.contains(z[0], tol)
    if isinstance(f, ShapeEllipsoid):
        return not membership(f, z, tol)
    raise DomainError("unsupported fact %r" % (f,))


def validate_witness(values, antecedents, consequent, tol=1e-9):
    return (all(satisfies(a, values, tol) for a in antecedents)
            and violates(consequent, values, tol))


class _Search:
    """Maximise a convex quadratic over a product of ellipsoids and intervals."""

    def __init__(self, order, antecedents, Phi):
        self.order = order
        self.Phi = Phi
        self.shapes, self.intervals = [], []
        covered = set()
        for a in antecedents:
            vs = _fact_vars(a)
            if covered & set(vs):
                continue
            if isinstance(a, ScalarBound):
                if a.bounded:
                    self.intervals.append((order.index(a.var), a.lo, a.hi))
                    covered.add(a.var)
                continue
            if isinstance(a, QuadForm):
                try:
                    R = inverse(a.Phi)
                except SingularMatrixError:
                    continue
            else:
                R = a.R
            idx = np.array([order.index(v) for v in vs])
            self.shapes.append((idx, R, psd_sqrt(R)))
            covered |= set(vs)
        self.free = [i for i, v in enumerate(order) if v not in covered]

    def value(self, z):
        return float(z @ self.Phi @ z)

    def lmo(self, g):
        z = np.zeros(len(self.order))
        for idx, R, _ in self.shapes:
            gb = g[idx]
            s = float(gb @ R @ gb)
            if s > 0:
                z[idx] = R @ gb / math.sqrt(s)
        for i, lo, hi in self.intervals:
            if g[i] > 0 or (g[i] == 0 and abs(hi) >= abs(lo)):
                z[i] = hi
            else:
                z[i] = lo
        return z

    def ascend(self, z, iterations=500):
        f = self.value(z)
        for _ in range(iterations):
            zn = self.lmo(self.Phi @ z)
            fn = self.value(zn)
            if fn <= f * (1 + 1e-15):
                break
            z, f = zn, fn
        return z

    def samples(self, n, rng):
        Z = np.zeros((n, len(self.order)))
        for idx, _, H in self.shapes:
            S = rng.standard_normal((n, len(idx)))
            S /= np.linalg.norm(S, axis=1, keepdims=True)
            Z[:, idx] = S @ H
        for i, lo, hi in self.intervals:
            Z[:, i] = np.where(rng.random(n) < 0.5, lo, hi)
        return Z


def find_counterexample(obligation, seed=0, tol=DEFAULT_TOL, samples=WITNESS_SAMPLES,
                        directions=()):
    """Concrete point satisfying every antecedent and violating the consequent.

    Eigen-directions are tried first, then seeded random samples on the
    antecedent boundary; each candidate is polished by conditional-gradient
    ascent (the objective is convex, so its maximum sits on the boundary).
    Returns an array over ``obligation.vars`` or None.
    """
    order = obligation.vars
    Phi = embed(obligation.consequent, order).Phi
    search = _Search(order, obligation.antecedents, Phi)
    cands = []

    if search.free:
        f = np.array(search.free)
        w, V = sym_eigen(Phi[np.ix_(f, f)])
        if w[-1] > 0:
            z = np.zeros(len(order))
            z[f] = V[:, -1] * 2.0 / math.sqrt(w[-1])
            cands.append(z)

    dirs = [np.asarray(d, dtype=float) for d in directions]
    w, V = sym_eigen(Phi)
    dirs += [V[:, -1], V[:, max(0, len(w) - 2)]]
    for d in dirs:
        for sgn in (1.0, -1.0):
            cands.append(search.ascend(search.lmo(sgn * d)))

    rng = np.random.default_rng(seed)
    Z = search.samples(samples, rng)
    vals = np.einsum("ij,jk,ik->i", Z, Phi, Z)
    for j in np.argsort(-vals, kind="stable")[:5]:
        cands.append(search.ascend(Z[j]))

    cands.sort(key=search.value, reverse=True)
    for z in cands:
        values = dict(zip(order, z.tolist()))
        if validate_witness(values, obligation.antecedents, obligation.consequent, tol):
            return z
    return None


def check_lyapunov_decrease(A, P, tol=DEFAULT_TOL):
    """(A^T P A - P < 0 at tol, -lambda_max(A^T P A - P))."""
    A = as_matrix(A)
    P = as_matrix(P)
    if A.shape[0] != A.shape[1] or P.shape != A.shape:
        raise DomainError("A is %s and P is %s" % (A.shape, P.shape))
    Dv = A.T @ P @ A - P
    w, _ = sym_eigen(Dv)
    margin = -float(w[-1])
    return margin > tol * max(1.0, inf_norm(Dv)), margin
