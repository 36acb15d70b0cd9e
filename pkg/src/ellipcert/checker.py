"""Independent checking of annotated listings.

Every statement becomes a Hoare triple {pre} s {post}; the loop adds an
entry edge, a back edge and the exit fact, which must be ``false``.  Each
triple is reduced to implications between facts and discharged by the
cheapest sufficient test: syntactic match, point evaluation, containment,
the S-procedure, and finally a concrete counterexample search.
"""

from dataclasses import dataclass, field
from itertools import combinations
import math

import numpy as np

from . import certifier
from .analyzer import AnalysisError, AbstractState, TOP, transfer_assign, transfer_guard_join, wp_assign
from .ellipsoid import (QuadForm, ScalarBound, ShapeEllipsoid, contains,
                        is_definite, project, shape_in_quad, to_quadform)
from .lang import FALSE, TRUE, read_annotated
from .lang.syntax import Assign, Guard, Input, Output, Skip, writes
from .matrix import inverse

PASS, FAIL, UNPROVEN = "PASS", "FAIL", "UNPROVEN"
_RANK = {PASS: 0, UNPROVEN: 1, FAIL: 2}


@dataclass
class Outcome:
    """Result of one implication antecedents => consequent."""

    status: str
    margin: float
    method: str
    witness: dict = None
    obligation: object = None
    certificate: object = None


@dataclass
class CheckLine:
    line: int
    kind: str
    status: str
    margin: float
    witness: dict = None
    outcomes: list = field(default_factory=list)

    def render(self):
        s = "%d:%s margin=%s" % (self.line, self.status, _g(self.margin))
        if self.witness:
            s += " witness=" + ",".join("%.17g" % v for v in self.witness.values())
        return s


@dataclass
class CheckReport:
    lines: list

    @property
    def ok(self):
        return all(l.status == PASS for l in self.lines)

    @property
    def failures(self):
        return [l for l in self.lines if l.status != PASS]

    def render(self):
        return "".join(l.render() + "\n" for l in self.lines)


def _g(x):
    return "%.6g" % x


def _fvars(f):
    if isinstance(f, (QuadForm, ShapeEllipsoid)):
        return set(f.vars)
    if isinstance(f, ScalarBound):
        return {f.var}
    return set()


def _pass(margin, method):
    return Outcome(PASS, margin, method)


# ---------------------------------------------------------------- entailment

def _points(facts):
    pts = {}
    for f in facts:
        if isinstance(f, ScalarBound) and f.is_point:
            pts[f.var] = f.lo
    return pts


def _same_quad(a, c):
    if not isinstance(a, QuadForm) or set(a.vars) != set(c.vars):
        return False
    idx = [a.vars.index(v) for v in c.vars]
    A = a.Phi[np.ix_(idx, idx)]
    scale = max(1.0, float(np.max(np.abs(c.Phi))))
    return bool(np.max(np.abs(A - c.Phi)) <= 1e-12 * scale)


def _as_shape(f):
    if isinstance(f, ShapeEllipsoid):
        return f
    if isinstance(f, QuadForm) and is_definite(f.Phi):
        return ShapeEllipsoid(f.vars, inverse(f.Phi))
    return None


def _scalar_entails(antecedents, c, tol):
    pts = _points(antecedents)
    if c.var in pts:
        x = pts[c.var]
        m = min(x - c.lo, c.hi - x)
        return Outcome(PASS if m >= -tol else FAIL, m, "point",
                       witness=None if m >= -tol else _point_witness(antecedents, c.var))
    for a in antecedents:
        if isinstance(a, ScalarBound) and a.var == c.var:
            if a.lo >= c.lo - tol and a.hi <= c.hi + tol:
                return _pass(min(a.lo - c.lo, c.hi - a.hi), "interval")
    return None


def _point_witness(antecedents, var):
    values = {}
    for f in antecedents:
        for v in _fvars(f):
            values.setdefault(v, 0.0)
    values.update(_points(antecedents))
    return values


def entails(antecedents, consequent, config):
    """Decide antecedents => consequent; never reports FAIL without a valid witness."""
    tol = config.tol
    ants = [a for a in antecedents if a is not TRUE]
    if consequent is TRUE or any(a is FALSE for a in ants):
        return _pass(math.inf, "trivial")
    if consequent is FALSE:
        values = _point_witness(ants, None)
        if all(certifier.satisfies(a, values, tol) for a in ants):
            return Outcome(FAIL, -math.inf, "reachable", witness=values)
        return Outcome(UNPROVEN, -math.inf, "reachable")
    ants = [a for a in ants if not (isinstance(a, ScalarBound) and a.is_top)]

    if isinstance(consequent, ScalarBound):
        out = _scalar_entails(ants, consequent, tol)
        if out is not None:
            return out
        r = min(-consequent.lo, consequent.hi)
        if consequent.is_point or not r > 0:
            return Outcome(UNPROVEN, -math.inf, "interval")
        q = QuadForm((consequent.var,), np.array([[1.0 / (r * r)]]))
        return _quad_entails(ants, q, config)

    if isinstance(consequent, ShapeEllipsoid):
        best = None
        for a in ants:
            g = _as_shape(a)
            if g is None or not set(consequent.vars) <= set(g.vars):
                continue
            ok, m = contains(project(g, consequent.vars), consequent, tol)
            if ok:
                return _pass(m, "containment")
            best = m if best is None else max(best, m)
        if is_definite(consequent.R):
            return _quad_entails(ants, to_quadform(consequent), config)
        return Outcome(UNPROVEN, best if best is not None else -math.inf, "containment")

    return _quad_entails(ants, consequent, config)


def _quad_entails(ants, c, config):
    tol = config.tol
    if any(_same_quad(a, c) for a in ants):
        return _pass(0.0, "syntactic")
    if not c.dim or not np.any(c.Phi):
        return _pass(1.0, "trivial")

    pts = _points(ants)
    if all(v in pts for v in c.vars):
        val = c.value(np.array([pts[v] for v in c.vars]))
        m = 1.0 - val
        if m >= -tol:
            return _pass(m, "point")
        return Outcome(FAIL, m, "point", witness=_point_witness(ants, None))
    # zero-valued points drop out of a centred quadratic form
    zero = [v for v in c.vars if pts.get(v) == 0.0]
    if zero:
        keep = [i for i, v in enumerate(c.vars) if v not in zero]
        c = QuadForm(tuple(c.vars[i] for i in keep), c.Phi[np.ix_(keep, keep)])

    for a in ants:
        g = _as_shape(a)
        if g is None or not set(c.vars) <= set(g.vars):
            continue
        ok, m, _ = shape_in_quad(project(g, c.vars), c, tol)
        if ok:
            return _pass(m, "containment")

    relevant = [a for a in ants if _fvars(a) & set(c.vars)
                and certifier._antecedent_form(a, tuple(_fvars(a))) is not None]
    best = None
    for k in (1, 2):
        for sub in combinations(relevant, k):
            ob = certifier.Obligation(list(sub), c)
            cert = _best_certificate(ob, config)
            if best is None or cert.margin > best[1].margin:
                best = (ob, cert)
            if cert.certified:
                return Outcome(PASS, cert.margin, "s-procedure", obligation=ob, certificate=cert)
    if len(config.lambdas) == len(ants) and len(ants) > 2:
        ob = certifier.Obligation(ants, c)
        cert = certifier.check_sprocedure(ob, config.lambdas, tol)
        if cert.certified:
            return Outcome(PASS, cert.margin, "s-procedure", obligation=ob, certificate=cert)
        if best is None or cert.margin > best[1].margin:
            best = (ob, cert)

    margin = best[1].margin if best else -math.inf
    full = certifier.Obligation(ants, c)
    z = certifier.find_counterexample(full, seed=config.seed, tol=tol)
    if z is not None:
        return Outcome(FAIL, margin, "counterexample", witness=dict(zip(full.vars, z.tolist())),
                       obligation=full, certificate=best[1] if best else None)
    return Outcome(UNPROVEN, margin, "s-procedure", obligation=full,
                   certificate=best[1] if best else None)


def _best_certificate(ob, config):
    best = None
    for lam in _grid(len(ob.antecedents), config.grid_steps):
        cert = certifier.check_sprocedure(ob, lam, config.tol)
        if best is None or cert.margin > best.margin:
            best = cert
    return best


def _grid(k, steps):
    if k == 1:
        return [(1.0,)]
    return [(i / steps, 1.0 - i / steps) for i in range(steps + 1)]


# ---------------------------------------------------------------- triples

def _combine(kind, line, outcomes):
    status = PASS
    margin = math.inf
    witness = None
    for o in outcomes:
        if _RANK[o.status] > _RANK[status]:
            status = o.status
        margin = min(margin, o.margin)
        if o.status == FAIL and witness is None:
            witness = o.witness
    return CheckLine(line, kind, status, margin, witness, list(outcomes))


def _check_assign(stmt, pre, post, config):
    outs = []
    v = stmt.var
    for c in post:
        if c is TRUE:
            continue
        if v not in _fvars(c):
            outs.append(entails(pre, c, config))
            continue
        if isinstance(c, ShapeEllipsoid):
            o = _forward_assign(stmt, pre, c, config)
            if o.status == PASS or not is_definite(c.R):
                outs.append(o)
                continue
            c = to_quadform(c)
        if isinstance(c, ScalarBound):
            outs.append(_assign_scalar(stmt, pre, c, config))
        else:
            try:
                outs.append(entails(pre, wp_assign(c, stmt), config))
            except AnalysisError:
                outs.append(Outcome(UNPROVEN, -math.inf, "wp"))
    return outs


def _assign_scalar(stmt, pre, c, config):
    """Post-fact on the assigned variable: substitute the expression."""
    pts = _points(pre)
    const = stmt.expr.const
    linear = {}
    for w, k in stmt.expr.coeffs().items():
        if k == 0:
            continue
        if w in pts:
            const += k * pts[w]
        else:
            linear[w] = k
    if not linear:
        m = min(const - c.lo, c.hi - const)
        if m >= -config.tol:
            return _pass(m, "point")
        return Outcome(FAIL, m, "point", witness=_point_witness(pre, None))
    r = min(-c.lo, c.hi)
    if const != 0 or c.is_point or not r > 0:
        return Outcome(UNPROVEN, -math.inf, "interval")
    ws = tuple(linear)
    a = np.array([linear[w] for w in ws])
    return entails(pre, QuadForm(ws, np.outer(a, a) / (r * r)), config)


def _forward_assign(stmt, pre, c, config):
    pts = _points(pre)
    needed = {w for w, k in stmt.expr.coeffs().items() if k != 0 and w not in pts}
    best = Outcome(UNPROVEN, -math.inf, "forward")
    for a in pre:
        g = _as_shape(a)
        if g is None or not needed <= set(g.vars):
            continue
        st = AbstractState(joint=g, scalars={v: ScalarBound.point(v, k) for v, k in pts.items()
                                              if v not in g.vars})
        try:
            img = transfer_assign(st, stmt).joint
        except AnalysisError:
            continue
        if img is None or not set(c.vars) <= set(img.vars):
            continue
        ok, m = contains(project(img, c.vars), c, config.tol)
        if ok:
            return _pass(m, "forward")
        if m > best.margin:
            best = Outcome(UNPROVEN, m, "forward")
    return best


def _check_guard(stmt, pre, post, config):
    touched = {stmt.var} | set().union(*(writes(s) for s in stmt.body))
    st = AbstractState(scalars={})
    for f in pre:
        if isinstance(f, ScalarBound) and f.var in touched:
            old = st.scalars.get(f.var)
            st.scalars[f.var] = f if old is None else ScalarBound(
                f.var, max(f.lo, old.lo), min(f.hi, old.hi))
    for v in touched:
        st.scalars.setdefault(v, TOP)
    try:
        out = transfer_guard_join(st, stmt)
    except AnalysisError:
        return [Outcome(UNPROVEN, -math.inf, "guard")]
    kept = [f for f in pre if not (_fvars(f) & touched)]
    if not out.reachable:
        kept = [FALSE]
    else:
        kept += [b for b in out.scalars.values() if b is not TOP and not b.is_top]
    return [entails(kept, c, config) for c in post if c is not TRUE]


def _check_input(stmt, pre, post, config):
    kept = [f for f in pre if stmt.var not in _fvars(f)]
    return [entails(kept, c, config) for c in post if c is not TRUE]


def _check_implication(pre, post, config):
    return [entails(pre, c, config) for c in post if c is not TRUE]


def check_annotations(program, facts, config, where=None):
    """Check every triple and loop edge of an annotated program."""
    if len(facts) != program.n_points:
        raise ValueError("expected %d fact lists, got %d" % (program.n_points, len(facts)))
    lines = []
    ni = len(program.init)

    def line_of(s, default):
        return s.line if s is not None and s.line else default

    for i, s in enumerate(program.init):
        lines.append(_combine("stmt", line_of(s, i + 1),
                              _check_stmt(s, facts[i], facts[i + 1], config)))
    head = facts[ni]
    body_start = ni + 1
    body_end = ni + 1 + len(program.body)
    lines.append(_combine("entry", program.loop_line,
                          _check_implication(head, facts[body_start], config)))
    for j, s in enumerate(program.body):
        p = body_start + j
        lines.append(_combine("stmt", line_of(s, p), _check_stmt(s, facts[p], facts[p + 1], config)))
    lines.append(_combine("back", program.close_line,
                          _check_implication(facts[body_end], head, config)))
    exit_facts = facts[body_end + 1]
    ok = any(f is FALSE for f in exit_facts)
    exit_line = where[-1] if where else program.close_line
    lines.append(CheckLine(exit_line, "exit", PASS if ok else FAIL, math.inf if ok else -math.inf))
    return CheckReport(lines)


def _check_stmt(s, pre, post, config):
    if isinstance(s, Assign):
        return _check_assign(s, pre, post, config)
    if isinstance(s, Input):
        return _check_input(s, pre, post, config)
    if isinstance(s, Guard):
        return _check_guard(s, pre, post, config)
    if isinstance(s, (Output, Skip)):
        return _check_implication(pre, post, config)
    raise TypeError("unknown statement %r" % (s,))


def check_listing(text, config):
    """Parse an annotated listing and check it."""
    program, facts, where = read_annotated(text)
    return check_annotations(program, facts, config, where)


def describe(outcome):
    if outcome.obligation is None:
        return outcome.method
    return "%s: %s" % (outcome.method, outcome.obligation)
