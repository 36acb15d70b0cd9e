"""Forward and backward ellipsoid analysis of controller programs.

The forward pass pushes the loop-head ellipsoid E_P through one iteration
of the body with shape-form transfers and checks that the result lands back
inside E_P.  The backward pass pulls E_P back through the body as weakest
preconditions and discharges the remaining implication with the S-procedure.
Both passes annotate every program point so the listing can be re-checked
independently.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import certifier
from .ellipsoid import (DomainError, QuadForm, ScalarBound, ShapeEllipsoid,
                        affine_image, contains, coord_bound,
                        functional_bound, merge_shape, selection_matrix)
from .lang import TRUE, FALSE, emit_annotated, interpret
from .lang.syntax import (Assign, Guard, Input, Output, Program, Skip,
                          reads, writes)
from .matrix import DEFAULT_TOL, inverse, symmetrize

TOP = None  # marker for an unconstrained scalar in AbstractState.scalars


class AnalysisError(Exception):
    def __init__(self, message, line=0):
        self.line = line
        super().__init__("line %d: %s" % (line, message) if line else message)


@dataclass
class AnalysisConfig:
    P: np.ndarray
    lambdas: tuple = ()
    direction: str = "forward"
    tol: float = DEFAULT_TOL
    search: bool = False
    grid_steps: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.P is not None:
            self.P = symmetrize(self.P)
        self.lambdas = tuple(float(l) for l in self.lambdas)
        if any(l <= 0 for l in self.lambdas):
            raise DomainError("multipliers must be positive: %s" % (self.lambdas,))
        if sum(self.lambdas) > 1 + 1e-12:
            raise DomainError("multiplier budget exceeded: %s" % (self.lambdas,))
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be forward or backward")


@dataclass
class AbstractState:
    """Joint ellipsoid over tracked variables plus per-variable intervals.

    ``scalars`` maps a variable to a ScalarBound, or to TOP when it carries
    no information.  ``sources``/``lineage`` record each joint variable as a
    linear function of the loop-head state and the merged inputs; they are
    only used to build concrete counterexamples.
    """

    joint: ShapeEllipsoid = None
    scalars: dict = field(default_factory=dict)
    reachable: bool = True
    sources: tuple = ()
    lineage: np.ndarray = None

    def copy(self):
        return AbstractState(self.joint, dict(self.scalars), self.reachable,
                             self.sources, self.lineage)

    @property
    def tracked(self):
        return self.joint.vars if self.joint is not None else ()

    def facts(self):
        if not self.reachable:
            return [FALSE]
        out = []
        if self.joint is not None and self.joint.dim:
            out.append(self.joint)
        for v, b in self.scalars.items():
            if b is not TOP and not b.is_top:
                out.append(b)
        return out or [TRUE]


def _interval(var, op, k, then):
    closed_hi = op in ("<", "<=")
    if not then:
        closed_hi = not closed_hi
    return ScalarBound(var, -math.inf, k) if closed_hi else ScalarBound(var, k, math.inf)


def _meet(a, b):
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        return None
    return ScalarBound(a.var, lo, hi)


def _hull(a, b):
    if a is TOP or b is TOP:
        return TOP
    return ScalarBound(a.var, min(a.lo, b.lo), max(a.hi, b.hi))


def _apply_map(state, M, new_vars):
    joint = affine_image(state.joint, M, new_vars)
    lineage = M @ state.lineage if state.lineage is not None else None
    return joint, lineage


def project(state, keep):
    """Drop every variable not in ``keep`` from the state."""
    s = state.copy()
    keep = set(keep)
    if s.joint is not None:
        kept = tuple(v for v in s.joint.vars if v in keep)
        if kept != s.joint.vars:
            S = selection_matrix(s.joint.vars, kept)
            s.joint, s.lineage = _apply_map(s, S, kept)
    s.scalars = {v: b for v, b in s.scalars.items() if v in keep}
    return s


def transfer_assign(state, stmt):
    if not state.reachable:
        return state
    v = stmt.var
    const = stmt.expr.const
    coefs = {}
    for w, c in stmt.expr.coeffs().items():
        if c == 0:
            continue
        if w in state.tracked:
            coefs[w] = c
            continue
        b = state.scalars.get(w, TOP)
        if b is not TOP and b.is_point:
            const += c * b.lo
        elif b is not TOP and b.bounded:
            raise AnalysisError("operand '%s' is bounded but not merged into the "
                                "joint ellipsoid" % w, stmt.line)
        else:
            raise AnalysisError("unbounded operand '%s'" % w, stmt.line)

    s = state.copy()
    if not coefs:
        if v in s.tracked:
            s = project(s, [x for x in s.tracked if x != v] + list(s.scalars))
        s.scalars[v] = ScalarBound.point(v, const)
        return s
    if const != 0:
        raise AnalysisError("constant offset %r in an assignment over tracked "
                            "variables (ellipsoids are origin-centred)" % const, stmt.line)
    old = s.joint.vars
    row = np.array([coefs.get(x, 0.0) for x in old])
    if v in old:
        M = np.eye(len(old))
        M[old.index(v)] = row
        new_vars = old
    else:
        M = np.vstack([np.eye(len(old)), row])
        new_vars = old + (v,)
    s.joint, s.lineage = _apply_map(s, M, new_vars)
    s.scalars.pop(v, None)
    return s


def transfer_input(state, stmt):
    s = state
    if stmt.var in state.tracked:
        s = project(state, [x for x in state.tracked if x != stmt.var] + list(state.scalars))
    s = s.copy()
    s.scalars[stmt.var] = TOP
    return s


def transfer_guard_join(state, stmt):
    if not state.reachable:
        return state
    v = stmt.var
    if v in state.tracked:
        raise AnalysisError("guard on jointly tracked variable '%s' is not supported" % v,
                            stmt.line)
    cur = state.scalars.get(v, TOP)
    if cur is TOP:
        cur = ScalarBound(v)

    if cur.is_point:
        taken = stmt.holds(cur.lo)
        then_iv = cur if taken else None
        else_iv = None if taken else cur
    else:
        then_iv = _meet(cur, _interval(v, stmt.op, stmt.const, True))
        else_iv = _meet(cur, _interval(v, stmt.op, stmt.const, False))

    branches = []
    if then_iv is not None:
        t = state.copy()
        t.scalars[v] = then_iv
        for b in stmt.body:
            if isinstance(b, Assign):
                t = transfer_assign(t, b)
        if t.joint is not state.joint:
            raise AnalysisError("guard body changes jointly tracked variables", stmt.line)
        branches.append(t)
    if else_iv is not None:
        e = state.copy()
        e.scalars[v] = else_iv
        branches.append(e)
    if not branches:
        out = state.copy()
        out.reachable = False
        return out
    if len(branches) == 1:
        return branches[0]
    t, e = branches
    out = state.copy()
    out.scalars = {}
    for x in list(t.scalars) + [x for x in e.scalars if x not in t.scalars]:
        out.scalars[x] = _hull(t.scalars.get(x, TOP), e.scalars.get(x, TOP))
    return out


def mergeable(state):
    return [v for v, b in state.scalars.items()
            if b is not TOP and b.bounded and not b.is_point]


def weaken_to_product(state, lambdas):
    """Replace joint + bounded scalars by one multiplier-weighted ellipsoid."""
    names = mergeable(state)
    if not names:
        raise AnalysisError("nothing to merge")
    facts = []
    if state.joint is not None and state.joint.dim:
        facts.append(state.joint)
    facts += [state.scalars[v] for v in names]
    s = state.copy()
    s.joint = merge_shape(facts, lambdas)
    for v in names:
        del s.scalars[v]
    if state.lineage is not None:
        n_old = state.lineage.shape[1]
        L = np.zeros((s.joint.dim, n_old + len(names)))
        L[:state.lineage.shape[0], :n_old] = state.lineage
        L[state.lineage.shape[0]:, n_old:] = np.eye(len(names))
        s.lineage = L
        s.sources = state.sources + tuple(names)
    return s


def wp_assign(phi, stmt):
    """Substitute the assignment into the quadratic form (weakest precondition)."""
    v = stmt.var
    if v not in phi.vars:
        return phi
    coefs = stmt.expr.coeffs()
    if stmt.expr.const != 0:
        raise AnalysisError("constant offset %r breaks the centred quadratic form"
                            % stmt.expr.const, stmt.line)
    new_vars = [x for x in phi.vars if x != v]
    for w in stmt.expr.variables:
        if w not in new_vars and coefs[w] != 0:
            new_vars.append(w)
    M = np.zeros((phi.dim, len(new_vars)))
    for i, x in enumerate(phi.vars):
        if x == v:
            for w, c in coefs.items():
                if w in new_vars:
                    M[i, new_vars.index(w)] += c
        else:
            M[i, new_vars.index(x)] = 1.0
    return QuadForm(tuple(new_vars), M.T @ phi.Phi @ M)


def _liveness(body, state_vars):
    """live[i] = variables read at or after body[i] before being overwritten."""
    live = [set() for _ in range(len(body) + 1)]
    live[-1] = set(state_vars)
    for i in range(len(body) - 1, -1, -1):
        s = body[i]
        out = set(live[i + 1])
        if not isinstance(s, Guard):
            out -= writes(s)
        live[i] = out | reads(s)
    return live


def _reads_affine(stmt):
    if isinstance(stmt, (Assign, Output)):
        return set(w for w, c in stmt.expr.coeffs().items() if c != 0)
    return set()


@dataclass
class AnalysisResult:
    direction: str
    program: Program
    facts: list
    states: list
    verdict: bool
    margin: float
    bounds: list
    obligation: object = None
    certificate: object = None
    witness: dict = None
    witness_next_value: float = None
    confirmed: bool = False
    weakening_index: int = None
    final: ShapeEllipsoid = None

    @property
    def listing(self):
        return emit_annotated(self.program, self.facts)

    def bounds_csv(self):
        lines = ["variable,bound"]
        for name, b in self.bounds:
            lines.append("%s,%s" % (name, repr(float(b))))
        return "\n".join(lines) + "\n"


def _run_init(program, config):
    state = AbstractState()
    facts = []
    for s in program.init:
        facts.append(state.facts())
        if isinstance(s, Assign):
            state = transfer_assign(state, s)
        elif isinstance(s, Input):
            state = transfer_input(state, s)
        elif isinstance(s, Guard):
            state = transfer_guard_join(state, s)
        elif not isinstance(s, Skip):
            raise AnalysisError("output is not allowed before the loop", s.line)
    xs = program.state_vars
    if config.P.shape != (len(xs), len(xs)):
        raise AnalysisError("P is %dx%d but the program has %d state variables %s"
                            % (config.P.shape + (len(xs), xs)))
    z = []
    for v in xs:
        b = state.scalars.get(v, TOP)
        if b is TOP or not b.is_point:
            raise AnalysisError("state variable '%s' is not initialised to a constant" % v)
        z.append(b.lo)
    z = np.array(z)
    if float(z @ config.P @ z) > 1 + config.tol:
        raise AnalysisError("initial state %s lies outside E_P" % z.tolist())
    return facts, z


def _head_state(xs, P):
    return AbstractState(joint=ShapeEllipsoid(xs, inverse(P)), scalars={},
                         sources=tuple(xs), lineage=np.eye(len(xs)))


def _transfer(state, stmt):
    if isinstance(stmt, Assign):
        return transfer_assign(state, stmt)
    if isinstance(stmt, Input):
        return transfer_input(state, stmt)
    if isinstance(stmt, Guard):
        return transfer_guard_join(state, stmt)
    return state


def _unbounded_reads(state, stmt):
    bad = []
    for w in _reads_affine(stmt):
        if w in state.tracked:
            continue
        b = state.scalars.get(w, TOP)
        if b is TOP or not b.bounded:
            bad.append(w)
    return bad


def analyze_forward(program, config):
    xs = program.state_vars
    P = config.P
    facts, _ = _run_init(program, config)
    head_fact = QuadForm(xs, P)
    facts.append([head_fact])

    live = _liveness(program.body, xs)
    state = _head_state(xs, P)
    body, states = [], []
    merged = []
    weak_idx = None
    bounds = [(x, coord_bound(ShapeEllipsoid(xs, inverse(P)), i)) for i, x in enumerate(xs)]

    head_joint = state.joint

    def point(st):
        states.append(st)
        fs = st.facts()
        facts.append([head_fact if f is head_joint else f for f in fs])

    for i, stmt in enumerate(program.body):
        bad = _unbounded_reads(state, stmt)
        if bad:
            raise AnalysisError("unbounded operand '%s'" % bad[0], stmt.line)
        need = _reads_affine(stmt) & set(mergeable(state))
        if need:
            point(state)
            body.append(Skip())
            merged += [state.scalars[v] for v in mergeable(state)]
            try:
                state = weaken_to_product(state, config.lambdas)
            except DomainError as e:
                raise AnalysisError(str(e), stmt.line) from None
            if weak_idx is None:
                weak_idx = len(body) - 1
        point(state)
        body.append(stmt)
        state = _transfer(state, stmt)
        if isinstance(stmt, Output):
            g = _output_bound(state, stmt)
            bounds.append(g)
            keep = [v for v in state.tracked if v in live[i + 1]]
            keep += [v for v in state.scalars if v in live[i + 1]]
            state = project(state, keep)

    # close the loop: restrict to the state variables
    for x in xs:
        if x in state.tracked:
            continue
        b = state.scalars.get(x, TOP)
        if not (b is not TOP and b.is_point and b.lo == 0.0):
            raise AnalysisError("state variable '%s' is unbounded at the end of the loop" % x,
                                program.close_line)
    M = np.zeros((len(xs), len(state.tracked)))
    for i, x in enumerate(xs):
        if x in state.tracked:
            M[i, state.tracked.index(x)] = 1.0
    if state.joint is None:
        final = AbstractState(joint=ShapeEllipsoid(xs, np.zeros((len(xs), len(xs)))),
                              sources=state.sources,
                              lineage=np.zeros((len(xs), len(state.sources))))
    else:
        final = state.copy()
        final.joint, final.lineage = _apply_map(state, M, xs)
        final.scalars = {}
    point(final)
    body.append(Skip())
    head_shape = ShapeEllipsoid(xs, inverse(P))
    verdict, margin = contains(final.joint, head_shape, config.tol)
    states.append(_head_state(xs, P))
    facts.append([head_fact])
    facts.append([FALSE])

    out_prog = Program(program.init, tuple(body))
    # one-iteration obligation {x in E_P, bounds} => {next x in E_P}
    antecedents = [QuadForm(xs, P)] + [b for b in merged if b.var in final.sources]
    L = final.lineage
    consequent = QuadForm(final.sources, L.T @ P @ L)
    obligation = certifier.Obligation(antecedents, consequent, "loop")
    result = AnalysisResult("forward", out_prog, facts, states, bool(verdict), float(margin),
                            bounds, obligation=obligation, weakening_index=weak_idx,
                            final=final.joint)
    if not verdict:
        _attach_witness(result, program, config)
    return result


def _output_bound(state, stmt):
    name = _expr_name(stmt.expr)
    const = stmt.expr.const
    c = np.zeros(len(state.tracked))
    for w, k in stmt.expr.coeffs().items():
        if w in state.tracked:
            c[state.tracked.index(w)] += k
        elif k != 0:
            const += k * state.scalars[w].lo
    if state.joint is None:
        return (name, abs(const))
    return (name, abs(const) + functional_bound(state.joint, c))


def _expr_name(expr):
    from .lang import format_affine
    return format_affine(expr)


def _attach_witness(result, program, config):
    ob = result.obligation
    z = certifier.find_counterexample(ob, seed=config.seed, tol=config.tol)
    if z is None:
        return
    result.witness = dict(zip(ob.vars, z.tolist()))
    result.witness_next_value = ob.consequent.value(
        np.array([result.witness.get(v, 0.0) for v in ob.consequent.vars]))
    result.confirmed = confirm_witness(program, config.P, result.witness)


def confirm_witness(program, P, witness):
    """Run one iteration from the witness state; True if it leaves E_P."""
    xs = program.state_vars
    inputs = [witness.get(s.var, 0.0) for s in program.body if isinstance(s, Input)]
    initial = {x: witness[x] for x in xs}
    step = interpret(program, inputs, 1, initial=initial)[0]
    x1 = np.array([step.env[x] for x in xs])
    return bool(x1 @ P @ x1 > 1.0)


def next_value(program, P, witness):
    xs = program.state_vars
    inputs = [witness.get(s.var, 0.0) for s in program.body if isinstance(s, Input)]
    step = interpret(program, inputs, 1, initial={x: witness[x] for x in xs})[0]
    x1 = np.array([step.env[x] for x in xs])
    return float(x1 @ P @ x1)


def analyze_backward(program, config):
    xs = program.state_vars
    P = config.P
    facts, _ = _run_init(program, config)
    head_fact = QuadForm(xs, P)
    facts.append([head_fact])

    # forward prefix up to the obligation point
    state = _head_state(xs, P)
    body = list(program.body)
    k = len(body)
    prefix_states = []
    for i, stmt in enumerate(body):
        bad = _unbounded_reads(state, stmt)
        need = _reads_affine(stmt) & set(mergeable(state))
        if need or bad or isinstance(stmt, (Assign, Output)):
            k = i
            break
        prefix_states.append(state)
        state = _transfer(state, stmt)
    bounded = [state.scalars[v] for v in mergeable(state)]
    bounded_names = {b.var for b in bounded}

    def carried(st):
        out = [head_fact]
        for v, b in st.scalars.items():
            if b is not TOP and not b.is_top:
                out.append(b)
        return out

    # weakest preconditions from the loop end back to the obligation point
    wps = [None] * (len(body) + 1)
    goal = QuadForm(xs, P)
    wps[len(body)] = goal
    for i in range(len(body) - 1, k - 1, -1):
        stmt = body[i]
        if isinstance(stmt, Assign):
            goal = wp_assign(goal, stmt)
        elif isinstance(stmt, (Input, Guard)):
            if writes(stmt) & set(goal.vars):
                raise AnalysisError("backward analysis cannot pass an input or guard "
                                    "that the goal depends on", stmt.line)
        wps[i] = goal

    antecedents = [QuadForm(xs, P)] + bounded
    ob = certifier.Obligation(antecedents, wps[k], "line %d" % body[k].line if k < len(body)
                              else "loop")
    missing = set(wps[k].vars) - set(xs) - bounded_names
    if missing:
        raise AnalysisError("weakest precondition depends on unbounded variables %s"
                            % sorted(missing))
    cert = None
    if len(config.lambdas) == len(antecedents):
        cert = certifier.check_sprocedure(ob, config.lambdas, config.tol)
    if config.search or cert is None:
        found = certifier.search_multipliers(ob, config.grid_steps, config.tol) \
            if len(antecedents) <= 2 else None
        if found is not None and (cert is None or found.margin > cert.margin):
            cert = found
    verdict = cert is not None and cert.certified
    margin = cert.margin if cert is not None else -math.inf

    # symbolic values over the antecedent variables for output bounds
    base = list(xs) + [b.var for b in bounded]
    sym = {v: (np.eye(len(base))[j], 0.0) for j, v in enumerate(base)}
    for v, b in state.scalars.items():
        if b is not TOP and b.is_point:
            sym[v] = (np.zeros(len(base)), b.lo)
    out_facts = []
    bounds = [(x, math.sqrt(inverse(P)[i, i])) for i, x in enumerate(xs)]
    Pinv = inverse(P)
    for i in range(k, len(body)):
        stmt = body[i]
        if isinstance(stmt, Assign):
            vec, c0 = _substitute(stmt.expr, sym, len(base))
            if vec is None:
                sym.pop(stmt.var, None)
            else:
                sym[stmt.var] = (vec, c0)
        elif isinstance(stmt, Output):
            vec, c0 = _substitute(stmt.expr, sym, len(base))
            if vec is None:
                raise AnalysisError("output depends on unbounded variables", stmt.line)
            b = abs(c0) + _sum_bound(vec, xs, bounded, Pinv)
            bounds.append((_expr_name(stmt.expr), b))
            terms = stmt.expr.terms
            if len(terms) == 1 and terms[0][0] == 1.0 and terms[0][1] is not None:
                v = terms[0][1]
                a = _last_write_before(body, v, i)
                if a is not None and a >= k:
                    out_facts.append((v, b, a + 1, i))

    # annotations: forward prefix, skip at the obligation point, then wp facts
    new_body, new_facts, states = [], list(facts), []
    for i in range(k):
        new_facts.append(carried(prefix_states[i]))
        new_body.append(body[i])
        states.append(prefix_states[i])
    pre = carried(state)
    new_facts.append(pre)
    new_body.append(Skip())
    written = set()
    for i in range(k, len(body)):
        fs = [f for f in pre if not (_fvars(f) & written)]
        if wps[i].dim:
            fs.append(wps[i])
        for v, b, lo, hi in out_facts:
            if lo <= i <= hi:
                fs.append(ScalarBound.square(v, b * b))
        new_facts.append(fs)
        new_body.append(body[i])
        written |= writes(body[i])
    new_facts.append([wps[len(body)]])
    new_facts.append([FALSE])

    result = AnalysisResult("backward", Program(program.init, tuple(new_body)), new_facts,
                            states, bool(verdict), float(margin), bounds, obligation=ob,
                            certificate=cert, weakening_index=k)
    if not verdict:
        _attach_witness(result, program, config)
    return result


def _substitute(expr, sym, n):
    vec, c0 = np.zeros(n), expr.const
    for w, c in expr.coeffs().items():
        if c == 0:
            continue
        if w not in sym:
            return None, None
        vec = vec + c * sym[w][0]
        c0 += c * sym[w][1]
    return vec, c0


def _fvars(f):
    if isinstance(f, (QuadForm, ShapeEllipsoid)):
        return set(f.vars)
    if isinstance(f, ScalarBound):
        return {f.var}
    return set()


def _last_write_before(body, v, i):
    for j in range(i - 1, -1, -1):
        if v in writes(body[j]):
            return j
    return None


def _sum_bound(vec, xs, bounded, Pinv):
    n = len(xs)
    cx = vec[:n]
    parts = [float(cx @ Pinv @ cx)] if np.any(cx) else []
    for j, b in enumerate(bounded):
        c = vec[n + j]
        if c:
            parts.append(c * c * b.sq)
    if not parts:
        return 0.0
    return math.sqrt(len(parts) * sum(parts))


def analyze(program, config):
    if config.P is None:
        raise AnalysisError("a loop-head matrix P is required")
    if config.direction == "forward":
        return analyze_forward(program, config)
    return analyze_backward(program, config)


def suggest_P(A, iterations=60, tol=1e-12):
    """Heuristic loop-head candidate: solve A^T P A - P = -I by doubling.

    X <- X + Ak^T X Ak, Ak <- Ak^2 sums the series sum_k (A^k)^T A^k in
    log-many steps.  May fail (no guarantee that E_P is invariant under
    bounded inputs); callers should scale P and check the result.
    """
    A = np.asarray(A, dtype=float)
    X = np.eye(A.shape[0])
    Ak = A.copy()
    for _ in range(iterations):
        with np.errstate(over="ignore", invalid="ignore"):
            step = Ak.T @ X @ Ak
            X = X + step
        if not np.all(np.isfinite(X)):
            break
        if np.max(np.abs(step)) < tol * max(1.0, np.max(np.abs(X))):
            return symmetrize(X)
        with np.errstate(over="ignore", invalid="ignore"):
            Ak = Ak @ Ak
    raise AnalysisError("Lyapunov iteration did not converge (spectral radius >= 1?)")
