"""Acceptance criteria, one test per criterion.

Each criterion is a plain function returning ``(ok, detail)``; the tests
time it, print one ``criterion N: PASS|FAIL`` line and then assert both the
outcome and the time budget.  ``python3 tests/test_acceptance.py`` runs the
same functions without pytest.
"""

import io
import itertools
import math
import sys
import time
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from ellipcert.analyzer import AnalysisConfig, analyze, analyze_backward, analyze_forward
from ellipcert.certifier import check_lyapunov_decrease, validate_witness
from ellipcert.checker import FAIL, PASS, check_annotations
from ellipcert.cli import main as cli_main
from ellipcert.ellipsoid import ShapeEllipsoid, coord_bound
from ellipcert.lang import FALSE, TRUE, interpret, parse, read_annotated
from ellipcert.sim import LCG, StateSpace, loop_gain, phase_margin, simulate_controller
from helpers import (A_LL, AC_LL, B_LL, BC_LL, C_LL, CORPUS, D_LL, LAMBDAS_LL, P_LL,
                     corpus_program, dlyap, execute, holds_mask, q_matrix, random_stable,
                     sample_antecedents, transcribe)

SMALL = [("scalar.ctl", np.eye(1), (0.5, 0.5), StateSpace([[0.5]], [[0.5]], [[1.0]], [[0.0]])),
         ("diag2.ctl", np.diag([0.25, 1.0]), (0.5, 0.5),
          StateSpace(np.diag([0.5, 0.5]), [[1.0], [0.0]], [[1.0, 1.0]], [[0.0]]))]


def _fmt(x):
    return "%.6g" % x


# ---------------------------------------------------------------- criteria

def criterion_1():
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main(["discretize", "--config", str(CORPUS / "paper_ll.cfg"),
                         "--method", "euler", "--h", "0.01"])
    got = {}
    for line in buf.getvalue().splitlines():
        key, val = (p.strip() for p in line.split("=", 1))
        if val.startswith("["):
            got[key] = np.array([[float(v) for v in r.split()] for r in val[1:-1].split(";")])
    A, B = got["controller.A"], got["controller.B"]
    ok = code == 0 and A.tolist() == A_LL.tolist() and B.tolist() == B_LL.tolist()
    return ok, "A=%s B=%s bitwise=%s" % (A.tolist(), B.ravel().tolist(), ok)


def criterion_2():
    flag, margin = check_lyapunov_decrease(A_LL, P_LL)
    # hand 2x2: largest eigenvalue of the symmetric difference from trace and determinant
    a, b, c, d = 0.499, -0.05, 0.01, 1.0
    p, q, r = 0.03, 0.2, 10.0
    d00 = a * (a * p + c * q) + c * (a * q + c * r) - p
    d01 = a * (b * p + d * q) + c * (b * q + d * r) - q
    d11 = b * (b * p + d * q) + d * (b * q + d * r) - r
    tr, det = d00 + d11, d00 * d11 - d01 * d01
    lmax = (tr + math.sqrt(tr * tr - 4 * det)) / 2
    ok = flag and margin > 0.015 and abs(margin - (-lmax)) <= 0.005
    return ok, "margin=%s hand=%s" % (_fmt(margin), _fmt(-lmax))


def criterion_3():
    g = ShapeEllipsoid(("x0", "x1"), np.linalg.inv(P_LL))
    b0, b1 = coord_bound(g, 0), coord_bound(g, 1)
    ok = b0 <= 7 and b1 <= 7 and 6.19 <= b0 <= 6.21
    return ok, "bounds=(%s, %s)" % (_fmt(b0), _fmt(b1))


def criterion_4():
    r = analyze_forward(corpus_program("fig3.ctl"), AnalysisConfig(P_LL, LAMBDAS_LL))
    AB = np.hstack([A_LL, B_LL])
    ref = AB @ np.linalg.inv(q_matrix(P_LL, LAMBDAS_LL)) @ AB.T
    err = float(np.max(np.sum(np.abs(r.final.R - ref), axis=1)))
    return err <= 1e-9, "||U - [A B]Q^-1[A B]^T||_inf=%.3g" % err


def criterion_5():
    prog = corpus_program("fig4.ctl")
    parts, ok = [], True
    for d in ("forward", "backward"):
        r = analyze(prog, AnalysisConfig(P_LL, LAMBDAS_LL, d))
        w = r.witness
        if r.verdict or w is None:
            ok = False
            parts.append("%s verdict=%s witness=%s" % (d, r.verdict, w))
            continue
        x = np.array([w["x0"], w["x1"]])
        inside = x @ P_LL @ x <= 1 + 1e-9 and abs(w["y"]) <= 1 + 1e-12
        (step,) = interpret(prog, [w["y"]], 1, initial={"x0": x[0], "x1": x[1]})
        nxt = np.array([step.env["x0"], step.env["x1"]])
        v = float(nxt @ P_LL @ nxt)
        ok &= inside and v > 1.1
        parts.append("%s NOT certified, V_next=%s" % (d, _fmt(v)))
    return ok, "; ".join(parts)


def criterion_6():
    parts, ok = [], True
    for name, P, lam, ss in SMALL:
        prog = corpus_program(name)
        for d in ("forward", "backward"):
            r = analyze(prog, AnalysisConfig(P, lam, d))
            ok &= r.verdict and r.margin >= -1e-9
        xs = prog.state_vars
        vmax = 0.0
        # interpreter from random points of E_P, and the matrix simulation from 0
        rng = np.random.default_rng(6)
        for trial in range(3):
            d0 = rng.standard_normal(len(xs))
            w, V = np.linalg.eigh(P)
            x0 = V @ (d0 / np.linalg.norm(d0) / np.sqrt(w)) * rng.random() ** 0.5
            ys = itertools.islice(LCG(trial).stream(), 10 ** 4)
            for step in interpret(prog, ys, 10 ** 4, initial=dict(zip(xs, x0))):
                x = np.array([step.env[v] for v in xs])
                vmax = max(vmax, float(x @ P @ x))
        tr = simulate_controller(ss, LCG(99).stream(), 10 ** 4, P)
        vmax = max(vmax, max(tr.V))
        ok &= vmax <= 1 + 1e-8
        parts.append("%s certified, maxV=%s" % (name, _fmt(vmax)))
    return ok, "; ".join(parts)


def criterion_7(count=100, seed=2024):
    rng = np.random.default_rng(seed)
    mismatches, certified = 0, 0
    for _ in range(count):
        n = int(rng.integers(1, 4))
        A = random_stable(rng, n, 0.95)
        B = rng.standard_normal(n)
        P = dlyap(A) * 10 ** rng.uniform(-3, 0.5)
        l1 = rng.uniform(0.05, 0.95)
        prog = parse(transcribe(A, B))
        f = analyze_forward(prog, AnalysisConfig(P, (l1, 1 - l1)))
        b = analyze_backward(prog, AnalysisConfig(P, (l1, 1 - l1), "backward"))
        mismatches += f.verdict != b.verdict
        certified += f.verdict
    return mismatches == 0, "%d instances, %d certified, %d mismatches" % (count, certified,
                                                                          mismatches)


def criterion_8():
    cont = StateSpace(AC_LL, BC_LL, C_LL, [[D_LL]])
    plant = StateSpace([[0, 1], [-1, 0]], [[0], [1]], [[0, 1]], [[0]])
    pm, wc = phase_margin(loop_gain(plant, cont), 1e-2, 1e4, 400)
    return pm > 50 and wc > 20, "PM=%.4f deg at w=%.4f rad/s" % (pm, wc)


def criterion_9(steps=10 ** 4):
    ys = list(itertools.islice(LCG(9).stream(), steps + 1))
    u3 = [s.outputs[0] for s in interpret(corpus_program("fig3.ctl"), ys, steps + 1)]
    u4 = [s.outputs[0] for s in interpret(corpus_program("fig4.ctl"), ys, steps + 1)]
    ctrl = StateSpace(A_LL, B_LL, C_LL, [[D_LL]], dt=0.01)
    us = simulate_controller(ctrl, ys, steps).u
    d34 = max(abs(a - b) for a, b in zip(u3, u4))
    d4s = max(abs(a - b) for a, b in zip(u4, us))
    ok = len(u3) == len(u4) == len(us) and d34 <= 1e-12 and d4s <= 1e-12
    return ok, "max|du| fig3/fig4=%.3g fig4/sim=%.3g over %d samples" % (d34, d4s, len(us))


def _corpus_listings():
    cases = [("fig3.ctl", P_LL, LAMBDAS_LL), ("fig4.ctl", P_LL, LAMBDAS_LL)]
    cases += [(n, P, lam) for n, P, lam, _ in SMALL]
    for name, P, lam in cases:
        for d in ("forward", "backward"):
            yield name, analyze(corpus_program(name), AnalysisConfig(P, lam, d)).listing, \
                AnalysisConfig(P, lam)
    # a hand-tightened fact: |x| <= 0.1 after the filter update
    name, P, lam, _ = SMALL[0]
    lines = analyze(corpus_program(name), AnalysisConfig(P, lam)).listing.splitlines()
    i = lines.index("  output x;")
    lines[i - 1] = "  #[ sq(x) <= 0.01 ]"
    yield name + "+tightened", "\n".join(lines) + "\n", AnalysisConfig(P, lam)


def _edges(program, facts):
    """(statement or None, pre, post) in the checker's line order, exit excluded."""
    ni, nb = len(program.init), len(program.body)
    out = [(s, facts[i], facts[i + 1]) for i, s in enumerate(program.init)]
    out.append((None, facts[ni], facts[ni + 1]))
    out += [(s, facts[ni + 1 + j], facts[ni + 2 + j]) for j, s in enumerate(program.body)]
    out.append((None, facts[ni + 1 + nb], facts[ni]))
    return out


def _vars(facts):
    out = []
    for f in facts:
        if f is TRUE or f is FALSE:
            continue
        for v in ((f.var,) if hasattr(f, "var") else f.vars):
            if v not in out:
                out.append(v)
    return out


def criterion_10(samples=10 ** 4, tol=1e-8):
    from ellipcert.lang.syntax import reads, writes
    rng = np.random.default_rng(10)
    certified = violations = fails = bad_witnesses = 0
    for name, text, cfg in _corpus_listings():
        program, facts, where = read_annotated(text)
        report = check_annotations(program, facts, cfg, where)
        edges = _edges(program, facts)
        for line, (stmt, pre, post) in zip(report.lines, edges):
            for o in line.outcomes:
                if o.status == FAIL:
                    fails += 1
                    ob = o.obligation
                    if o.witness is None or (ob is not None and not validate_witness(
                            o.witness, ob.antecedents, ob.consequent)):
                        bad_witnesses += 1
                elif o.status == PASS and o.obligation is not None:
                    ob = o.obligation
                    Z = sample_antecedents(ob.antecedents, ob.vars, samples, seed=certified)
                    certified += 1
                    violations += int(np.sum(~holds_mask(ob.consequent, Z, ob.vars, tol)))
                    violations += samples - len(Z)
            if line.status != PASS:
                continue
            # the whole triple, executed concretely
            pre = [f for f in pre if f is not TRUE]
            post = [f for f in post if f is not TRUE]
            if any(f is FALSE for f in pre) or not post:
                continue
            extra = set()
            if stmt is not None:
                extra = reads(stmt) | writes(stmt)
            order = tuple(dict.fromkeys(_vars(pre) + _vars(post) + sorted(extra)))
            Z = sample_antecedents(pre, order, samples, seed=certified)
            if stmt is not None:
                execute(stmt, Z, order, rng)
            certified += 1
            for f in post:
                violations += int(np.sum(~holds_mask(f, Z, order, tol)))
            violations += samples - len(Z)
    ok = violations == 0 and bad_witnesses == 0 and fails > 0
    return ok, ("%d certified checks x %d samples, %d violations; %d FAIL witnesses, %d invalid"
                % (certified, samples, violations, fails, bad_witnesses))


BUDGET = {1: 1, 2: 1, 3: 1, 4: 1, 5: 5, 6: 10, 7: 60, 8: 5, 9: 10, 10: 60}
CRITERIA = {n: globals()["criterion_%d" % n] for n in BUDGET}


def run_criterion(n):
    t0 = time.perf_counter()
    ok, detail = CRITERIA[n]()
    dt = time.perf_counter() - t0
    within = dt < BUDGET[n]
    status = "PASS" if ok and within else "FAIL"
    line = "criterion %d: %s %s (%.2fs, budget %ds)" % (n, status, detail, dt, BUDGET[n])
    return ok, within, line


@pytest.mark.parametrize("n", sorted(BUDGET))
def test_criterion(n, capsys):
    ok, within, line = run_criterion(n)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line
    assert within, line


if __name__ == "__main__":
    results = [run_criterion(n) for n in sorted(BUDGET)]
    for _, _, line in results:
        print(line)
    sys.exit(0 if all(ok and within for ok, within, _ in results) else 1)
