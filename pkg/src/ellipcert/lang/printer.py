"""Pretty printer and annotated-listing emitter/reader."""

from .facts import fmt, parse_facts, render_facts, FactSyntaxError
from .parser import Diagnostic, ParseError, parse
from .syntax import Assign, Guard, Input, Output, Skip

INDENT = "  "


def format_affine(expr):
    out = []
    for i, (c, v) in enumerate(expr.terms):
        if i == 0:
            sign, mag = ("-", -c) if c < 0 else ("", c)
        else:
            sign, mag = (" - ", -c) if c < 0 else (" + ", c)
        if v is None:
            body = fmt(mag)
        elif mag == 1.0:
            body = v
        else:
            body = "%s*%s" % (fmt(mag), v)
        out.append(sign + body)
    return "".join(out)


def format_statement(stmt, depth=0):
    pad = INDENT * depth
    if isinstance(stmt, Assign):
        return [pad + "%s := %s;" % (stmt.var, format_affine(stmt.expr))]
    if isinstance(stmt, Input):
        return [pad + "input %s;" % stmt.var]
    if isinstance(stmt, Output):
        return [pad + "output %s;" % format_affine(stmt.expr)]
    if isinstance(stmt, Skip):
        return [pad + "skip;"]
    if isinstance(stmt, Guard):
        lines = [pad + "if (%s %s %s) {" % (stmt.var, stmt.op, fmt(stmt.const))]
        for s in stmt.body:
            lines += format_statement(s, depth + 1)
        lines.append(pad + "}")
        return lines
    raise TypeError("not a statement: %r" % (stmt,))


def pretty_print(program):
    lines = []
    for s in program.init:
        lines += format_statement(s)
    lines.append("loop {")
    for s in program.body:
        lines += format_statement(s, 1)
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_annotated(program, facts):
    """Interleave fact lines with statements.

    ``facts`` has one list per program point: before each init statement,
    before ``loop {``, before each body statement, after the last body
    statement, and after the closing brace.
    """
    if len(facts) != program.n_points:
        raise ValueError("expected %d fact lists, got %d" % (program.n_points, len(facts)))
    it = iter(facts)
    lines = []

    def note(depth):
        lines.append(INDENT * depth + "#[ %s ]" % render_facts(next(it)))

    for s in program.init:
        note(0)
        lines += format_statement(s)
    note(0)
    lines.append("loop {")
    for s in program.body:
        note(1)
        lines += format_statement(s, 1)
    note(1)
    lines.append("}")
    note(0)
    return "\n".join(lines) + "\n"


def read_annotated(text):
    """Parse an annotated listing into (program, facts per point, fact lines).

    Missing fact lines count as ``true``; several fact lines in one gap are
    conjoined.  ``fact lines`` gives, per point, the source line of its first
    fact line (or of the following statement when absent).
    """
    program = parse(text)
    notes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("#["):
            if not s.endswith("]"):
                raise ParseError([Diagnostic(lineno, 1, "unterminated fact line")])
            try:
                notes.append((lineno, parse_facts(s[2:-1])))
            except (FactSyntaxError, ValueError) as e:
                raise ParseError([Diagnostic(lineno, 1, "malformed fact: %s" % e)]) from None

    bounds = []
    prev = 0
    for s in program.init:
        bounds.append((prev, s.line))
        prev = s.end_line
    bounds.append((prev, program.loop_line))
    prev = program.loop_line
    for s in program.body:
        bounds.append((prev, s.line))
        prev = s.end_line
    bounds.append((prev, program.close_line))
    bounds.append((program.close_line, float("inf")))

    facts, where = [], []
    for lo, hi in bounds:
        here = [(ln, fs) for ln, fs in notes if lo < ln < hi]
        merged = []
        for _, fs in here:
            merged += fs
        facts.append(merged)
        where.append(here[0][0] if here else (hi if hi != float("inf") else lo))
    return program, facts, where
