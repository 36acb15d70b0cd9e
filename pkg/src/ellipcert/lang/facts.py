"""Text form of annotation facts.

    fact := "true" | "false"
          | "inE(" vars ";" rows ")"     sublevel set {z : z^T M z <= 1}
          | "quad(" vars ";" rows ")"    same set, used when M is singular
          | "inG(" vars ";" rows ")"     shape form G_M
          | "sq(" ident ") <= " number
          | ident " == " number | ident " <= " number | ident " >= " number

Rows are ";"-separated, entries whitespace-separated.  A fact list is a
comma-separated sequence of facts.
"""

import math
import re

import numpy as np

from ..ellipsoid import QuadForm, ScalarBound, ShapeEllipsoid, is_definite


class FactSyntaxError(ValueError):
    pass


class _Const:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


TRUE = _Const("true")
FALSE = _Const("false")


def fmt(x):
    """Shortest text that reads back to the same double."""
    x = float(x)
    if x == 0:
        return "0"
    s = repr(x)
    if s.endswith(".0"):
        s = s[:-2]
    return s


def _rows(M):
    return "; ".join(" ".join(fmt(v) for v in row) for row in np.asarray(M))


def render_fact(f):
    if f is TRUE or f is FALSE:
        return repr(f)
    if isinstance(f, ShapeEllipsoid):
        return "inG(%s; %s)" % (",".join(f.vars), _rows(f.R))
    if isinstance(f, QuadForm):
        head = "inE" if is_definite(f.Phi) else "quad"
        return "%s(%s; %s)" % (head, ",".join(f.vars), _rows(f.Phi))
    if isinstance(f, ScalarBound):
        if f.is_point:
            return "%s == %s" % (f.var, fmt(f.lo))
        if f.bounded and f.lo == -f.hi:
            return "sq(%s) <= %s" % (f.var, fmt(f.hi * f.hi))
        parts = []
        if f.lo != -math.inf:
            parts.append("%s >= %s" % (f.var, fmt(f.lo)))
        if f.hi != math.inf:
            parts.append("%s <= %s" % (f.var, fmt(f.hi)))
        return ", ".join(parts) if parts else "true"
    raise TypeError("not a fact: %r" % (f,))


def render_facts(facts):
    facts = [f for f in facts if f is not TRUE]
    if not facts:
        return "true"
    return ", ".join(render_fact(f) for f in facts)


def split_top(text, sep=","):
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf"
_MATRIX = re.compile(r"^(inE|quad|inG)\((.*)\)$", re.S)
_SQ = re.compile(r"^sq\(\s*([A-Za-z_]\w*)\s*\)\s*<=\s*(%s)$" % _NUM)
_CMP = re.compile(r"^([A-Za-z_]\w*)\s*(==|<=|>=)\s*(%s)$" % _NUM)


def parse_fact(text):
    s = text.strip()
    if s == "true":
        return TRUE
    if s == "false":
        return FALSE
    m = _MATRIX.match(s)
    if m:
        head, inner = m.groups()
        parts = [p.strip() for p in inner.split(";")]
        names = tuple(v.strip() for v in parts[0].split(",") if v.strip())
        try:
            rows = [[float(x) for x in p.split()] for p in parts[1:]]
        except ValueError:
            raise FactSyntaxError("bad matrix entry in %r" % s) from None
        if len(rows) != len(names) or any(len(r) != len(names) for r in rows):
            raise FactSyntaxError("matrix in %r must be %dx%d" % (s, len(names), len(names)))
        M = np.array(rows, dtype=float).reshape(len(names), len(names))
        if head == "inG":
            return ShapeEllipsoid(names, M)
        return QuadForm(names, M)
    m = _SQ.match(s)
    if m:
        return ScalarBound.square(m.group(1), float(m.group(2)))
    m = _CMP.match(s)
    if m:
        v, op, k = m.group(1), m.group(2), float(m.group(3))
        if op == "==":
            return ScalarBound.point(v, k)
        if op == "<=":
            return ScalarBound(v, -math.inf, k)
        return ScalarBound(v, k, math.inf)
    raise FactSyntaxError("cannot parse fact %r" % s)


def parse_facts(text):
    text = text.strip()
    if not text:
        return []
    return [parse_fact(p) for p in split_top(text)]


def fact_vars(f):
    if isinstance(f, (QuadForm, ShapeEllipsoid)):
        return set(f.vars)
    if isinstance(f, ScalarBound):
        return {f.var}
    return set()
