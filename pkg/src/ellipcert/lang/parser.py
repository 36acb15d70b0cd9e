"""Recursive-descent parser for the controller language.

    program  := { stmt } "loop" "{" { stmt } "}"
    stmt     := ident ":=" affine ";" | "input" ident ";" | "output" affine ";"
              | "if" "(" ident cmp number ")" "{" { stmt } "}" | "skip" ";"
    affine   := term { ("+"|"-") term }
    term     := number | ident | number "*" ident

The first term of an expression may carry a sign.  ``#`` starts a comment
that runs to the end of the line, so annotated listings parse unchanged.
"""

from dataclasses import dataclass
import re

from .syntax import Affine, Assign, Guard, Input, Output, Program, Skip

KEYWORDS = {"loop", "input", "output", "if", "skip"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>:=|>=|<=|[-+*;{}()<>])
""", re.VERBOSE)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self):
        return "%d:%d: %s" % (self.line, self.column, self.message)


class ParseError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text):
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError([Diagnostic(line, col, "unexpected character %r" % text[pos])])
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind == "ident" and s in KEYWORDS:
                kind = s
            if kind not in ("ws", "comment"):
                tokens.append(Token(kind, s, line, col))
            col += len(s)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class Parser:
    def __init__(self, text):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        raise ParseError([Diagnostic(tok.line, tok.column, message)])

    def describe(self, tok):
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def accept(self, kind):
        if self.tok.kind == kind or (self.tok.kind == "op" and self.tok.text == kind):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, kind, what=None):
        t = self.accept(kind)
        if t is None:
            self.error("expected %s, found %s" % (what or repr(kind), self.describe(self.tok)))
        return t

    def program(self):
        if self.tok.kind == "eof":
            self.error("expected program")
        init = []
        while self.tok.kind != "loop":
            if self.tok.kind == "eof":
                self.error("expected 'loop'")
            init.append(self.statement())
        loop_tok = self.expect("loop")
        self.expect("{")
        body = []
        while not (self.tok.kind == "op" and self.tok.text == "}"):
            if self.tok.kind == "eof":
                self.error("expected '}' to close loop")
            body.append(self.statement())
        close = self.expect("}")
        if self.tok.kind != "eof":
            self.error("unexpected %s after loop" % self.describe(self.tok))
        return Program(tuple(init), tuple(body), loop_tok.line, close.line)

    def statement(self, in_guard=False):
        t = self.tok
        if t.kind == "ident":
            self.i += 1
            self.expect(":=")
            expr = self.affine()
            end = self.expect(";")
            return Assign(t.text, expr, t.line, end.line)
        if t.kind == "skip":
            self.i += 1
            end = self.expect(";")
            return Skip(t.line, end.line)
        if in_guard:
            self.error("only assignments and skip are allowed inside 'if'")
        if t.kind == "input":
            self.i += 1
            v = self.expect("ident", "variable name")
            end = self.expect(";")
            return Input(v.text, t.line, end.line)
        if t.kind == "output":
            self.i += 1
            expr = self.affine()
            end = self.expect(";")
            return Output(expr, t.line, end.line)
        if t.kind == "if":
            self.i += 1
            self.expect("(")
            v = self.expect("ident", "variable name")
            op = self.tok
            if not (op.kind == "op" and op.text in (">", "<", ">=", "<=")):
                self.error("expected comparison operator, found %s" % self.describe(op))
            self.i += 1
            k = self.signed_number()
            self.expect(")")
            self.expect("{")
            body = []
            while not (self.tok.kind == "op" and self.tok.text == "}"):
                if self.tok.kind == "eof":
                    self.error("expected '}' to close 'if'")
                body.append(self.statement(in_guard=True))
            end = self.expect("}")
            return Guard(v.text, op.text, k, tuple(body), t.line, end.line)
        self.error("expected statement, found %s" % self.describe(t))

    def signed_number(self):
        sign = 1.0
        if self.tok.kind == "op" and self.tok.text in "+-":
            sign = -1.0 if self.tok.text == "-" else 1.0
            self.i += 1
        t = self.expect("number", "number")
        return sign * float(t.text)

    def term(self, sign=1.0):
        t = self.tok
        if t.kind == "number":
            self.i += 1
            value = sign * float(t.text)
            if self.accept("*"):
                v = self.expect("ident", "variable name after '*'")
                return (value, v.text)
            return (value, None)
        if t.kind == "ident":
            self.i += 1
            return (sign * 1.0, t.text)
        self.error("expected term, found %s" % self.describe(t))

    def affine(self):
        sign = 1.0
        if self.tok.kind == "op" and self.tok.text in "+-":
            sign = -1.0 if self.tok.text == "-" else 1.0
            self.i += 1
        terms = [self.term(sign)]
        while self.tok.kind == "op" and self.tok.text in "+-":
            s = -1.0 if self.tok.text == "-" else 1.0
            self.i += 1
            terms.append(self.term(s))
        return Affine(tuple(terms))


def check_definitions(program):
    """Report variables read before any assignment on the first iteration."""
    diags = []
    defined = set()

    def visit(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                need = s.expr.variables
            elif isinstance(s, Output):
                need = s.expr.variables
            elif isinstance(s, Guard):
                need = (s.var,)
            else:
                need = ()
            for v in need:
                if v not in defined:
                    diags.append(Diagnostic(s.line, 1, "variable '%s' used before assignment" % v))
            if isinstance(s, Guard):
                for b in s.body:
                    if isinstance(b, Assign):
                        for v in b.expr.variables:
                            if v not in defined:
                                diags.append(Diagnostic(b.line, 1, "variable '%s' used before assignment" % v))
                        defined.add(b.var)
            elif isinstance(s, (Assign, Input)):
                defined.add(s.var)

    visit(program.init)
    visit(program.body)
    return diags


def parse(text):
    program = Parser(text).program()
    diags = check_definitions(program)
    if diags:
        raise ParseError(diags)
    return program
