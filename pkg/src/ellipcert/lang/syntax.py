"""AST for the controller language."""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Affine:
    """Constant plus linear combination, kept in source order.

    ``terms`` holds ``(coef, var)`` pairs; ``var`` is None for a constant.
    Source order matters for the concrete interpreter, which accumulates
    left to right exactly as written.
    """

    terms: tuple

    @property
    def const(self):
        return sum(c for c, v in self.terms if v is None)

    def coeffs(self):
        out = {}
        for c, v in self.terms:
            if v is not None:
                out[v] = out.get(v, 0.0) + c
        return out

    @property
    def variables(self):
        seen = []
        for _, v in self.terms:
            if v is not None and v not in seen:
                seen.append(v)
        return tuple(seen)

    @classmethod
    def linear(cls, coeffs, const=0.0):
        terms = [(float(c), v) for v, c in coeffs.items()]
        if const or not terms:
            terms.append((float(const), None))
        return cls(tuple(terms))


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Affine
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Input:
    var: str
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Output:
    expr: Affine
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Guard:
    var: str
    op: str
    const: float
    body: tuple
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)

    def holds(self, value):
        return {">": value > self.const, "<": value < self.const,
                ">=": value >= self.const, "<=": value <= self.const}[self.op]


@dataclass(frozen=True)
class Skip:
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    init: tuple
    body: tuple
    loop_line: int = field(default=0, compare=False)
    close_line: int = field(default=0, compare=False)

    @property
    def state_vars(self):
        """Variables assigned by the initialisation, in first-assignment order."""
        out = []
        for s in self.init:
            if isinstance(s, (Assign, Input)) and s.var not in out:
                out.append(s.var)
        return tuple(out)

    @property
    def n_points(self):
        return len(self.init) + len(self.body) + 3


def reads(stmt):
    """Variables read by a statement (guards include their bodies)."""
    if isinstance(stmt, Assign):
        return set(stmt.expr.variables)
    if isinstance(stmt, Output):
        return set(stmt.expr.variables)
    if isinstance(stmt, Guard):
        out = {stmt.var}
        for s in stmt.body:
            out |= reads(s)
        return out
    return set()


def writes(stmt):
    if isinstance(stmt, (Assign, Input)):
        return {stmt.var}
    if isinstance(stmt, Guard):
        out = set()
        for s in stmt.body:
            out |= writes(s)
        return out
    return set()
