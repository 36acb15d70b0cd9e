"""Concrete double-precision interpreter for controller programs."""

from dataclasses import dataclass

from .syntax import Assign, Guard, Input, Output, Skip


class InterpError(RuntimeError):
    def __init__(self, line, message):
        self.line = line
        super().__init__("line %d: %s" % (line, message))


@dataclass
class Step:
    inputs: list
    outputs: list
    env: dict


def evaluate(expr, env, line=0):
    acc = 0.0
    for c, v in expr.terms:
        if v is None:
            acc += c
        else:
            try:
                acc += c * env[v]
            except KeyError:
                raise InterpError(line, "variable '%s' is unassigned" % v) from None
    return acc


def _run(stmts, env, inputs, outputs, consumed, feed):
    for s in stmts:
        if isinstance(s, Assign):
            env[s.var] = evaluate(s.expr, env, s.line)
        elif isinstance(s, Input):
            try:
                value = float(next(feed))
            except StopIteration:
                raise InterpError(s.line, "input stream exhausted") from None
            consumed.append(value)
            env[s.var] = value
        elif isinstance(s, Output):
            outputs.append(evaluate(s.expr, env, s.line))
        elif isinstance(s, Guard):
            if s.var not in env:
                raise InterpError(s.line, "variable '%s' is unassigned" % s.var)
            if s.holds(env[s.var]):
                _run(s.body, env, inputs, outputs, consumed, feed)
        elif isinstance(s, Skip):
            pass
        else:
            raise TypeError("unknown statement %r" % (s,))


def interpret(program, inputs, steps, initial=None):
    """Run the init block, then ``steps`` loop iterations.

    ``initial`` overrides variable values after the init block (used to
    start from a counterexample state).  Returns one ``Step`` per iteration
    with the consumed inputs, produced outputs and the environment at the
    end of the iteration.
    """
    feed = iter(inputs)
    env = {}
    _run(program.init, env, [], [], [], feed)
    if initial:
        env.update({k: float(v) for k, v in initial.items()})
    trace = []
    for _ in range(steps):
        consumed, outputs = [], []
        _run(program.body, env, None, outputs, consumed, feed)
        trace.append(Step(consumed, outputs, dict(env)))
    return trace
