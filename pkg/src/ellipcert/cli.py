"""Command-line front end.

Exit codes: 0 success (inductive, certified, all PASS), 2 a negative
verdict (not inductive, FAIL or UNPROVEN), 1 any error.
"""

import argparse
import sys

import numpy as np

from .analyzer import AnalysisConfig, AnalysisError, analyze
from .checker import check_listing
from .config import ConfigError, load_config
from .ellipsoid import DomainError
from .lang import InterpError, ParseError, parse, pretty_print
from .lang.facts import fmt
from .lang.syntax import Assign, Guard, Input, Output, Skip
from .lang.printer import format_affine
from .matrix import MatrixError
from .sim import (LCG, SimError, bode_csv, freq_response, log_grid, loop_gain, phase_margin,
                  simulate_closed_loop, simulate_controller)

OK, ERROR, NEGATIVE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise UsageError("cannot read %s: %s" % (path, e.strerror)) from None


def _dump(stmt, depth, out):
    pad = "  " * depth
    if isinstance(stmt, Assign):
        out.append("%s%d: Assign %s := %s" % (pad, stmt.line, stmt.var, format_affine(stmt.expr)))
    elif isinstance(stmt, Input):
        out.append("%s%d: Input %s" % (pad, stmt.line, stmt.var))
    elif isinstance(stmt, Output):
        out.append("%s%d: Output %s" % (pad, stmt.line, format_affine(stmt.expr)))
    elif isinstance(stmt, Skip):
        out.append("%s%d: Skip" % (pad, stmt.line))
    elif isinstance(stmt, Guard):
        out.append("%s%d: Guard %s %s %s" % (pad, stmt.line, stmt.var, stmt.op, fmt(stmt.const)))
        for s in stmt.body:
            _dump(s, depth + 1, out)


def dump_ast(program):
    out = ["Program init=%d body=%d" % (len(program.init), len(program.body)), "init:"]
    for s in program.init:
        _dump(s, 1, out)
    out.append("loop:")
    for s in program.body:
        _dump(s, 1, out)
    return "\n".join(out) + "\n"


def cmd_parse(args):
    program = parse(_read(args.file))
    sys.stdout.write(pretty_print(program) if args.pretty else dump_ast(program))
    return OK


def _analysis_config(cfg, direction="forward", search=False):
    return AnalysisConfig(cfg.P, cfg.lambdas, direction, cfg.tol, search, seed=cfg.seed)


def cmd_analyze(args):
    cfg = load_config(args.config)
    if cfg.P is None:
        raise ConfigError("lyapunov.P is required for analysis")
    program = parse(_read(args.file))
    res = analyze(program, _analysis_config(cfg, args.direction, args.search_lambdas))
    out = [res.listing]
    word = "inductive" if res.direction == "forward" else "certified"
    out.append("# verdict: %s%s margin=%.17g\n" % ("" if res.verdict else "NOT ", word, res.margin))
    if res.certificate is not None:
        out.append("# lambdas: %s\n" % " ".join(fmt(l) for l in res.certificate.lambdas))
    if res.witness is not None:
        out.append("# witness: %s\n" % ",".join("%s=%.17g" % kv for kv in res.witness.items()))
        out.append("# witness next V=%.17g confirmed=%s\n"
                   % (res.witness_next_value, "yes" if res.confirmed else "no"))
    sys.stdout.write("".join(out))
    if args.bounds_out:
        with open(args.bounds_out, "w", encoding="utf-8") as fh:
            fh.write(res.bounds_csv())
    return OK if res.verdict else NEGATIVE


def cmd_check(args):
    cfg = load_config(args.config)
    report = check_listing(_read(args.file), _analysis_config(cfg))
    sys.stdout.write(report.render())
    return OK if report.ok else NEGATIVE


def _inputs(spec):
    kind, _, arg = spec.partition(":")
    if kind == "const":
        v = float(arg)
        while True:
            yield v
    elif kind == "random":
        yield from LCG(int(arg)).stream()
    elif kind == "file":
        for tok in _read(arg).split():
            yield float(tok)
    else:
        raise UsageError("--input must be const:<v>, random:<seed> or file:<path>")


def _check_input_spec(spec):
    kind, sep, arg = spec.partition(":")
    if not sep or kind not in ("const", "random", "file"):
        raise UsageError("--input must be const:<v>, random:<seed> or file:<path>")
    try:
        if kind == "const":
            float(arg)
        elif kind == "random":
            int(arg)
    except ValueError:
        raise UsageError("bad --input value %r" % spec) from None


def cmd_simulate(args):
    cfg = load_config(args.config)
    if cfg.controller is None:
        raise ConfigError("controller.A/B/C/D are required")
    if args.steps < 0:
        raise UsageError("--steps must be nonnegative")
    if args.closed_loop:
        if cfg.plant is None or cfg.h is None:
            raise ConfigError("closed-loop simulation needs plant.* and sim.h")
        try:
            x0 = [float(v) for v in args.plant_x0.split(",")]
        except ValueError:
            raise UsageError("bad --plant-x0 %r" % args.plant_x0) from None
        tr = simulate_closed_loop(cfg.plant, cfg.controller, cfg.h, args.steps, x0, cfg.P)
    else:
        _check_input_spec(args.input)
        tr = simulate_controller(cfg.controller, _inputs(args.input), args.steps, cfg.P)
    sys.stdout.write(tr.to_csv())
    sys.stderr.write(tr.summary() + "\n")
    return OK


def cmd_freq(args):
    cfg = load_config(args.config)
    if cfg.plant is None or cfg.controller_cont is None:
        raise ConfigError("frequency analysis needs plant.* and controller.Ac/Bc")
    L = loop_gain(cfg.plant, cfg.controller_cont)
    if args.margin:
        pm, wc = phase_margin(L, args.wmin, args.wmax, args.points)
        sys.stdout.write("PM=%.6f at w=%.6f\n" % (pm, wc))
        return OK
    pts = freq_response(L, log_grid(args.wmin, args.wmax, args.points))
    for p in pts:
        if p.detour:
            sys.stderr.write("detour: loop gain singular at w=%r, evaluated at w+-1e-9\n" % p.omega)
    sys.stdout.write(bode_csv(pts))
    return OK


def _matrix_text(M):
    M = np.atleast_2d(M)
    return "[" + "; ".join(" ".join(fmt(v) for v in row) for row in M) + "]"


def cmd_discretize(args):
    cfg = load_config(args.config)
    d = cfg.discretized_controller(args.h, args.method)
    for k, M in zip("ABCD", (d.A, d.B, d.C, d.D)):
        sys.stdout.write("controller.%s = %s\n" % (k, _matrix_text(M)))
    sys.stdout.write("sim.h = %s\n" % fmt(args.h))
    return OK


def build_parser():
    p = _Parser(prog="ellipcert", description="Ellipsoid invariant certification for "
                "linear controller programs.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("parse", help="parse a program and dump its AST")
    s.add_argument("file")
    s.add_argument("--pretty", action="store_true", help="print the normal form instead")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("analyze", help="annotate a program and decide inductiveness")
    s.add_argument("file")
    s.add_argument("--config", required=True)
    s.add_argument("--direction", choices=("forward", "backward"), default="forward")
    s.add_argument("--search-lambdas", action="store_true")
    s.add_argument("--bounds-out")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("check", help="check an annotated listing")
    s.add_argument("file")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("simulate", help="simulate the controller or the closed loop")
    s.add_argument("--config", required=True)
    s.add_argument("--steps", type=int, default=10000)
    s.add_argument("--input", default="const:0")
    s.add_argument("--closed-loop", action="store_true")
    s.add_argument("--plant-x0", default="1,0")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("freq", help="loop-gain Bode data and phase margin")
    s.add_argument("--config", required=True)
    s.add_argument("--wmin", type=float, default=1e-2)
    s.add_argument("--wmax", type=float, default=1e4)
    s.add_argument("--points", type=int, default=400)
    s.add_argument("--margin", action="store_true")
    s.set_defaults(func=cmd_freq)

    s = sub.add_parser("discretize", help="discretize the continuous controller")
    s.add_argument("--config", required=True)
    s.add_argument("--method", choices=("euler", "zoh"), default="euler")
    s.add_argument("--h", type=float, required=True)
    s.set_defaults(func=cmd_discretize)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        return args.func(args)
    except ParseError as e:
        path = getattr(args, "file", "<input>")
        for d in e.diagnostics:
            sys.stderr.write("%s:%s\n" % (path, d))
        return ERROR
    except (UsageError, ConfigError, AnalysisError, DomainError, MatrixError, SimError,
            InterpError, OSError) as e:
        sys.stderr.write("error: %s\n" % e)
        return ERROR


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
