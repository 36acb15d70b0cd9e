"""Line-oriented run configuration.

    # comment
    controller.A = [0.499 -0.05; 0.01 1.0]
    sim.h = 0.01

Matrix rows are ";"-separated and entries whitespace-separated; a bare
number is a 1x1 value.
"""

from dataclasses import dataclass
import math

import numpy as np

from .matrix import is_psd, symmetrize
from .sim import StateSpace, euler_discretize, zoh_discretize

KEYS = {
    "controller.A", "controller.B", "controller.C", "controller.D",
    "controller.Ac", "controller.Bc",
    "plant.A", "plant.B", "plant.C", "plant.D",
    "lyapunov.P", "analysis.lambdas", "analysis.tol", "sim.h", "sim.seed",
}


class ConfigError(ValueError):
    pass


def parse_value(text, where=""):
    s = text.strip()
    if s.startswith("["):
        if not s.endswith("]"):
            raise ConfigError("%sunterminated matrix" % where)
        body = s[1:-1].strip()
        if not body:
            return np.zeros((0, 0))
        try:
            rows = [[float(x) for x in r.split()] for r in body.split(";")]
        except ValueError:
            raise ConfigError("%sbad matrix entry in %s" % (where, s)) from None
        if len({len(r) for r in rows}) != 1:
            raise ConfigError("%sragged matrix %s" % (where, s))
        return np.array(rows, dtype=float)
    try:
        return np.array([[float(s)]])
    except ValueError:
        raise ConfigError("%sexpected a number or matrix, got %r" % (where, s)) from None


def parse_config_text(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value'" % lineno)
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError("line %d: unknown key '%s'" % (lineno, key))
        if key in values:
            raise ConfigError("line %d: duplicate key '%s'" % (lineno, key))
        values[key] = parse_value(val, "line %d: " % lineno)
    return values


@dataclass
class RunConfig:
    controller: StateSpace = None
    controller_cont: StateSpace = None
    plant: StateSpace = None
    P: np.ndarray = None
    lambdas: tuple = ()
    tol: float = 1e-9
    h: float = None
    seed: int = 0

    def discretized_controller(self, h=None, method="euler"):
        if self.controller_cont is None:
            raise ConfigError("controller.Ac/Bc are required for discretization")
        h = self.h if h is None else h
        if h is None:
            raise ConfigError("no step size: pass --h or set sim.h")
        if method == "euler":
            return euler_discretize(self.controller_cont, h)
        if method == "zoh":
            return zoh_discretize(self.controller_cont, h)
        raise ConfigError("unknown method '%s'" % method)


def _system(values, prefix, dt=None):
    names = ["%s.%s" % (prefix, k) for k in "ABCD"]
    present = [n in values for n in names]
    if not any(present):
        return None
    if not all(present):
        raise ConfigError("%s needs all of A, B, C, D" % prefix)
    A, B, C, D = (values[n] for n in names)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n or D.shape != (C.shape[0], B.shape[1]):
        raise ConfigError("%s matrices have inconsistent sizes A%s B%s C%s D%s"
                          % (prefix, A.shape, B.shape, C.shape, D.shape))
    return StateSpace(A, B, C, D, dt)


def _scalar(values, key, default):
    if key not in values:
        return default
    v = values[key]
    if v.shape != (1, 1):
        raise ConfigError("%s must be a number" % key)
    return float(v[0, 0])


def build_config(values):
    cfg = RunConfig()
    cfg.h = _scalar(values, "sim.h", None)
    if cfg.h is not None and not cfg.h > 0:
        raise ConfigError("sim.h must be positive")
    cfg.tol = _scalar(values, "analysis.tol", 1e-9)
    if not cfg.tol >= 0:
        raise ConfigError("analysis.tol must be nonnegative")
    seed = _scalar(values, "sim.seed", 0.0)
    if seed != math.floor(seed):
        raise ConfigError("sim.seed must be an integer")
    cfg.seed = int(seed)
    cfg.controller = _system(values, "controller", cfg.h)
    cfg.plant = _system(values, "plant")
    if ("controller.Ac" in values) != ("controller.Bc" in values):
        raise ConfigError("controller.Ac and controller.Bc go together")
    if "controller.Ac" in values:
        if cfg.controller is None:
            raise ConfigError("controller.Ac needs controller.C and controller.D")
        Ac, Bc = values["controller.Ac"], values["controller.Bc"]
        if Ac.shape != cfg.controller.A.shape or Bc.shape != cfg.controller.B.shape:
            raise ConfigError("controller.Ac/Bc must match controller.A/B in size")
        cfg.controller_cont = StateSpace(Ac, Bc, cfg.controller.C, cfg.controller.D)
    if "lyapunov.P" in values:
        P = values["lyapunov.P"]
        if P.shape[0] != P.shape[1]:
            raise ConfigError("lyapunov.P must be square")
        if not np.array_equal(P, P.T):
            raise ConfigError("lyapunov.P must be symmetric")
        ok, lmin = is_psd(P, 0.0)
        if not ok or lmin <= 0:
            raise ConfigError("lyapunov.P must be positive definite (min eigenvalue %g)" % lmin)
        if cfg.controller is not None and P.shape != cfg.controller.A.shape:
            raise ConfigError("lyapunov.P is %s but controller.A is %s"
                              % (P.shape, cfg.controller.A.shape))
        cfg.P = symmetrize(P)
    if "analysis.lambdas" in values:
        lam = values["analysis.lambdas"]
        if lam.shape[0] != 1:
            raise ConfigError("analysis.lambdas must be a row vector")
        cfg.lambdas = tuple(float(x) for x in lam[0])
        if any(x <= 0 for x in cfg.lambdas) or sum(cfg.lambdas) > 1 + 1e-12:
            raise ConfigError("analysis.lambdas must be positive with sum <= 1")
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError("cannot read %s: %s" % (path, e.strerror)) from None
    return build_config(parse_config_text(text))
