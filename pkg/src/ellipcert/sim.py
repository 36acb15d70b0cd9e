"""Simulation and frequency-domain oracle.

Discretizes continuous realizations, simulates the controller recursion
(with input saturation) and the sampled closed loop, and evaluates loop
gains for phase-margin checks.  Scalar loops are written out explicitly so
the controller simulation performs the same floating-point operations, in
the same order, as the interpreter running the per-entry transcription.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .matrix import ConvergenceError, SingularMatrixError, as_matrix, inf_norm, inverse

SERIES_TOL = 1e-13
MAX_SQUARINGS = 50
MAX_TERMS = 200
DETOUR = 1e-9


class SimError(ValueError):
    pass


@dataclass
class StateSpace:
    """x' = A x + B u, y = C x + D u; discrete when ``dt`` is set."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        self.A = np.zeros((0, 0)) if A.size == 0 else np.atleast_2d(A)
        n = self.A.shape[0]
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if n:
            self.B = np.asarray(self.B, dtype=float).reshape(n, -1)
            self.C = np.asarray(self.C, dtype=float).reshape(-1, n)
        else:
            self.B = np.zeros((0, self.D.shape[1]))
            self.C = np.zeros((self.D.shape[0], 0))
        if self.A.shape != (n, n):
            raise SimError("A must be square, got %s" % (self.A.shape,))
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise SimError("D is %s but the system is %dx%d" % (self.D.shape, self.C.shape[0],
                                                                 self.B.shape[1]))
        if self.dt is not None and not self.dt > 0:
            raise SimError("sample period must be positive, got %r" % self.dt)
        for M in (self.A, self.B, self.C, self.D):
            if not np.all(np.isfinite(M)):
                raise SimError("system matrices must be finite")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def discrete(self):
        return self.dt is not None


def static_gain(k):
    return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[k]])


def euler_discretize(cont, h):
    """A_d = I + h A, B_d = h B."""
    if h < 0:
        raise SimError("step must be nonnegative")
    Ad = np.eye(cont.n) + h * cont.A
    Bd = h * cont.B
    return StateSpace(Ad, Bd, cont.C.copy(), cont.D.copy(), h if h > 0 else None)


def expm(M):
    """Matrix exponential by scaling and squaring of the Taylor series."""
    M = as_matrix(M)
    n = M.shape[0]
    norm = inf_norm(M)
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    if s > MAX_SQUARINGS:
        raise ConvergenceError("matrix norm %.3g needs %d squarings (cap %d)"
                               % (norm, s, MAX_SQUARINGS))
    X = M / (2.0 ** s)
    E = np.eye(n)
    term = np.eye(n)
    for k in range(1, MAX_TERMS + 1):
        term = term @ X / k
        E = E + term
        if inf_norm(term) <= SERIES_TOL * inf_norm(E):
            break
    else:
        raise ConvergenceError("Taylor series did not converge in %d terms" % MAX_TERMS)
    for _ in range(s):
        E = E @ E
    return E


def zoh_discretize(cont, h):
    """Exact zero-order-hold discretization via one augmented exponential."""
    if not h > 0:
        raise SimError("step must be positive")
    n, m = cont.n, cont.B.shape[1]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = cont.A * h
    M[:n, n:] = cont.B * h
    E = expm(M)
    return StateSpace(E[:n, :n], E[:n, n:], cont.C.copy(), cont.D.copy(), h)


def sat(y):
    return min(max(y, -1.0), 1.0)


@dataclass
class Trace:
    names: tuple
    rows: list = field(default_factory=list)
    has_v: bool = False

    def to_csv(self):
        head = ["k", "t", "y", "u"] + list(self.names) + ["V"]
        out = [",".join(head)]
        for r in self.rows:
            vals = [str(r[0])] + [repr(float(v)) for v in r[1:4]] + [repr(float(v)) for v in r[4]]
            vals.append(repr(float(r[5])) if self.has_v else "")
            out.append(",".join(vals))
        return "\n".join(out) + "\n"

    @property
    def u(self):
        return [r[3] for r in self.rows]

    @property
    def V(self):
        return [r[5] for r in self.rows]

    def summary(self):
        mu = max((abs(u) for u in self.u), default=0.0)
        s = "max|u|=%.17g" % mu
        if self.has_v:
            s += " maxV=%.17g" % max(self.V, default=0.0)
        return s


def _matvec(M, x, b=None, y=0.0):
    """Row-wise left-to-right sums starting from 0.0."""
    out = []
    for i in range(M.shape[0]):
        acc = 0.0
        for j in range(M.shape[1]):
            acc += M[i, j] * x[j]
        if b is not None:
            acc += b[i] * y
        out.append(acc)
    return out


def _energy(P, x):
    if P is None:
        return float("nan")
    z = np.array(x)
    return float(z @ P @ z)


def simulate_controller(ctrl, inputs, steps, P=None, x0=None):
    """Run x+ = A x + B SAT(y), u = C x + D SAT(y) for ``steps`` steps.

    The trace has ``steps + 1`` records (one input is consumed per record).
    """
    if ctrl.B.shape[1] != 1 or ctrl.C.shape[0] != 1:
        raise SimError("controller must be single-input single-output")
    feed = iter(inputs)
    x = [0.0] * ctrl.n if x0 is None else [float(v) for v in x0]
    A = ctrl.A
    b = ctrl.B[:, 0]
    c = ctrl.C[0]
    d = float(ctrl.D[0, 0])
    dt = ctrl.dt or 1.0
    P = None if P is None else as_matrix(P)
    tr = Trace(tuple("x%d" % (i + 1) for i in range(ctrl.n)), has_v=P is not None)
    for k in range(steps + 1):
        try:
            y = sat(float(next(feed)))
        except StopIteration:
            raise SimError("input stream exhausted after %d samples" % k) from None
        acc = 0.0
        for j in range(ctrl.n):
            acc += c[j] * x[j]
        u = acc + d * y
        tr.rows.append((k, k * dt, y, u, tuple(x), _energy(P, x)))
        x = _matvec(A, x, b, y)
    return tr


def simulate_closed_loop(plant_cont, ctrl, h, steps, xp0, P=None):
    """Sampled loop: y_k = C_p x_p, u_k = ctrl(SAT(y_k)), u held over [kh, (k+1)h)."""
    plant = zoh_discretize(plant_cont, h)
    xp = np.array(xp0, dtype=float)
    if xp.shape != (plant.n,):
        raise SimError("plant initial state must have %d entries" % plant.n)
    xc = np.zeros(ctrl.n)
    P = None if P is None else as_matrix(P)
    names = tuple("x%d" % (i + 1) for i in range(ctrl.n + plant.n))
    tr = Trace(names, has_v=P is not None)
    u_prev = 0.0
    for k in range(steps + 1):
        y = float(plant.C[0] @ xp + plant.D[0, 0] * u_prev)
        ys = sat(y)
        u = float(ctrl.C[0] @ xc + ctrl.D[0, 0] * ys)
        tr.rows.append((k, k * h, y, u, tuple(xc) + tuple(xp), _energy(P, xc)))
        xc = ctrl.A @ xc + ctrl.B[:, 0] * ys
        xp = plant.A @ xp + plant.B[:, 0] * u
        u_prev = u
    return tr


def series(first, second):
    """Series connection: output of ``first`` drives ``second``."""
    n1, n2 = first.n, second.n
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = first.A
    A[n1:, n1:] = second.A
    A[n1:, :n1] = second.B @ first.C
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return StateSpace(A, B, C, D)


def negate(sys):
    return StateSpace(sys.A, sys.B, -sys.C, -sys.D, sys.dt)


def loop_gain(plant, compensator):
    """Negative-feedback return ratio L = -K P for the loop u = K y."""
    return negate(series(plant, compensator))


@dataclass
class FreqPoint:
    omega: float
    mag: float
    phase_deg: float
    detour: bool = False

    @property
    def mag_db(self):
        return 20.0 * math.log10(self.mag) if self.mag > 0 else -math.inf


def _eval(sys, w):
    n = sys.n
    D = float(sys.D[0, 0])
    if n == 0:
        return complex(D, 0.0)
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -sys.A
    M[n:, n:] = -sys.A
    M[:n, n:] = -w * np.eye(n)
    M[n:, :n] = w * np.eye(n)
    rhs = np.concatenate([sys.B[:, 0], np.zeros(n)])
    sol = inverse(M) @ rhs
    c = sys.C[0]
    return complex(float(c @ sol[:n]) + D, float(c @ sol[n:]))


def evaluate(sys, w):
    """G(jw) with the detour rule; returns (value, detoured)."""
    if not w > 0:
        raise SimError("frequency must be positive, got %r" % w)
    try:
        return _eval(sys, w), False
    except SingularMatrixError:
        pass
    for dw in (DETOUR, -DETOUR):
        try:
            return _eval(sys, w + dw), True
        except SingularMatrixError:
            continue
    raise SimError("jwI - A is singular at w = %r" % w)


def freq_response(sys, omegas):
    if sys.discrete:
        raise SimError("frequency response expects a continuous system")
    out = []
    for w in omegas:
        g, det = evaluate(sys, float(w))
        out.append(FreqPoint(float(w), abs(g), math.degrees(math.atan2(g.imag, g.real)), det))
    return out


def bode_csv(points):
    lines = ["omega,mag_db,phase_deg"]
    for p in points:
        lines.append("%r,%r,%r" % (p.omega, p.mag_db, p.phase_deg))
    return "\n".join(lines) + "\n"


def log_grid(wmin, wmax, points):
    if not (0 < wmin < wmax) or points < 2:
        raise SimError("need 0 < wmin < wmax and at least 2 points")
    return np.logspace(math.log10(wmin), math.log10(wmax), points)


def _margin_phase(phase):
    """Phase folded into (-360, 0] so that 180 + phase is the margin."""
    return phase - 360.0 if phase > 0 else phase


def phase_margin(loop, wmin=1e-2, wmax=1e4, points=400, iterations=60):
    """Smallest phase margin over all gain crossovers on the log grid.

    Returns ``(pm_degrees, crossover_omega)``.
    """
    grid = log_grid(wmin, wmax, points)
    f = [math.log(abs(evaluate(loop, w)[0])) for w in grid]
    crossings = []
    for i in range(len(grid)):
        if f[i] == 0.0:
            crossings.append(float(grid[i]))
        elif i + 1 < len(grid) and f[i] * f[i + 1] < 0:
            lo, hi = math.log(grid[i]), math.log(grid[i + 1])
            flo = f[i]
            for _ in range(iterations):
                mid = 0.5 * (lo + hi)
                fm = math.log(abs(evaluate(loop, math.exp(mid))[0]))
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            crossings.append(math.exp(0.5 * (lo + hi)))
    if not crossings:
        raise SimError("loop gain does not cross unity on [%g, %g]" % (wmin, wmax))
    best = None
    for w in crossings:
        g, _ = evaluate(loop, w)
        pm = 180.0 + _margin_phase(math.degrees(math.atan2(g.imag, g.real)))
        if best is None or pm < best[0]:
            best = (pm, w)
    return best


class LCG:
    """64-bit linear congruential generator (Knuth's MMIX constants).

    x <- (6364136223846793005 x + 1442695040888963407) mod 2^64; the top 53
    bits give a double in [0, 1).
    """

    MUL = 6364136223846793005
    INC = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed=0):
        self.state = int(seed) & self.MASK

    def next_u64(self):
        self.state = (self.MUL * self.state + self.INC) & self.MASK
        return self.state

    def random(self):
        return (self.next_u64() >> 11) / float(1 << 53)

    def uniform(self, lo, hi):
        return lo + (hi - lo) * self.random()

    def stream(self, lo=-2.0, hi=2.0):
        while True:
            yield self.uniform(lo, hi)

