import numpy as np
import pytest
from scipy.linalg import expm

from ellipcert.config import ConfigError, build_config, load_config, parse_config_text, parse_value
from helpers import A_LL, AC_LL, CORPUS, LAMBDAS_LL, P_LL

BASE = """
controller.A = [0.5]
controller.B = [0.5]
controller.C = [1]
controller.D = [0]
"""


def cfg(text):
    return build_config(parse_config_text(text))


def test_parse_value():
    assert np.array_equal(parse_value("[1 2; 3 4]"), [[1, 2], [3, 4]])
    assert parse_value("  -1280 ").tolist() == [[-1280.0]]
    assert parse_value("[]").shape == (0, 0)
    for bad in ("[1 2; 3]", "[1 x]", "[1 2", "abc"):
        with pytest.raises(ConfigError):
            parse_value(bad)


def test_paper_config_loads():
    c = load_config(CORPUS / "paper_ll.cfg")
    assert np.array_equal(c.controller.A, A_LL) and c.controller.dt == 0.01
    assert np.array_equal(c.P, P_LL) and c.lambdas == LAMBDAS_LL
    assert np.array_equal(c.controller_cont.A, AC_LL) and c.controller_cont.dt is None
    assert c.plant.n == 2 and c.h == 0.01 and c.seed == 1 and c.tol == 1e-9


def test_discretized_controller_matches_config():
    c = load_config(CORPUS / "paper_ll.cfg")
    d = c.discretized_controller()
    assert np.array_equal(d.A, c.controller.A) and np.array_equal(d.B, c.controller.B)
    z = c.discretized_controller(0.01, "zoh")
    assert np.allclose(z.A, expm(AC_LL * 0.01), rtol=1e-12, atol=1e-14)
    with pytest.raises(ConfigError):
        c.discretized_controller(0.01, "tustin")


def test_small_configs():
    c = load_config(CORPUS / "scalar.cfg")
    assert c.P.tolist() == [[1.0]] and c.controller is None
    assert load_config(CORPUS / "diag2.cfg").P.tolist() == [[0.25, 0.0], [0.0, 1.0]]


def test_comments_and_blank_lines():
    c = cfg("# only a comment\n\n" + BASE + "sim.h = 0.1  # trailing\n")
    assert c.h == 0.1 and c.controller.dt == 0.1


@pytest.mark.parametrize("text, match", [
    ("foo.bar = 1", "unknown key"),
    ("sim.h = 1\nsim.h = 2", "duplicate"),
    ("sim.h", "key = value"),
    ("sim.h = 0", "positive"),
    ("sim.h = [1 2]", "number"),
    ("sim.seed = 1.5", "integer"),
    ("analysis.tol = -1", "nonnegative"),
    ("controller.A = [1]", "all of A, B, C, D"),
    (BASE.replace("controller.B = [0.5]", "controller.B = [0.5; 1]"), "inconsistent"),
    ("lyapunov.P = [1 2; 3 4]", "symmetric"),
    ("lyapunov.P = [1 0; 0 -1]", "positive definite"),
    ("lyapunov.P = [1 2]", "square"),
    (BASE + "lyapunov.P = [1 0; 0 1]", "controller.A"),
    ("analysis.lambdas = [0.6 0.6]", "sum"),
    ("analysis.lambdas = [0 1]", "positive"),
    ("analysis.lambdas = [0.5; 0.5]", "row vector"),
    (BASE + "controller.Ac = [1]", "go together"),
    ("controller.Ac = [1]\ncontroller.Bc = [1]", "needs controller.C"),
    (BASE + "controller.Ac = [1 0; 0 1]\ncontroller.Bc = [1; 1]", "match"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        cfg(text)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/x.cfg")


def test_no_step_for_discretization():
    c = cfg(BASE + "controller.Ac = [-1]\ncontroller.Bc = [1]")
    with pytest.raises(ConfigError, match="step"):
        c.discretized_controller()
    with pytest.raises(ConfigError):
        cfg(BASE).discretized_controller(0.1)
