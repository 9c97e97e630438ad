import numpy as np
import pytest

from mfgellip import model
from mfgellip.selftest import benchmark_se

TP = model.TrigPoly


def make_spec(coupling=None, V=None, m0=None, terminal=None, d=1, T=1.0, M=None, F=None):
    coupling = coupling or model.CouplingSpec("Log", b_log=1.0)
    if F is not None:
        coupling = model.CouplingSpec(coupling.family, coupling.a, coupling.theta_exp, coupling.b_log, F)
    return model.ProblemSpec(
        hamiltonian=model.HamiltonianSpec(M=M if M is not None else np.eye(d), V=V or TP()),
        coupling=coupling,
        terminal=terminal or model.TerminalSpec(),
        initial=model.InitialDensitySpec(m0 or TP(1.0)),
        T=T,
        d=d,
    )


def constant_data_spec():
    """f = m, g = m, H = |p|^2 / 2, m0 = 1; solution u = 1 + (T - t)."""
    return make_spec(coupling=model.CouplingSpec("Linear", a=1.0, b_log=0.0))


def de_spec():
    return make_spec(coupling=model.CouplingSpec("Linear", a=1.0, b_log=0.0), m0=TP(1.0) + TP.cosine(0.3))


def x_independent_spec():
    return make_spec(coupling=model.CouplingSpec("PowerLog", a=1.0, b_log=1.0), m0=TP(1.0) + TP.cosine(0.3))


def mixed_2d_spec():
    return make_spec(
        coupling=model.CouplingSpec("PowerLog", a=1.0, theta_exp=0.5, b_log=0.5),
        F=TP.sine(0.2, (0, 1)),
        V=TP.cosine(0.1, (1, 0)),
        M=((2.0, 0.5), (0.5, 1.0)),
        d=2,
    )


@pytest.fixture
def se_spec():
    return benchmark_se()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert on it."""

    def record(number: int, title: str, passed: bool, detail: str):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
