import numpy as np
import pytest

from mfgellip import elliptic, model, oracle
from mfgellip.model import CouplingSpec, TrigPoly
from mfgellip.selftest import sample_states

from conftest import make_spec, mixed_2d_spec

LINEAR = CouplingSpec("Linear", a=1.0, b_log=0.0)
X0 = np.zeros(1)


def test_assemble_A_examples():
    np.testing.assert_allclose(elliptic.assemble_A(make_spec(), X0, np.zeros(1), 0.0), np.eye(2))
    A = elliptic.assemble_A(make_spec(coupling=LINEAR), X0, np.array([2.0]), -1.0)
    np.testing.assert_allclose(A, [[7.0, -2.0], [-2.0, 1.0]])
    assert np.linalg.det(A) == pytest.approx(3.0, rel=1e-14)


def test_A_symmetric_and_psd(rng):
    spec = mixed_2d_spec()
    x, p, s = sample_states(rng, spec, 10_000)
    A = elliptic.assemble_A(spec, x, p, s)
    assert np.array_equal(A, np.swapaxes(A, -1, -2))
    ev = np.linalg.eigvalsh(A)
    assert np.all(ev[:, 0] > 0.0)
    assert np.all(ev[:, 0] >= -1e-12 * np.abs(ev).max(axis=1))


def test_determinant_identity(rng):
    spec = mixed_2d_spec()
    x, p, s = sample_states(rng, spec, 10_000)
    A = elliptic.assemble_A(spec, x, p, s)
    chi = model.eval_chi(spec, x, -s + spec.H(x, p)).chi
    want = chi**2 * np.linalg.det(spec.hamiltonian.matrix)
    assert np.abs(np.linalg.det(A) / want - 1).max() <= 1e-12


def test_b_examples():
    spec = make_spec()
    for p in ([0.0], [3.0], [-1.5]):
        assert elliptic.assemble_b(spec, X0, np.array(p), 0.7) == 0.0
    sv = make_spec(V=TrigPoly.cosine(1.0))
    b = elliptic.assemble_b(sv, np.array([0.25]), np.array([3.0]), 0.0)
    assert b == pytest.approx(-6 * np.pi, rel=1e-12)
    b2 = elliptic.assemble_b(sv, np.array([0.25]), np.array([3.0]), -2.0)
    assert b2 == b


def test_boundary_examples():
    bb = elliptic.assemble_boundary(make_spec(), X0, "start", 0.0, np.array([1.0]), 0.5)
    assert bb.B == pytest.approx(0.0, abs=1e-15)
    assert bb.obliqueness() == pytest.approx(1.0)
    be = elliptic.assemble_boundary(make_spec(), X0, "end", 1.0, np.zeros(1), 0.0)
    assert be.B == pytest.approx(0.0, abs=1e-15)
    bl = elliptic.assemble_boundary(make_spec(coupling=LINEAR), X0, "end", 2.0, np.array([0.5]), -1.0)
    assert bl.obliqueness() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        elliptic.assemble_boundary(make_spec(), X0, "middle", 0.0, np.zeros(1), 0.0)


def test_obliqueness_positive_everywhere(rng):
    spec = make_spec(coupling=CouplingSpec("PowerLog", a=1.0, theta_exp=2.0, b_log=0.3),
                     terminal=model.TerminalSpec(c=2.0, kappa=0.5))
    x, p, s = sample_states(rng, spec, 1000)
    be = elliptic.assemble_boundary(spec, x, "end", np.zeros(1000), p, s)
    assert np.all(be.obliqueness() > 0)


def test_dA_ds_examples():
    dA, _ = elliptic.q_derivatives(make_spec(), X0, np.array([0.4]), 0.1)
    assert np.all(dA[-1] == 0)
    dA, _ = elliptic.q_derivatives(make_spec(coupling=LINEAR), X0, np.array([2.0]), -1.0)
    np.testing.assert_allclose(dA[-1], [[-1.0, 0.0], [0.0, 0.0]])


@pytest.mark.parametrize("which", ["2d", "se1d", "de1d"])
def test_q_derivatives_match_differences(which, rng):
    spec = {
        "2d": mixed_2d_spec(),
        "se1d": make_spec(coupling=CouplingSpec("PowerLog", a=1.0, theta_exp=1.5, b_log=0.5),
                          V=TrigPoly.cosine(0.3), F=TrigPoly.sine(0.2)),
        "de1d": make_spec(coupling=CouplingSpec("Power", a=1.0, theta_exp=2.0, b_log=0.0), V=TrigPoly.cosine(0.3)),
    }[which]
    d = spec.d
    x, p, s = sample_states(rng, spec, 100, box=1.5)
    if which == "de1d":
        s = -np.abs(s) - 0.5  # keep w = -s + H well inside the range of f
    dA, db = elliptic.q_derivatives(spec, x, p, s)
    for k in range(d + 1):
        h = 1e-6
        qp, qm = [p.copy(), s.copy()], [p.copy(), s.copy()]
        if k < d:
            qp[0][:, k] += h
            qm[0][:, k] -= h
        else:
            qp[1] = s + h
            qm[1] = s - h
        fdA = (elliptic.assemble_A(spec, x, *qp) - elliptic.assemble_A(spec, x, *qm)) / (2 * h)
        fdb = (elliptic.assemble_b(spec, x, *qp) - elliptic.assemble_b(spec, x, *qm)) / (2 * h)
        scaleA = 1 + np.abs(dA[:, k]).max(axis=(1, 2))
        assert np.all(np.abs(fdA - dA[:, k]).max(axis=(1, 2)) <= 1e-6 * scaleA)
        assert np.all(np.abs(fdb - db[:, k]) <= 1e-6 * (1 + np.abs(db[:, k])))


def test_residual_examples():
    spec = make_spec()
    assert elliptic.residual_at_node(spec, X0, np.zeros(1), 0.0, np.zeros((2, 2))) == 0.0
    assert elliptic.residual_at_node(spec, X0, np.zeros(1), -2.0, np.zeros((2, 2))) == 0.0


def test_residual_matches_transport_form(rng):
    for spec in (mixed_2d_spec(), make_spec(coupling=CouplingSpec("PowerLog", a=2.0, b_log=0.5),
                                            V=TrigPoly.cosine(0.2), F=TrigPoly.sine(0.3))):
        d = spec.d
        x, p, s = sample_states(rng, spec, 500, box=2.0)
        X = rng.normal(size=(500, d + 1, d + 1))
        X = 0.5 * (X + np.swapaxes(X, -1, -2))
        a = elliptic.residual_at_node(spec, x, p, s, X)
        b = oracle.reduced_operator(spec, x, p, s, X)
        assert np.all(np.abs(a - b) <= 1e-12 * (1 + np.abs(a)))


def test_trace_inequality(rng):
    spec = mixed_2d_spec()
    x, p, s = sample_states(rng, spec, 10_000)
    X = rng.normal(size=(10_000, 3, 3))
    X = 0.5 * (X + np.swapaxes(X, -1, -2))
    lhs, rhs = elliptic.trace_inequality_terms(spec, x, p, s, X)
    assert int((lhs < rhs - 1e-10 * np.maximum(1.0, np.abs(lhs))).sum()) == 0


def test_domain_error_propagates():
    spec = make_spec(coupling=LINEAR)
    with pytest.raises(model.DomainError):
        elliptic.assemble_A(spec, X0, np.zeros(1), 5.0)
