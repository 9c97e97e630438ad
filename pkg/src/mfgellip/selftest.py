"""Fast property checks behind ``mfgellip selftest``; deterministic seeds throughout."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import elliptic, oracle
from . import grid as gr
from . import model
from . import solver as sv

SEED = 20240611


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def benchmark_se() -> model.ProblemSpec:
    """f = m + log m, g = m, H = |p|^2/2 - 0.1 cos 2 pi x, m0 = 1 + 0.3 cos 2 pi x."""
    tp = model.TrigPoly
    return model.ProblemSpec(
        hamiltonian=model.HamiltonianSpec(V=tp.cosine(0.1)),
        coupling=model.CouplingSpec("PowerLog", a=1.0, theta_exp=1.0, b_log=1.0),
        terminal=model.TerminalSpec(),
        initial=model.InitialDensitySpec(tp(1.0) + tp.cosine(0.3)),
    )


def _mixed_2d() -> model.ProblemSpec:
    tp = model.TrigPoly
    return model.ProblemSpec(
        hamiltonian=model.HamiltonianSpec(M=((2.0, 0.5), (0.5, 1.0)), V=tp.cosine(0.1, (1, 0))),
        coupling=model.CouplingSpec("PowerLog", a=1.0, theta_exp=0.5, b_log=0.5, F=tp.sine(0.2, (0, 1))),
        d=2,
    )


def sample_states(rng, spec: model.ProblemSpec, n: int, box: float = 3.0):
    x = rng.random((n, spec.d))
    p = rng.uniform(-box, box, (n, spec.d))
    s = rng.uniform(-box, box, n)
    return x, p, s


def check_inverse(rng) -> tuple[bool, str]:
    spec = benchmark_se()
    x = rng.random((4000, 1))
    w = rng.uniform(-5, 10, 4000)
    m = spec.f_inv(x, w)
    err = float(np.abs(spec.f(x, m) - w).max() / np.abs(w).max())
    return err <= 1e-12, f"max rel |f(f^-1(w)) - w| = {err:.2e}"


def check_determinant(rng) -> tuple[bool, str]:
    spec = _mixed_2d()
    x, p, s = sample_states(rng, spec, 10_000)
    A = elliptic.assemble_A(spec, x, p, s)
    chi = model.eval_chi(spec, x, -s + spec.H(x, p)).chi
    want = chi**spec.d * np.linalg.det(spec.hamiltonian.matrix)
    err = float(np.abs(np.linalg.det(A) / want - 1.0).max())
    return err <= 1e-12, f"max rel det error = {err:.2e}"


def check_trace(rng) -> tuple[bool, str]:
    spec = _mixed_2d()
    x, p, s = sample_states(rng, spec, 10_000)
    X = rng.normal(size=(10_000, 3, 3))
    X = 0.5 * (X + np.swapaxes(X, -1, -2))
    lhs, rhs = elliptic.trace_inequality_terms(spec, x, p, s, X)
    slack = 1e-10 * np.maximum(1.0, np.abs(lhs))
    bad = int((lhs < rhs - slack).sum())
    return bad == 0, f"{bad} violations, min margin {float((lhs - rhs).min()):.3g}"


def jacobian_fd_error(spec, grid, U, rng, columns: int | None = None, epsilon: float = 0.0) -> float:
    _, J = sv.assemble_residual_and_jacobian(spec, grid, U, epsilon)
    J = J.tocsc()
    cols = range(U.size) if columns is None else rng.choice(U.size, columns, replace=False)
    worst = 0.0
    for c in cols:
        h = 1e-6 * (1.0 + abs(U[c]))
        e = np.zeros_like(U)
        e[c] = h
        fd = (sv.residual(spec, grid, U + e, epsilon) - sv.residual(spec, grid, U - e, epsilon)) / (2 * h)
        an = J[:, c].toarray().ravel()
        worst = max(worst, float(np.linalg.norm(fd - an) / max(np.linalg.norm(an), 1e-300)))
    return worst


def check_jacobian(rng) -> tuple[bool, str]:
    spec = benchmark_se()
    grid = gr.GridSpec(1, 16, 8)
    base = sv.continuation_solve(spec, grid).u.values.ravel()
    worst = 0.0
    for _ in range(3):
        U = base + 0.05 * rng.standard_normal(base.size)
        worst = max(worst, jacobian_fd_error(spec, grid, U, rng, columns=40))
    return worst <= 1e-6, f"max rel column error = {worst:.2e}"


def check_trivial(rng) -> tuple[bool, str]:
    spec = benchmark_se().at_theta(0.0)
    grid = gr.GridSpec(1, 64, 32)
    x = grid.space_points()[..., 0]
    U0 = np.broadcast_to(1.0 + 0.1 * np.sin(2 * np.pi * x), grid.shape)
    r = sv.newton_solve(spec, grid, U0)
    err = float(np.abs(r.U - 1.0).max())
    return r.converged and r.iterations <= 10 and err <= 1e-10, f"{r.iterations} iterations, |u - 1| = {err:.1e}"


def check_pointwise_oracle(rng) -> tuple[bool, str]:
    spec = _mixed_2d()
    x, p, s = sample_states(rng, spec, 2000, box=2.0)
    X = rng.normal(size=(2000, 3, 3))
    X = X + np.swapaxes(X, -1, -2)
    a = elliptic.residual_at_node(spec, x, p, s, X)
    b = oracle.reduced_operator(spec, x, p, s, X)
    err = float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))
    return err <= 1e-12, f"max rel difference = {err:.2e}"


def check_oracle(rng) -> tuple[bool, str]:
    spec = benchmark_se()
    diffs = []
    for nx, nt in ((8, 4), (16, 8)):
        grid = gr.GridSpec(1, nx, nt)
        ro = oracle.coupled_continuation(spec, grid)
        re = sv.continuation_solve(spec, grid)
        if not (ro.converged and re.converged):
            return False, f"solve failed on {nx}x{nt}"
        diffs.append(float(np.abs(ro.state.u.values - re.u.values).max()))
    ratio = diffs[0] / diffs[1]
    return ratio >= 1.5 and diffs[1] <= 0.15, f"sup differences {diffs[0]:.3g} -> {diffs[1]:.3g} (ratio {ratio:.2f})"


CHECKS: list[tuple[str, Callable]] = [
    ("inverse round trip", check_inverse),
    ("determinant identity", check_determinant),
    ("trace inequality", check_trace),
    ("Jacobian vs differences", check_jacobian),
    ("trivial solution", check_trivial),
    ("reduced operator vs transport form", check_pointwise_oracle),
    ("coupled oracle cross-check", check_oracle),
]


def run_all() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS:
        rng = np.random.default_rng(SEED)
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash is a failed check, not a crashed self-test
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
