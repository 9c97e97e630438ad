"""Reference solver for the coupled (u, m) system on tiny one-dimensional grids.

The unknowns are u and m jointly; the rows are

* Hamilton-Jacobi  -u_t + H(x, D_x u) - f(x, m) = 0   at every node,
* Fokker-Planck    m_t - (m D_pH)_x = 0                at interior times,
* m(., 0) = m0  and  u(., T) = g(., m(., T)).

The Jacobian is a dense central-difference approximation.  Nothing here goes
through the reduced coefficients, so agreement with :mod:`mfgellip.solver`
cross-checks the reduction itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import grid as gr
from .model import DomainError, ProblemSpec

log = logging.getLogger(__name__)

MAX_NX = 48
MAX_NT = 24
FD_STEP = 1e-7


@dataclass
class CoupledState:
    u: gr.SpaceTimeField
    m: gr.SpaceTimeField

    def pack(self) -> np.ndarray:
        return np.concatenate([self.u.flat(), self.m.flat()])

    @classmethod
    def unpack(cls, U: np.ndarray, grid: gr.GridSpec) -> "CoupledState":
        n = grid.n_nodes
        return cls(gr.SpaceTimeField(U[:n].reshape(grid.shape), grid), gr.SpaceTimeField(U[n:].reshape(grid.shape), grid))

    @classmethod
    def constant(cls, grid: gr.GridSpec, u: float = 1.0, m: float = 1.0) -> "CoupledState":
        return cls(gr.SpaceTimeField(np.full(grid.shape, u), grid), gr.SpaceTimeField(np.full(grid.shape, m), grid))


@dataclass
class OracleResult:
    state: CoupledState
    iterations: int
    residuals: list[float]
    converged: bool
    status: str
    message: str = ""


def _check_grid(grid: gr.GridSpec) -> None:
    if grid.d != 1:
        raise ValueError("oracle supports d=1 only")
    if grid.nx > MAX_NX or grid.nt > MAX_NT:
        raise ValueError(f"oracle grid too large ({grid.nx}x{grid.nt}); limit {MAX_NX}x{MAX_NT}")


def coupled_residual(spec: ProblemSpec, grid: gr.GridSpec, state: CoupledState | np.ndarray, epsilon: float = 0.0) -> np.ndarray:
    if isinstance(state, CoupledState):
        u, m = state.u.values, state.m.values
    else:
        n = grid.n_nodes
        u, m = state[:n].reshape(grid.shape), state[n:].reshape(grid.shape)
    if np.any(m <= 0.0):
        raise DomainError("density must stay positive")
    eff = spec.with_viscosity(epsilon)
    x = grid.space_points()
    h = grid.dx

    p, s = gr.gradient(u, grid)
    hj = -s + eff.H(x, p) - eff.f(x, m)

    # fluxes at half nodes i + 1/2, built from compact differences
    x_half = x + 0.5 * h
    p_half = ((np.roll(u, -1, axis=1) - u) / h)[..., None]
    m_half = 0.5 * (m + np.roll(m, -1, axis=1))
    flux = m_half * eff.DpH(x_half, p_half)[..., 0]
    div = (flux - np.roll(flux, 1, axis=1)) / h
    fp = (m[2:] - m[:-2]) / (2 * grid.dt) - div[1:-1]

    init = m[0] - eff.m0(x)
    term = u[-1] - eff.g(x, m[-1])
    return np.concatenate([hj.ravel(), init, fp.ravel(), term])


def fd_jacobian(spec, grid, U, epsilon=0.0) -> np.ndarray:
    n = U.size
    J = np.empty((n, n))
    for k in range(n):
        step = FD_STEP * (1.0 + abs(U[k]))
        up, dn = U.copy(), U.copy()
        up[k] += step
        dn[k] -= step
        J[:, k] = (coupled_residual(spec, grid, up, epsilon) - coupled_residual(spec, grid, dn, epsilon)) / (2 * step)
    return J


def coupled_solve(
    spec: ProblemSpec,
    grid: gr.GridSpec,
    initial: CoupledState | None = None,
    epsilon: float = 0.0,
    abs_tol: float = 1e-10,
    max_iters: int = 50,
    armijo_c: float = 1e-4,
    min_step: float = 1e-10,
) -> OracleResult:
    """Damped Newton on the coupled system; backtracks whenever m leaves (0, inf)."""
    _check_grid(grid)
    state = initial or CoupledState.constant(grid)
    U = state.pack().astype(float)
    try:
        F = coupled_residual(spec, grid, U, epsilon)
    except DomainError as exc:
        return OracleResult(state, 0, [], False, "domain_failure", str(exc))
    res = [float(np.abs(F).max())]
    for it in range(max_iters + 1):
        if res[-1] <= abs_tol:
            return OracleResult(CoupledState.unpack(U, grid), it, res, True, "converged")
        if it == max_iters:
            break
        J = fd_jacobian(spec, grid, U, epsilon)
        delta = np.linalg.solve(J, -F)
        phi0 = 0.5 * float(F @ F)
        lam = 1.0
        while True:
            trial = U + lam * delta
            try:
                Ft = coupled_residual(spec, grid, trial, epsilon)
                if 0.5 * float(Ft @ Ft) <= (1.0 - 2.0 * armijo_c * lam) * phi0:
                    break
            except DomainError:
                pass
            lam *= 0.5
            if lam < min_step:
                # the FD Jacobian limits attainable accuracy; accept a stagnated tiny residual
                if res[-1] <= 1e3 * abs_tol:
                    return OracleResult(CoupledState.unpack(U, grid), it, res, True, "converged", "stagnated near tolerance")
                return OracleResult(CoupledState.unpack(U, grid), it, res, False, "stalled", "line search failed")
        U, F = trial, Ft
        res.append(float(np.abs(F).max()))
        log.debug("oracle it=%d |F|=%.3e", it + 1, res[-1])
    return OracleResult(CoupledState.unpack(U, grid), max_iters, res, False, "stalled", "iteration cap reached")


def coupled_continuation(spec: ProblemSpec, grid: gr.GridSpec, epsilon: float = 0.0, steps: int = 5, **kw) -> OracleResult:
    """Fixed theta ladder from the trivial data, halving the step on failure."""
    state = CoupledState.constant(grid)
    theta, step = 0.0, 1.0 / steps
    total = 0
    while theta < 1.0:
        target = min(1.0, theta + step)
        r = coupled_solve(spec.at_theta(target), grid, state, epsilon, **kw)
        total += r.iterations
        if r.converged:
            theta, state = target, r.state
            continue
        step *= 0.5
        if step < 1e-3:
            return OracleResult(state, total, r.residuals, False, "stalled", f"theta ladder stalled at {theta:.4g}")
    return OracleResult(state, total, r.residuals, True, "converged")


def reduced_operator(spec: ProblemSpec, x, p, s, hess) -> np.ndarray:
    """Reduced residual computed as f_m (m_t - div(m D_pH)) by the chain rule.

    This is algebraically equal to -tr(A D2u) + b but follows the transport
    form, so it serves as an independent evaluation at a single node.
    ``hess`` is ordered (x_1..x_d, t).
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    hess = np.asarray(hess, dtype=float)
    d = spec.d
    w = -np.asarray(s, dtype=float) + spec.H(x, p)
    m = spec.f_inv(x, w)
    fm = spec.f_m(x, m)
    DpH = spec.DpH(x, p)
    Hxx, Hxt, Htt = hess[..., :d, :d], hess[..., :d, d], hess[..., d, d]
    w_t = -Htt + np.einsum("...i,...i->...", DpH, Hxt)
    w_x = -Hxt + spec.DxH(x, p) + np.einsum("...ij,...j->...i", Hxx, DpH)
    m_t = w_t / fm
    m_x = (w_x - spec.Dxf(x, m)) / fm[..., None]
    div_DpH = np.einsum("...ij,...ij->...", spec.DppH(x, p), Hxx) + np.trace(spec.DxpH(x, p), axis1=-2, axis2=-1)
    div = np.einsum("...i,...i->...", m_x, DpH) + m * div_DpH
    return fm * (m_t - div)
