"""Damped Newton for the discrete reduced problem, with theta and epsilon continuation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import grid as gr
from .elliptic import assemble_boundary, coefficients
from .model import ConvergenceError, DomainError, ProblemSpec

log = logging.getLogger(__name__)


@dataclass
class NewtonSettings:
    abs_tol: float = 1e-10
    max_iters: int = 50
    armijo_c: float = 1e-4
    min_step: float = 1e-10
    linear_rel_tol: float = 1e-12

    def __post_init__(self):
        if min(self.abs_tol, self.armijo_c, self.min_step, self.linear_rel_tol) <= 0 or self.max_iters <= 0:
            raise ValueError("Newton settings must be positive")


@dataclass
class ContinuationSettings:
    theta_steps: int = 10
    theta_min_step: float = 1e-4
    theta_max_step: float = 0.2
    epsilon0: float = 1.0
    epsilon_ratio: float = 0.5
    epsilon_floor: float = 1e-6
    cauchy_tol: float = 1e-4
    epsilon_retries: int = 4

    def __post_init__(self):
        if not 0.0 < self.epsilon_ratio < 1.0:
            raise ValueError("epsilon_ratio must lie in (0, 1)")
        if self.epsilon_floor <= 0.0 or self.epsilon0 <= 0.0:
            raise ValueError("epsilon0 and epsilon_floor must be positive")
        if self.theta_steps < 1 or self.theta_min_step <= 0.0:
            raise ValueError("invalid theta stepping")


# ---------------------------------------------------------------------------
# residual and Jacobian
# ---------------------------------------------------------------------------


def _node_domain_error(grid: gr.GridSpec, j0: int, exc: DomainError, shape) -> DomainError:
    node = None
    if exc.index is not None and len(np.atleast_1d(exc.index)):
        flat = int(np.atleast_1d(exc.index)[0])
        local = np.unravel_index(flat, shape)
        node = tuple(int(v) for v in local[1:]) + (int(local[0]) + j0,)
    err = DomainError(f"{exc} at node {node}", index=node)
    return err


def assemble_residual_and_jacobian(
    spec: ProblemSpec,
    grid: gr.GridSpec,
    U: np.ndarray,
    epsilon: float = 0.0,
    jacobian: bool = True,
):
    """Residual rows (PDE at interior levels, oblique conditions at t=0, T) and
    the exact sparse Jacobian.

    Raises DomainError (with the offending node ``(i..., j)``) if some node
    state falls outside the domain of f^{-1}.
    """
    eff = spec.with_viscosity(epsilon)
    nt, d = grid.nt, grid.d
    u = np.asarray(U, dtype=float).reshape(grid.shape)
    x = grid.space_points()
    p, s = gr.gradient(u, grid)
    F = np.empty(grid.shape)
    imap = gr.IndexMap(grid)
    rows, cols, vals = [], [], []

    def add(j0, j1, stencils_and_coefs):
        rid = imap.node_indices()[j0:j1]
        for stencil, coef in stencils_and_coefs:
            for ot, ox, wgt in stencil:
                rows.append(rid.ravel())
                cols.append(imap.shifted(j0, j1, ot, ox).ravel())
                vals.append(np.broadcast_to(wgt * coef, rid.shape).ravel())

    # interior PDE rows
    try:
        c = coefficients(eff, x, p[1:nt], s[1:nt])
    except DomainError as exc:
        raise _node_domain_error(grid, 1, exc, (nt - 1,) + grid.space_shape) from None
    hess = gr.hessian(u, grid)
    F[1:nt] = -np.einsum("...ij,...ij->...", c.A, hess) + c.b
    if jacobian:
        G = -np.einsum("...kij,...ij->...k", c.dA_dq, hess) + c.db_dq
        terms = []
        for (a, b), st in gr.hessian_stencils(grid).items():
            weight = 1.0 if a == b else 2.0
            terms.append((st, -weight * c.A[..., a, b]))
        for l, st in enumerate(gr.gradient_stencils(grid, "interior")):
            terms.append((st, G[..., l]))
        add(1, nt, terms)

    # boundary rows
    for j, side in ((0, "start"), (nt, "end")):
        try:
            bb = assemble_boundary(eff, x, side, u[j], p[j], s[j])
        except DomainError as exc:
            raise _node_domain_error(grid, j, exc, (1,) + grid.space_shape) from None
        F[j] = bb.B
        if jacobian:
            terms = [(st, bb.dB_dq[..., l]) for l, st in enumerate(gr.gradient_stencils(grid, side))]
            terms.append(([(0, (0,) * d, 1.0)], bb.dB_dz))
            add(j, j + 1, terms)

    if not np.all(np.isfinite(F)):
        raise DomainError("non-finite residual")
    if not jacobian:
        return F.ravel(), None
    n = grid.n_nodes
    J = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    J.sum_duplicates()
    return F.ravel(), J


def residual(spec, grid, U, epsilon=0.0) -> np.ndarray:
    return assemble_residual_and_jacobian(spec, grid, U, epsilon, jacobian=False)[0]


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------


@dataclass
class NewtonResult:
    U: np.ndarray
    iterations: int
    residuals: list[float]
    merit: list[float]
    converged: bool
    status: str
    message: str = ""


def _linear_solve(J, rhs, rel_tol: float) -> np.ndarray:
    lu = splu(J.tocsc())
    x = lu.solve(rhs)
    scale = np.linalg.norm(rhs)
    for _ in range(3):
        r = rhs - J @ x
        if np.linalg.norm(r) <= rel_tol * scale:
            break
        x = x + lu.solve(r)
    return x


def roundoff_floor(J, U, factor: float = 10.0) -> float:
    """Residual level below which rows cannot be resolved in double precision.

    Interior rows carry 1/dx^2 weights, so on fine grids the absolute
    tolerance can sit under the rounding noise of the row evaluation itself.
    """
    rowsum = abs(J) @ (np.abs(U) + 1.0)
    return factor * np.finfo(float).eps * float(rowsum.max())


def newton_solve(
    spec: ProblemSpec,
    grid: gr.GridSpec,
    U0: np.ndarray,
    settings: NewtonSettings | None = None,
    epsilon: float = 0.0,
) -> NewtonResult:
    """Newton with Armijo backtracking on 1/2 |F|^2; domain failures shrink the step."""
    st = settings or NewtonSettings()
    U = np.array(U0, dtype=float).ravel()
    if not np.all(np.isfinite(U)):
        raise ValueError("initial guess must be finite")
    try:
        F, J = assemble_residual_and_jacobian(spec, grid, U, epsilon)
    except DomainError as exc:
        return NewtonResult(U, 0, [], [], False, "domain_failure", str(exc))
    res = [float(np.abs(F).max())]
    merit = [0.5 * float(F @ F)]
    for it in range(st.max_iters + 1):
        if res[-1] <= st.abs_tol:
            return NewtonResult(U, it, res, merit, True, "converged")
        if it == st.max_iters:
            break
        delta = _linear_solve(J, -F, st.linear_rel_tol)
        if not np.all(np.isfinite(delta)):
            return NewtonResult(U, it, res, merit, False, "stalled", "singular Newton system")
        lam = 1.0
        phi0 = merit[-1]
        while True:
            trial = U + lam * delta
            try:
                Ft, Jt = assemble_residual_and_jacobian(spec, grid, trial, epsilon)
                phi = 0.5 * float(Ft @ Ft)
                if phi <= (1.0 - 2.0 * st.armijo_c * lam) * phi0:
                    break
            except DomainError:
                pass
            lam *= 0.5
            if lam < st.min_step:
                if res[-1] <= roundoff_floor(J, U):
                    return NewtonResult(U, it, res, merit, True, "converged", "stopped at round-off floor")
                return NewtonResult(U, it, res, merit, False, "stalled", "line search failed")
        U, F, J = trial, Ft, Jt
        res.append(float(np.abs(F).max()))
        merit.append(phi)
        log.debug("newton it=%d |F|=%.3e step=%.3g", it + 1, res[-1], lam)
    return NewtonResult(U, st.max_iters, res, merit, False, "stalled", "iteration cap reached")


# ---------------------------------------------------------------------------
# continuation
# ---------------------------------------------------------------------------


def build_theta_problem(spec: ProblemSpec, theta: float) -> ProblemSpec:
    """Blend of ``spec`` with data whose solution is (u, m) = (1, 1)."""
    return spec.at_theta(theta)


@dataclass
class PathEntry:
    theta: float
    epsilon: float
    newton_iters: int
    final_residual: float
    accepted: bool = True


@dataclass
class EpsilonSolution:
    epsilon: float
    u: np.ndarray
    m: np.ndarray
    cauchy_increment: float | None = None


@dataclass
class SolveReport:
    grid: gr.GridSpec
    status: str
    path: list[PathEntry]
    u: gr.SpaceTimeField | None
    m: gr.SpaceTimeField | None
    epsilon: float
    epsilon_sequence: list[EpsilonSolution] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def total_newton_iterations(self) -> int:
        return sum(e.newton_iters for e in self.path)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "message": self.message,
            "epsilon": self.epsilon,
            "grid": {"d": self.grid.d, "nx": self.grid.nx, "nt": self.grid.nt, "T": self.grid.T},
            "path": [vars(e) for e in self.path],
            "epsilon_sequence": [
                {"epsilon": e.epsilon, "cauchy_increment": e.cauchy_increment}
                for e in self.epsilon_sequence
            ],
            "warnings": list(self.warnings),
        }


def density_from_u(spec: ProblemSpec, grid: gr.GridSpec, u: np.ndarray, epsilon: float = 0.0) -> np.ndarray:
    eff = spec.with_viscosity(epsilon)
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    p, s = gr.gradient(u, grid)
    x = grid.space_points()
    return eff.f_inv(x, -s + eff.H(x, p))


def _l2_cylinder(grid: gr.GridSpec, v: np.ndarray) -> float:
    return math.sqrt(gr.integrate(v**2, grid))


def continuation_solve(
    spec: ProblemSpec,
    grid: gr.GridSpec,
    newton: NewtonSettings | None = None,
    continuation: ContinuationSettings | None = None,
    initial: np.ndarray | None = None,
    epsilon_phase: bool | None = None,
) -> SolveReport:
    """theta-homotopy from the trivial problem, then (under DE) epsilon -> 0.

    ``initial`` replaces the exact start u = 1 at theta = 0.  ``epsilon_phase``
    forces (True) or suppresses (False) the viscosity sweep; by default it runs
    only for degenerate data.
    """
    newton = newton or NewtonSettings()
    cs = continuation or ContinuationSettings()
    if grid.d != spec.d or abs(grid.T - spec.T) > 1e-14:
        raise ValueError("grid and problem disagree on d or T")
    run_eps = (not spec.strictly_elliptic) if epsilon_phase is None else epsilon_phase
    eps = cs.epsilon0 if run_eps else 0.0
    path: list[PathEntry] = []

    U = np.ones(grid.n_nodes) if initial is None else np.array(initial, dtype=float).ravel()
    start = spec.at_theta(0.0)
    r = newton_solve(start, grid, U, newton, eps)
    path.append(PathEntry(0.0, eps, r.iterations, r.residuals[-1] if r.residuals else math.nan, r.converged))
    if not r.converged:
        status = "domain_failure" if r.status == "domain_failure" else "stalled"
        return SolveReport(grid, status, path, None, None, eps, message="theta=0 solve failed: " + r.message)
    U = r.U

    theta = 0.0
    step = 1.0 if start == spec else min(1.0 / cs.theta_steps, cs.theta_max_step)
    while theta < 1.0:
        target = min(1.0, theta + step)
        r = newton_solve(spec.at_theta(target), grid, U, newton, eps)
        path.append(PathEntry(target, eps, r.iterations, r.residuals[-1] if r.residuals else math.nan, r.converged))
        if r.converged:
            theta, U = target, r.U
            if r.iterations <= 3:
                step = min(2.0 * step, cs.theta_max_step)
            continue
        step *= 0.5
        if step < cs.theta_min_step:
            u = gr.SpaceTimeField(U.reshape(grid.shape), grid)
            return SolveReport(
                grid, "stalled", path, u, None, eps,
                message=f"theta continuation stalled at theta={theta:.6g}",
            )
    log.info("theta phase done in %d solves", len(path))

    seq: list[EpsilonSolution] = []
    warnings: list[str] = []
    m = density_from_u(spec, grid, U, eps)
    if run_eps:
        seq.append(EpsilonSolution(eps, U.reshape(grid.shape).copy(), m))
        ratio = cs.epsilon_ratio
        reached = False
        while True:
            target = eps * ratio
            if target < cs.epsilon_floor:
                break
            r = newton_solve(spec, grid, U, newton, target)
            path.append(PathEntry(1.0, target, r.iterations, r.residuals[-1] if r.residuals else math.nan, r.converged))
            if not r.converged:
                if len(path) and sum(not e.accepted for e in path if e.theta == 1.0) > cs.epsilon_retries:
                    return SolveReport(
                        grid, "stalled", path, gr.SpaceTimeField(U.reshape(grid.shape), grid),
                        gr.SpaceTimeField(m, grid), eps, seq, warnings,
                        message=f"epsilon continuation stalled at epsilon={eps:.3g}",
                    )
                ratio = math.sqrt(ratio)
                continue
            eps, U = target, r.U
            m_new = density_from_u(spec, grid, U, eps)
            inc = _l2_cylinder(grid, m_new - m)
            m = m_new
            seq.append(EpsilonSolution(eps, U.reshape(grid.shape).copy(), m, inc))
            log.info("epsilon=%.3e cauchy=%.3e newton=%d", eps, inc, r.iterations)
            if inc <= cs.cauchy_tol:
                reached = True
                break
        if not reached:
            warnings.append(
                f"cauchy-not-reached: epsilon floor {cs.epsilon_floor:g} hit before increment <= {cs.cauchy_tol:g}"
            )

    return SolveReport(
        grid, "converged", path,
        gr.SpaceTimeField(U.reshape(grid.shape), grid), gr.SpaceTimeField(m, grid),
        eps, seq, warnings,
    )
