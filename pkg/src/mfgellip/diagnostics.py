"""Density recovery and numerical checks of the a priori bounds and weak-solution identities.

Every check returns a :class:`DiagnosticEntry`.  Entries with ``passed=None``
are measurements: the bound involves a constant that is not computable, so
the value is recorded for inspection and never gates.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import grid as gr
from .model import DomainError, ProblemSpec, envelopes

SCHEMA_VERSION = 1


@dataclass
class DiagnosticEntry:
    check: str
    value: float | list | None
    bound: float | list | None = None
    tol: float | None = None
    passed: bool | None = None
    note: str = ""

    @property
    def gating(self) -> bool:
        return self.passed is not None


@dataclass
class DiagnosticsReport:
    grid: gr.GridSpec
    epsilon: float = 0.0
    entries: list[DiagnosticEntry] = field(default_factory=list)

    def add(self, entry: DiagnosticEntry) -> DiagnosticEntry:
        if any(e.check == entry.check for e in self.entries):
            raise ValueError(f"duplicate check {entry.check!r}")
        self.entries.append(entry)
        return entry

    def __getitem__(self, check: str) -> DiagnosticEntry:
        for e in self.entries:
            if e.check == check:
                return e
        raise KeyError(check)

    @property
    def ok(self) -> bool:
        return all(e.passed is not False for e in self.entries)

    def failures(self) -> list[DiagnosticEntry]:
        return [e for e in self.entries if e.passed is False]

    def to_dict(self) -> dict:
        g = self.grid
        return {
            "schema": SCHEMA_VERSION,
            "grid": {"d": g.d, "nx": g.nx, "nt": g.nt, "T": g.T},
            "epsilon": self.epsilon,
            "ok": self.ok,
            "entries": [_jsonable(asdict(e)) for e in self.entries],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _values(field_or_array, grid: gr.GridSpec) -> np.ndarray:
    v = field_or_array.values if isinstance(field_or_array, gr.SpaceTimeField) else field_or_array
    return np.asarray(v, dtype=float).reshape(grid.shape)


# ---------------------------------------------------------------------------
# density and Fokker-Planck
# ---------------------------------------------------------------------------


def hj_value(spec: ProblemSpec, grid: gr.GridSpec, u) -> np.ndarray:
    """w = -u_t + H(x, D_x u) at every node."""
    p, s = gr.gradient(_values(u, grid), grid)
    return -s + spec.H(grid.space_points(), p)


def recover_density(spec: ProblemSpec, u: gr.SpaceTimeField, epsilon: float = 0.0) -> gr.SpaceTimeField:
    grid = u.grid
    eff = spec.with_viscosity(epsilon)
    w = hj_value(eff, grid, u)
    try:
        m = eff.f_inv(grid.space_points(), w)
    except DomainError as exc:
        node = None
        if exc.index is not None and len(exc.index):
            j, *i = np.unravel_index(int(exc.index[0]), grid.shape)
            node = tuple(int(v) for v in i) + (int(j),)
        raise DomainError(f"{exc} at node {node}", index=node) from None
    return gr.SpaceTimeField(m, grid)


@dataclass
class FPResidual:
    l2: float
    mass_drift: float
    masses: np.ndarray


def fp_residual(spec: ProblemSpec, u, m, grid: gr.GridSpec | None = None) -> FPResidual:
    """m_t - div(m D_pH) with centered fluxes, measured in L2 over interior levels.

    Also reports the mass drift max_j |int m(., t_j) - 1|.
    """
    grid = grid or u.grid
    uu, mm = _values(u, grid), _values(m, grid)
    p, _ = gr.gradient(uu, grid)
    flux = mm[..., None] * spec.DpH(grid.space_points(), p)
    div = np.zeros(grid.shape)
    for a in range(grid.d):
        div += (np.roll(flux[..., a], -1, axis=a + 1) - np.roll(flux[..., a], 1, axis=a + 1)) / (2 * grid.dx)
    mt = (mm[2:] - mm[:-2]) / (2 * grid.dt)
    r = mt - div[1:-1]
    l2 = math.sqrt(float((r**2).sum()) * grid.dx**grid.d * grid.dt)
    masses = gr.slice_integrals(mm, grid)
    return FPResidual(l2, float(np.abs(masses - 1.0).max()), masses)


# ---------------------------------------------------------------------------
# a priori bounds
# ---------------------------------------------------------------------------


def refinement_error(coarse, coarse_grid: gr.GridSpec, fine, fine_grid: gr.GridSpec, order: float = 2.0) -> float:
    """Richardson estimate of the fine-grid error from shared nodes."""
    c = _values(coarse, coarse_grid)
    f = _values(fine, fine_grid)
    ft, fx = fine_grid.nt // coarse_grid.nt, fine_grid.nx // coarse_grid.nx
    if ft * coarse_grid.nt != fine_grid.nt or fx * coarse_grid.nx != fine_grid.nx:
        raise ValueError("fine grid must be an integer refinement of the coarse grid")
    sub = f[(slice(None, None, ft),) + (slice(None, None, fx),) * fine_grid.d]
    return float(np.abs(sub - c).max()) / (2.0**order - 1.0)


def calibrated_tolerance(observed_error: float, factor: float = 10.0, floor: float = 1e-12) -> float:
    return max(factor * observed_error, floor)


def _m0_extrema(spec: ProblemSpec) -> tuple[float, float]:
    return spec.initial.m0.extrema(spec.d)


def check_solution_bounds(spec: ProblemSpec, u, m, tol: float, grid: gr.GridSpec | None = None) -> list[DiagnosticEntry]:
    """Sharp bounds on u and m(., T) for x-independent data; measurements otherwise."""
    grid = grid or u.grid
    uu, mm = _values(u, grid), _values(m, grid)
    lo_m0, hi_m0 = _m0_extrema(spec)
    mT = mm[-1]
    x0 = np.zeros(spec.d)
    if spec.x_independent:
        H0 = float(spec.H(x0, np.zeros(spec.d)))
        tau = (grid.T - grid.times()).reshape((-1,) + (1,) * grid.d)
        lower = float(spec.g(x0, lo_m0)) + (float(spec.f(x0, lo_m0)) - H0) * tau
        upper = float(spec.g(x0, hi_m0)) + (float(spec.f(x0, hi_m0)) - H0) * tau
        viol_u = max(float((lower - uu).max()), float((uu - upper).max()))
        viol_m = max(lo_m0 - float(mT.min()), float(mT.max()) - hi_m0)
        return [
            DiagnosticEntry("u-sharp-bounds", viol_u, 0.0, tol, viol_u <= tol,
                            "largest violation of the two-sided bound on u"),
            DiagnosticEntry("mT-range", [float(mT.min()), float(mT.max())], [lo_m0, hi_m0], tol, viol_m <= tol),
        ]
    env = envelopes(spec)
    return [
        DiagnosticEntry(
            "mT-range",
            [float(mT.min()), float(mT.max())],
            [lo_m0, hi_m0],
            note="x-dependent data: measurement only",
        ),
        DiagnosticEntry(
            "envelope-offsets",
            [env.f0.offset, env.f1.offset, env.g0.offset, env.g1.offset],
            note="f0, f1, g0, g1 envelope shifts; bound constant is not computable",
        ),
    ]


def check_ut_bounds(spec: ProblemSpec, u, m, tol: float, grid: gr.GridSpec | None = None) -> DiagnosticEntry:
    """-C0 - f1(eta1) <= u_t <= max H(x, D_x u) - f0(eta0) at every node."""
    grid = grid or u.grid
    uu, mm = _values(u, grid), _values(m, grid)
    lo_m0, hi_m0 = _m0_extrema(spec)
    eta0 = min(lo_m0, float(mm[-1].min()))
    eta1 = max(hi_m0, float(mm[-1].max()))
    env = envelopes(spec)
    p, s = gr.gradient(uu, grid)
    Hmax = float(spec.H(grid.space_points(), p).max())
    lower = -spec.hamiltonian.C0 - float(env.f1(eta1))
    upper = Hmax - float(env.f0(eta0))
    viol = max(lower - float(s.min()), float(s.max()) - upper)
    return DiagnosticEntry(
        "ut-bounds",
        [float(s.min()), float(s.max())],
        [lower, upper],
        tol,
        viol <= tol,
        f"eta0={eta0:.6g}, eta1={eta1:.6g}",
    )


# ---------------------------------------------------------------------------
# weak-solution identities
# ---------------------------------------------------------------------------


def energy_identity_residual(spec: ProblemSpec, u, m, epsilon: float = 0.0, grid: gr.GridSpec | None = None) -> float:
    """|int_Q m (H - D_pH . D_xu - f) - int (m(T) g(m(T)) - m0 u(0))|."""
    grid = grid or u.grid
    eff = spec.with_viscosity(epsilon)
    uu, mm = _values(u, grid), _values(m, grid)
    x = grid.space_points()
    p, _ = gr.gradient(uu, grid)
    H = eff.H(x, p)
    lag = np.einsum("...i,...i->...", eff.DpH(x, p), p)
    bulk = gr.integrate(mm * (H - lag - eff.f(x, mm)), grid)
    mT = mm[-1]
    edge = gr.integrate(mT * eff.g(x, mT) - eff.m0(x) * uu[0], grid, region="slice")
    return abs(bulk - edge)


@dataclass
class LasryLionsTerms:
    m_ab: float
    m_ba: float
    m_g: float
    m_f: float
    lower_bound: float

    @property
    def total(self) -> float:
        return self.m_ab + self.m_ba + self.m_g + self.m_f

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.m_ab, self.m_ba, self.m_g, self.m_f


def lasry_lions_gap(spec: ProblemSpec, sol_a, sol_b, grid: gr.GridSpec) -> LasryLionsTerms:
    """Cross-tested monotonicity terms for two solutions ``(u, m, eps)``.

    ``lower_bound`` is 1/(2 C0) int_Q (m_a + m_b) |D_xu_a - D_xu_b|^2, which
    the first two terms dominate when D2_pp H >= I / C0.
    """
    ua, ma = _values(sol_a[0], grid), _values(sol_a[1], grid)
    ub, mb = _values(sol_b[0], grid), _values(sol_b[1], grid)
    x = grid.space_points()
    pa, _ = gr.gradient(ua, grid)
    pb, _ = gr.gradient(ub, grid)
    Ha, Hb = spec.H(x, pa), spec.H(x, pb)
    dp = pb - pa
    lin_a = np.einsum("...i,...i->...", spec.DpH(x, pa), dp)
    lin_b = np.einsum("...i,...i->...", spec.DpH(x, pb), -dp)
    m_ab = gr.integrate(ma * (Hb - Ha - lin_a), grid)
    m_ba = gr.integrate(mb * (Ha - Hb - lin_b), grid)
    m_g = gr.integrate((spec.g(x, ma[-1]) - spec.g(x, mb[-1])) * (ma[-1] - mb[-1]), grid, region="slice")
    m_f = gr.integrate((spec.f(x, ma) - spec.f(x, mb)) * (ma - mb), grid)
    sq = np.einsum("...i,...i->...", dp, dp)
    lower = gr.integrate((ma + mb) * sq, grid) / (2.0 * spec.hamiltonian.C0)
    return LasryLionsTerms(m_ab, m_ba, m_g, m_f, lower)


def h_minus_one_norm(values: np.ndarray, grid: gr.GridSpec) -> float:
    """Fourier-multiplier H^-1 norm of a spatial array on the unit torus."""
    v = np.asarray(values, dtype=float).reshape(grid.space_shape)
    vh = np.fft.fftn(v)
    k = np.fft.fftfreq(grid.nx, d=1.0 / grid.nx)
    grids = np.meshgrid(*([k] * grid.d), indexing="ij")
    kk = np.sqrt(sum(g**2 for g in grids))
    w = np.where(kk == 0, 1.0, 2 * np.pi * kk)
    return math.sqrt(float((np.abs(vh / w) ** 2).sum())) / grid.n_space


def holder_half_quotient(m, grid: gr.GridSpec) -> float:
    """sup_{t != t'} |m(t) - m(t')|_{H^-1} / |t - t'|^(1/2)."""
    mm = _values(m, grid)
    t = grid.times()
    best = 0.0
    for j in range(grid.nt + 1):
        for k in range(j + 1, grid.nt + 1):
            best = max(best, h_minus_one_norm(mm[k] - mm[j], grid) / math.sqrt(t[k] - t[j]))
    return best


def flux_l2(spec: ProblemSpec, u, m, grid: gr.GridSpec) -> float:
    p, _ = gr.gradient(_values(u, grid), grid)
    flux = _values(m, grid)[..., None] * spec.DpH(grid.space_points(), p)
    return math.sqrt(gr.integrate((flux**2).sum(axis=-1), grid))


def max_gradient_norm(u, grid: gr.GridSpec) -> float:
    """max over nodes of |(D_x u, u_t)|."""
    p, s = gr.gradient(_values(u, grid), grid)
    return float(np.sqrt((p**2).sum(axis=-1) + s**2).max())


def lipschitz_monitor(spec: ProblemSpec, sequence: Sequence, grid: gr.GridSpec, window: int = 4, spread_tol: float = 0.1) -> list[DiagnosticEntry]:
    """Uniform-in-epsilon gradient bound proxy over an epsilon-sequence.

    ``sequence`` items need ``u`` and ``m`` attributes (see
    :class:`mfgellip.solver.EpsilonSolution`).
    """
    if spec.strictly_elliptic or not spec.x_independent:
        return [DiagnosticEntry("lipschitz-monitor", None, note="not-applicable: needs degenerate, x-independent data")]
    if len(sequence) < window:
        return [DiagnosticEntry("lipschitz-monitor", None, note=f"not-applicable: fewer than {window} epsilon solutions")]
    norms = [max_gradient_norm(s.u, grid) for s in sequence]
    tail = norms[-window:]
    spread = (max(tail) - min(tail)) / max(tail) if max(tail) > 0 else 0.0
    last = sequence[-1]
    quotient = holder_half_quotient(last.m, grid)
    bound = flux_l2(spec, last.u, last.m, grid)
    return [
        DiagnosticEntry("lipschitz-monitor", norms, spread_tol, None, spread < spread_tol,
                        f"relative spread of last {window}: {spread:.3g}"),
        DiagnosticEntry("holder-half-Hm1", quotient, bound,
                        note="time Holder-1/2 quotient of m in H^-1 vs |m D_pH|_L2 (measurement)"),
    ]


def hj_inequality_check(spec: ProblemSpec, u, m, tol: float, epsilon: float = 0.0, grid: gr.GridSpec | None = None) -> list[DiagnosticEntry]:
    """Nodewise -u_t + H - f(m) <= tol and |u(T) - g(m(T))| <= tol."""
    grid = grid or u.grid
    eff = spec.with_viscosity(epsilon)
    uu, mm = _values(u, grid), _values(m, grid)
    x = grid.space_points()
    excess = float((hj_value(eff, grid, uu) - eff.f(x, mm)).max())
    term = float(np.abs(uu[-1] - eff.g(x, mm[-1])).max())
    return [
        DiagnosticEntry("hj-inequality", excess, 0.0, tol, excess <= tol),
        DiagnosticEntry("terminal-consistency", term, 0.0, tol, term <= tol),
    ]


def positivity_check(m, grid: gr.GridSpec) -> DiagnosticEntry:
    mn = float(_values(m, grid).min())
    return DiagnosticEntry("m-positive", mn, 0.0, 0.0, mn > 0.0)


def run_diagnostics(
    spec: ProblemSpec,
    u: gr.SpaceTimeField,
    m: gr.SpaceTimeField | None = None,
    epsilon: float = 0.0,
    bound_tol: float = 1e-6,
    hj_tol: float = 1e-8,
    fp_tol: float | None = None,
    energy_tol: float | None = None,
    sequence: Sequence | None = None,
) -> DiagnosticsReport:
    """Standard battery on one solution; gating thresholds are passed in."""
    grid = u.grid
    rep = DiagnosticsReport(grid, epsilon)
    if m is None:
        m = recover_density(spec, u, epsilon)
    rep.add(positivity_check(m, grid))
    fp = fp_residual(spec, u, m, grid)
    rep.add(DiagnosticEntry("fp-residual", fp.l2, fp_tol, fp_tol, None if fp_tol is None else fp.l2 <= fp_tol))
    rep.add(DiagnosticEntry("mass-drift", fp.mass_drift, note="max_t |int m - 1|"))
    for e in hj_inequality_check(spec, u, m, hj_tol, epsilon, grid):
        rep.add(e)
    eff = spec.with_viscosity(epsilon)
    for e in check_solution_bounds(eff, u, m, bound_tol, grid):
        rep.add(e)
    rep.add(check_ut_bounds(eff, u, m, bound_tol, grid))
    er = energy_identity_residual(spec, u, m, epsilon, grid)
    rep.add(DiagnosticEntry("energy-identity", er, energy_tol, energy_tol, None if energy_tol is None else er <= energy_tol))
    if sequence is not None:
        for e in lipschitz_monitor(spec, sequence, grid):
            rep.add(e)
        if len(sequence) >= 2:
            terms = [
                lasry_lions_gap(spec, (a.u, a.m, a.epsilon), (b.u, b.m, b.epsilon), grid)
                for a, b in zip(sequence[:-1], sequence[1:])
            ]
            worst = min(min(t.as_tuple()) for t in terms)
            rep.add(DiagnosticEntry("lasry-lions-min", worst, -1e-8, 1e-8, worst >= -1e-8,
                                    "smallest monotonicity term over consecutive pairs"))
    return rep
