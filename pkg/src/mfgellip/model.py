"""Problem data for local first-order MFG in the separable quadratic setting.

All evaluators broadcast over leading batch dimensions.  Points on the torus
and momenta carry a trailing axis of length ``d``; scalars (``m``, ``w``,
``s``) carry the batch shape only.

    H(x, p) = 1/2 p.Mp - V(x)
    f(x, m) = a m^theta + b log m + F(x)
    g(x, m) = c m^kappa + l m + e log m + G(x)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

TWO_PI = 2.0 * math.pi

INVERSE_RTOL = 1e-13
INVERSE_MAX_ITERS = 200
_BRACKET_LOG_LO = math.log(1e-12)
_BRACKET_LOG_HI = math.log(1e12)


class DomainError(ValueError):
    """A state lies outside the domain of f^{-1} (or of a derived quantity)."""

    def __init__(self, message: str, index=None):
        super().__init__(message)
        self.index = index


class ConvergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# trigonometric polynomials on the unit torus
# ---------------------------------------------------------------------------


def _normalize_modes(modes) -> tuple:
    merged: dict[tuple[int, ...], list[float]] = {}
    for k, a, b in modes:
        k = tuple(int(v) for v in k)
        if all(v == 0 for v in k):
            raise ValueError("zero wavevector belongs in the constant term")
        acc = merged.setdefault(k, [0.0, 0.0])
        acc[0] += float(a)
        acc[1] += float(b)
    return tuple(
        (k, a, b) for k, (a, b) in sorted(merged.items()) if a != 0.0 or b != 0.0
    )


@dataclass(frozen=True)
class TrigPoly:
    """``constant + sum_k a_k cos(2 pi k.x) + b_k sin(2 pi k.x)``.

    ``modes`` holds ``(k, a_k, b_k)`` triples with integer wavevectors ``k``.
    """

    constant: float = 0.0
    modes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "modes", _normalize_modes(self.modes))

    @classmethod
    def cosine(cls, amplitude: float, k: Sequence[int] = (1,), constant: float = 0.0):
        return cls(constant, ((tuple(k), amplitude, 0.0),))

    @classmethod
    def sine(cls, amplitude: float, k: Sequence[int] = (1,), constant: float = 0.0):
        return cls(constant, ((tuple(k), 0.0, amplitude),))

    @property
    def is_constant(self) -> bool:
        return not self.modes

    def dimension_ok(self, d: int) -> bool:
        return all(len(k) == d for k, _, _ in self.modes)

    def _phases(self, x):
        x = np.asarray(x, dtype=float)
        for k, a, b in self.modes:
            kv = np.asarray(k, dtype=float)
            yield kv, a, b, TWO_PI * (x @ kv)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.constant)
        for _, a, b, phase in self._phases(x):
            out = out + a * np.cos(phase) + b * np.sin(phase)
        return out

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for kv, a, b, phase in self._phases(x):
            amp = TWO_PI * (-a * np.sin(phase) + b * np.cos(phase))
            out = out + amp[..., None] * kv
        return out

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        out = np.zeros(x.shape + (d,))
        for kv, a, b, phase in self._phases(x):
            amp = -(TWO_PI**2) * (a * np.cos(phase) + b * np.sin(phase))
            out = out + amp[..., None, None] * np.outer(kv, kv)
        return out

    def scaled(self, factor: float) -> "TrigPoly":
        return TrigPoly(
            self.constant * factor, tuple((k, a * factor, b * factor) for k, a, b in self.modes)
        )

    def __add__(self, other: "TrigPoly | float") -> "TrigPoly":
        if not isinstance(other, TrigPoly):
            return TrigPoly(self.constant + float(other), self.modes)
        return TrigPoly(self.constant + other.constant, self.modes + other.modes)

    __radd__ = __add__

    def __neg__(self) -> "TrigPoly":
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other if isinstance(other, TrigPoly) else -float(other))

    def extrema(self, d: int) -> tuple[float, float]:
        """(min, max) over the torus: dense sampling, then local polishing."""
        if self.is_constant:
            return self.constant, self.constant
        n = 512 if d == 1 else 96
        axes = np.meshgrid(*([np.arange(n) / n] * d), indexing="ij")
        pts = np.stack(axes, axis=-1).reshape(-1, d)
        vals = self(pts)
        lo = self._polish(pts[np.argmin(vals)], 1.0)
        hi = -self._polish(pts[np.argmax(vals)], -1.0)
        return min(lo, float(vals.min())), max(hi, float(vals.max()))

    def _polish(self, x0, sign: float) -> float:
        # minimizes sign * self starting from the best sample
        res = minimize(
            lambda y: sign * float(self(y)),
            x0,
            jac=lambda y: sign * self.gradient(y),
            method="BFGS",
            options={"gtol": 1e-13},
        )
        return float(res.fun)


# ---------------------------------------------------------------------------
# monotone profiles  phi(m) = sum_i c_i m^k_i + b log m
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonotoneProfile:
    """Strictly increasing function on (0, inf) built from powers and a log."""

    powers: tuple = ()
    log_coef: float = 0.0

    def __post_init__(self):
        powers = tuple((float(c), float(k)) for c, k in self.powers if c != 0.0)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "log_coef", float(self.log_coef))
        if any(c < 0 or k <= 0 for c, k in powers) or self.log_coef < 0:
            raise ValueError("profile coefficients and exponents must be positive")
        if not powers and self.log_coef == 0.0:
            raise ValueError("profile is identically zero")

    @property
    def value_at_zero(self) -> float:
        return -math.inf if self.log_coef > 0 else 0.0

    def __call__(self, m):
        m = np.asarray(m, dtype=float)
        out = np.zeros(m.shape)
        for c, k in self.powers:
            out = out + c * m**k
        if self.log_coef:
            out = out + self.log_coef * np.log(m)
        return out

    def deriv(self, m):
        m = np.asarray(m, dtype=float)
        out = np.zeros(m.shape)
        for c, k in self.powers:
            out = out + c * k * m ** (k - 1.0)
        if self.log_coef:
            out = out + self.log_coef / m
        return out

    def deriv2(self, m):
        m = np.asarray(m, dtype=float)
        out = np.zeros(m.shape)
        for c, k in self.powers:
            out = out + c * k * (k - 1.0) * m ** (k - 2.0)
        if self.log_coef:
            out = out - self.log_coef / m**2
        return out

    def chi(self, m):
        """m * phi'(m), written without the division by m."""
        m = np.asarray(m, dtype=float)
        out = np.full(m.shape, self.log_coef)
        for c, k in self.powers:
            out = out + c * k * m**k
        return out

    def chi_w(self, m):
        """d chi / d w along w = phi(m), i.e. 1 + m phi'' / phi'."""
        m = np.asarray(m, dtype=float)
        num = np.zeros(m.shape)
        den = np.full(m.shape, self.log_coef)
        for c, k in self.powers:
            mk = c * k * m**k
            num = num + k * mk
            den = den + mk
        return num / den

    def with_log(self, extra: float) -> "MonotoneProfile":
        return MonotoneProfile(self.powers, self.log_coef + extra)

    def inverse(self, w):
        """Solve phi(m) = w; closed form for one-term profiles."""
        w = np.asarray(w, dtype=float)
        if self.log_coef == 0.0 and np.any(w <= 0.0):
            raise DomainError(
                "value at or below f(x, 0); inverse undefined",
                index=np.flatnonzero(np.ravel(w <= 0.0)),
            )
        if not self.powers:
            m = np.exp(w / self.log_coef)
        elif len(self.powers) == 1 and self.log_coef == 0.0:
            c, k = self.powers[0]
            m = (w / c) ** (1.0 / k)
        else:
            m = np.exp(self._solve_log(w))
        bad = ~((m > 0.0) & np.isfinite(m))
        if bad.any():
            raise DomainError(
                "inverse not representable in floating point", index=np.flatnonzero(np.ravel(bad))
            )
        return m

    def _phi_log(self, y, w):
        val = self.log_coef * y - w
        der = np.full(np.shape(y), self.log_coef)
        with np.errstate(over="ignore"):
            for c, k in self.powers:
                e = c * np.exp(k * y)
                val = val + e
                der = der + k * e
        return val, der

    def _solve_log(self, w):
        """Bracketed Newton on y = log m; phi(e^y) is increasing and convex."""
        shape = w.shape
        w = w.ravel()
        lo = np.full(w.shape, _BRACKET_LOG_LO)
        hi = np.full(w.shape, _BRACKET_LOG_HI)
        for _ in range(60):
            bad = self._phi_log(lo, w)[0] > 0
            if not bad.any():
                break
            lo[bad] = 2.0 * lo[bad] - 1.0
        else:
            raise ConvergenceError("could not bracket inverse from below")
        for _ in range(60):
            bad = self._phi_log(hi, w)[0] < 0
            if not bad.any():
                break
            hi[bad] = 2.0 * hi[bad] + 1.0
        else:
            raise ConvergenceError("could not bracket inverse from above")

        # tighter start from the right: each candidate has phi >= 0
        y = hi.copy()
        if self.log_coef > 0:
            y = np.minimum(y, w / self.log_coef)
        pos = w > 0
        for c, k in self.powers:
            cand = np.full(w.shape, np.inf)
            cand[pos] = np.log(w[pos] / c) / k
            if self.log_coef > 0:
                cand[cand < 0] = np.inf
            y = np.minimum(y, cand)
        y = np.maximum(y, lo)
        hi = np.maximum(y, lo)

        tol = 0.25 * INVERSE_RTOL * (1.0 + np.abs(w))
        active = np.ones(w.shape, dtype=bool)
        for _ in range(INVERSE_MAX_ITERS):
            val, der = self._phi_log(y[active], w[active])
            done = np.abs(val) <= tol[active]
            idx = np.flatnonzero(active)
            pos_v = val > 0
            hi[idx[pos_v]] = y[idx[pos_v]]
            lo[idx[~pos_v]] = y[idx[~pos_v]]
            with np.errstate(invalid="ignore", divide="ignore"):
                step = y[idx] - val / der
            inside = np.isfinite(step) & (step > lo[idx]) & (step < hi[idx])
            step = np.where(inside, step, 0.5 * (lo[idx] + hi[idx]))
            narrow = (hi[idx] - lo[idx]) <= 4e-16 * (1.0 + np.abs(y[idx]))
            y[idx[~done]] = step[~done]
            active[idx[done | narrow]] = False
            if not active.any():
                return y.reshape(shape)
        raise ConvergenceError("inverse root-find exceeded iteration cap")


# ---------------------------------------------------------------------------
# data specifications
# ---------------------------------------------------------------------------


def _as_matrix(M) -> tuple:
    arr = np.atleast_2d(np.asarray(M, dtype=float))
    return tuple(tuple(float(v) for v in row) for row in arr)


@dataclass(frozen=True)
class HamiltonianSpec:
    """H(x, p) = 1/2 p.Mp - V(x) with assumption constants C0 and tau."""

    M: tuple = ((1.0,),)
    V: TrigPoly = field(default_factory=TrigPoly)
    C0: float = 10.0
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "M", _as_matrix(self.M))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.M)

    @property
    def d(self) -> int:
        return len(self.M)


COUPLING_FAMILIES = ("PowerLog", "Power", "Linear", "Log")


@dataclass(frozen=True)
class CouplingSpec:
    """f(x, m) = a m^theta_exp + b_log log m + F(x)."""

    family: str = "Log"
    a: float = 0.0
    theta_exp: float = 1.0
    b_log: float = 1.0
    F: TrigPoly = field(default_factory=TrigPoly)

    def __post_init__(self):
        if self.family not in COUPLING_FAMILIES:
            raise ValueError(f"unknown coupling family {self.family!r}")
        a, th, b = self.a, self.theta_exp, self.b_log
        if self.family == "Log" and (a != 0.0 or b <= 0.0):
            raise ValueError("Log coupling needs a=0 and b_log>0")
        if self.family in ("Power", "Linear") and (a <= 0.0 or b != 0.0):
            raise ValueError(f"{self.family} coupling needs a>0 and b_log=0")
        if self.family == "Linear" and th != 1.0:
            raise ValueError("Linear coupling needs theta_exp=1")
        if self.family == "PowerLog" and (a <= 0.0 or b <= 0.0):
            raise ValueError("PowerLog coupling needs a>0 and b_log>0")
        if th <= 0.0:
            raise ValueError("theta_exp must be positive")

    @property
    def profile(self) -> MonotoneProfile:
        powers = ((self.a, self.theta_exp),) if self.a > 0 else ()
        return MonotoneProfile(powers, self.b_log)

    def with_viscosity(self, epsilon: float) -> "CouplingSpec":
        """f + epsilon log m."""
        if epsilon == 0.0:
            return self
        if epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")
        family = "Log" if self.a == 0.0 else "PowerLog"
        return replace(self, family=family, b_log=self.b_log + epsilon)


@dataclass(frozen=True)
class TerminalSpec:
    """g(x, m) = c m^kappa + linear m + e log m + G(x).

    ``linear`` is zero for user data; the theta homotopy blends in ``(1-theta) m``.
    """

    c: float = 1.0
    kappa: float = 1.0
    e: float = 0.0
    G: TrigPoly = field(default_factory=TrigPoly)
    linear: float = 0.0

    def __post_init__(self):
        if self.c < 0 or self.kappa <= 0 or self.e < 0 or self.linear < 0:
            raise ValueError("terminal cost parameters must be non-negative")

    @property
    def profile(self) -> MonotoneProfile:
        powers = []
        if self.c > 0:
            powers.append((self.c, self.kappa))
        if self.linear > 0:
            powers.append((self.linear, 1.0))
        return MonotoneProfile(tuple(powers), self.e)


@dataclass(frozen=True)
class InitialDensitySpec:
    m0: TrigPoly = field(default_factory=lambda: TrigPoly(1.0))

    @classmethod
    def normalized(cls, m0: TrigPoly) -> "InitialDensitySpec":
        if m0.constant <= 0:
            raise ValueError("initial density must have positive mean")
        return cls(m0.scaled(1.0 / m0.constant))


@dataclass(frozen=True)
class ProblemSpec:
    hamiltonian: HamiltonianSpec = field(default_factory=HamiltonianSpec)
    coupling: CouplingSpec = field(default_factory=CouplingSpec)
    terminal: TerminalSpec = field(default_factory=TerminalSpec)
    initial: InitialDensitySpec = field(default_factory=InitialDensitySpec)
    T: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.T <= 0:
            raise ValueError("time horizon must be positive")
        if self.hamiltonian.d != self.d:
            raise ValueError("quadratic form M does not match the dimension")
        for name, poly in (
            ("V", self.hamiltonian.V),
            ("F", self.coupling.F),
            ("G", self.terminal.G),
            ("m0", self.initial.m0),
        ):
            if not poly.dimension_ok(self.d):
                raise ValueError(f"wavevectors of {name} do not match d={self.d}")

    # -- classification -----------------------------------------------------

    @property
    def strictly_elliptic(self) -> bool:
        return self.coupling.b_log > 0

    @property
    def x_independent(self) -> bool:
        return (
            self.hamiltonian.V.is_constant
            and self.coupling.F.is_constant
            and self.terminal.G.is_constant
        )

    def with_viscosity(self, epsilon: float) -> "ProblemSpec":
        return replace(self, coupling=self.coupling.with_viscosity(epsilon))

    def at_theta(self, theta: float) -> "ProblemSpec":
        """Blend towards data whose unique solution is (u, m) = (1, 1)."""
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if theta == 1.0:
            return self
        h, g, coup = self.hamiltonian, self.terminal, self.coupling
        f_at_one = float(coup.profile(1.0))
        M = theta * h.matrix + (1.0 - theta) * np.eye(self.d)
        V = h.V.scaled(theta) - (coup.F + f_at_one).scaled(1.0 - theta)
        term = TerminalSpec(
            c=theta * g.c,
            kappa=g.kappa,
            e=theta * g.e,
            G=g.G.scaled(theta),
            linear=theta * g.linear + (1.0 - theta),
        )
        m0 = self.initial.m0.scaled(theta) + (1.0 - theta)
        return replace(
            self,
            hamiltonian=replace(h, M=M, V=V),
            terminal=term,
            initial=InitialDensitySpec(m0),
        )

    # -- Hamiltonian ----------------------------------------------------------

    def H(self, x, p):
        p = np.asarray(p, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", p, self.hamiltonian.matrix, p) - self.hamiltonian.V(x)

    def DpH(self, x, p):
        return np.asarray(p, dtype=float) @ self.hamiltonian.matrix.T

    def DppH(self, x, p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(self.hamiltonian.matrix, p.shape + (self.d,))

    def DxH(self, x, p):
        return -self.hamiltonian.V.gradient(x)

    def DxpH(self, x, p):
        p = np.asarray(p, dtype=float)
        return np.zeros(p.shape + (self.d,))

    # -- coupling -------------------------------------------------------------

    def f(self, x, m):
        return self.coupling.profile(m) + self.coupling.F(x)

    def f_m(self, x, m):
        return self.coupling.profile.deriv(m)

    def f_mm(self, x, m):
        return self.coupling.profile.deriv2(m)

    def Dxf(self, x, m):
        batch = np.broadcast_shapes(np.shape(x)[:-1], np.shape(m))
        return np.broadcast_to(self.coupling.F.gradient(x), batch + (self.d,))

    def f_at_zero(self, x):
        return self.coupling.profile.value_at_zero + self.coupling.F(x)

    def f_inv(self, x, w):
        return self.coupling.profile.inverse(np.asarray(w, dtype=float) - self.coupling.F(x))

    # -- terminal cost ----------------------------------------------------------

    def g(self, x, m):
        return self.terminal.profile(m) + self.terminal.G(x)

    def g_m(self, x, m):
        return self.terminal.profile.deriv(m)

    def g_inv(self, x, v):
        return self.terminal.profile.inverse(np.asarray(v, dtype=float) - self.terminal.G(x))

    def m0(self, x):
        return self.initial.m0(x)


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------


class ChiValues(NamedTuple):
    chi: np.ndarray
    chi_w: np.ndarray
    h: np.ndarray
    h_w: np.ndarray
    m: np.ndarray


def invert_coupling(spec: ProblemSpec, x, w):
    """m > 0 with f(x, m) = w."""
    return spec.f_inv(x, w)


def eval_chi(spec: ProblemSpec, x, w) -> ChiValues:
    """chi(x, w) = m f_m(x, m) at m = f^{-1}(x, w), its w-derivative and h = sqrt(chi)."""
    m = spec.f_inv(x, w)
    prof = spec.coupling.profile
    chi = prof.chi(m)
    chi_w = prof.chi_w(m)
    h = np.sqrt(chi)
    with np.errstate(divide="ignore", invalid="ignore"):
        h_w = np.where(chi > 0, chi_w / (2.0 * h), np.inf)
    return ChiValues(chi, chi_w, h, h_w, m)


@dataclass
class PointwiseBundle:
    H: np.ndarray
    DpH: np.ndarray
    DppH: np.ndarray
    DxH: np.ndarray
    DxpH: np.ndarray
    w: np.ndarray
    m: np.ndarray
    f_m: np.ndarray
    Dxf: np.ndarray
    chi: np.ndarray
    chi_w: np.ndarray
    h: np.ndarray
    h_w: np.ndarray


def eval_derivative_bundle(spec: ProblemSpec, x, p, s) -> PointwiseBundle:
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    H = spec.H(x, p)
    w = -np.asarray(s, dtype=float) + H
    cv = eval_chi(spec, x, w)
    batch = np.broadcast_shapes(x.shape, p.shape)
    return PointwiseBundle(
        H=H,
        DpH=spec.DpH(x, p),
        DppH=spec.DppH(x, p),
        DxH=np.broadcast_to(spec.DxH(x, p), batch),
        DxpH=spec.DxpH(x, p),
        w=w,
        m=cv.m,
        f_m=spec.f_m(x, cv.m),
        Dxf=np.broadcast_to(spec.coupling.F.gradient(x), batch),
        chi=cv.chi,
        chi_w=cv.chi_w,
        h=cv.h,
        h_w=cv.h_w,
    )


class Envelope(NamedTuple):
    """phi(m) + offset, with its inverse."""

    profile: MonotoneProfile
    offset: float

    def __call__(self, m):
        return self.profile(m) + self.offset

    def inverse(self, v):
        return self.profile.inverse(np.asarray(v, dtype=float) - self.offset)


class Envelopes(NamedTuple):
    f0: Envelope
    f1: Envelope
    g0: Envelope
    g1: Envelope


def envelopes(spec: ProblemSpec) -> Envelopes:
    """Pointwise min / max over the torus of f(., m) and g(., m)."""
    f_lo, f_hi = spec.coupling.F.extrema(spec.d)
    g_lo, g_hi = spec.terminal.G.extrema(spec.d)
    fp, gp = spec.coupling.profile, spec.terminal.profile
    return Envelopes(Envelope(fp, f_lo), Envelope(fp, f_hi), Envelope(gp, g_lo), Envelope(gp, g_hi))


# ---------------------------------------------------------------------------
# assumption validators
# ---------------------------------------------------------------------------


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    margin: float
    note: str = ""


@dataclass
class ValidationReport:
    checks: list[AssumptionCheck]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]


def _torus_samples(rng, n, d):
    return rng.random((n, d))


def validate_assumptions(
    spec: ProblemSpec,
    sample_count: int = 2000,
    seed: int = 0,
    p_range: float = 10.0,
    w_range: tuple[float, float] = (-10.0, 10.0),
    m_range: tuple[float, float] = (1e-3, 1e3),
) -> ValidationReport:
    """Sample the structural inequalities (M), (H), (F), (G), (E).

    Each entry's margin is the worst sampled slack; negative means violated.
    """
    rng = np.random.default_rng(seed)
    d = spec.d
    h = spec.hamiltonian
    C0, tau = h.C0, h.tau
    checks: list[AssumptionCheck] = []
    inf = math.inf

    x = _torus_samples(rng, sample_count, d)
    p = rng.uniform(-p_range, p_range, (sample_count, d))
    logm = rng.uniform(math.log(m_range[0]), math.log(m_range[1]), sample_count)
    m = np.exp(logm)

    eig = np.linalg.eigvalsh(h.matrix)
    sym = np.allclose(h.matrix, h.matrix.T, rtol=0, atol=1e-14)
    margin = float(min(eig.min() - 1.0 / C0, C0 - eig.max()))
    checks.append(AssumptionCheck("H1", sym and margin >= 0, margin, f"eigenvalues {eig.tolist()}"))

    h2 = np.einsum("ni,ni->n", spec.DpH(x, p), p) - 2.0 * spec.H(x, p) + C0
    checks.append(AssumptionCheck("H2", bool(h2.min() >= -1e-9), float(h2.min())))
    checks.append(AssumptionCheck("H3", True, inf, "D3_ppp H = 0 for quadratic H"))
    checks.append(AssumptionCheck("HX", True, inf, "D2_xp H = 0 for separable H"))

    fprof = spec.coupling.profile
    fm = fprof.deriv(m)
    checks.append(AssumptionCheck("F-monotone", bool(fm.min() > 0), float(fm.min())))
    growth = fprof.log_coef if not fprof.powers else inf
    checks.append(AssumptionCheck("F1", growth > 0, growth, "liminf m f_m as m -> inf"))

    w = rng.uniform(*w_range, sample_count)
    xw = x
    if not spec.strictly_elliptic:
        ok = w > spec.f_at_zero(xw) + 1e-12
        w, xw = w[ok], xw[ok]
    chi_w = eval_chi(spec, xw, w).chi_w
    f2 = C0 - np.abs(chi_w)
    checks.append(AssumptionCheck("F2", bool(f2.min() >= 0), float(f2.min())))
    checks.append(AssumptionCheck("FX1", True, inf, "(D_x f)_m = 0 for separable f"))

    fx = np.linalg.norm(spec.coupling.F.gradient(x), axis=-1)
    fxx = np.linalg.norm(spec.coupling.F.hessian(x), axis=(-2, -1), ord=2)
    rhs = C0 * (1.0 + np.abs(spec.f(x, m)) ** (tau / 2) + np.abs(m * fm) ** ((1 + tau) / 2))
    fx2 = float(np.min(rhs - np.maximum(fx, fxx)))
    checks.append(AssumptionCheck("FX2", fx2 >= 0, fx2))

    gprof = spec.terminal.profile
    gm = gprof.deriv(m)
    checks.append(AssumptionCheck("G-monotone", bool(gm.min() > 0), float(gm.min())))
    gx_ok = gprof.log_coef > 0 or spec.terminal.G.is_constant
    checks.append(
        AssumptionCheck(
            "GX-proxy",
            gx_ok,
            inf if gx_ok else -inf,
            "g(x,0) = inf g needs g0(0) = -inf or constant G",
        )
    )
    if not spec.strictly_elliptic:
        checks.append(
            AssumptionCheck("DE-terminal", gprof.log_coef == 0.0, 0.0, "g(.,0) > -inf under DE")
        )

    n = 256 if d == 1 else 64
    axes = np.meshgrid(*([np.arange(n) / n] * d), indexing="ij")
    grid = np.stack(axes, axis=-1)
    m0 = spec.m0(grid)
    mass = float(m0.mean())
    checks.append(AssumptionCheck("M1-positive", bool(m0.min() > 0), float(m0.min())))
    checks.append(AssumptionCheck("M1-mass", abs(mass - 1.0) <= 1e-12, -abs(mass - 1.0)))
    return ValidationReport(checks)
