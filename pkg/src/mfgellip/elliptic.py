"""Pointwise coefficients of the reduced quasilinear problem

    -tr(A(x, Du) D^2u) + b(x, Du) = 0   in Q_T,
    B(x, t, u, Du) = 0                  on t = 0 and t = T,

together with their derivatives in q = (p, s), which feed the Newton Jacobian.
The coupling inside ``spec`` is used as given; any viscosity term must already
be folded in with :meth:`ProblemSpec.with_viscosity`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemSpec, eval_derivative_bundle


@dataclass
class CoefficientBundle:
    """A, b and their q-derivatives; ``dA_dq[..., k, :, :]`` is dA/dq_k."""

    A: np.ndarray
    b: np.ndarray
    dA_dq: np.ndarray
    db_dq: np.ndarray
    chi: np.ndarray


@dataclass
class BoundaryBundle:
    B: np.ndarray
    dB_dz: np.ndarray
    dB_dq: np.ndarray
    side: str

    @property
    def normal(self) -> np.ndarray:
        n = self.dB_dq.shape[-1]
        nu = np.zeros(n)
        nu[-1] = -1.0 if self.side == "start" else 1.0
        return nu

    def obliqueness(self) -> np.ndarray:
        """dB/dq . nu, positive for an oblique condition."""
        return self.dB_dq @ self.normal


def _blockdiag(Hpp: np.ndarray) -> np.ndarray:
    d = Hpp.shape[-1]
    out = np.zeros(Hpp.shape[:-2] + (d + 1, d + 1))
    out[..., :d, :d] = Hpp
    return out


def _direction(DpH: np.ndarray) -> np.ndarray:
    return np.concatenate([DpH, -np.ones(DpH.shape[:-1] + (1,))], axis=-1)


def coefficients(spec: ProblemSpec, x, p, s) -> CoefficientBundle:
    pb = eval_derivative_bundle(spec, x, p, s)
    d = spec.d
    v = _direction(pb.DpH)
    K = _blockdiag(pb.DppH)
    chi = pb.chi[..., None, None]
    A = v[..., :, None] * v[..., None, :] + chi * K

    drift = -pb.DxH + pb.Dxf
    trace_xp = np.trace(pb.DxpH, axis1=-2, axis2=-1)
    b = np.einsum("...i,...i->...", drift, pb.DpH) - pb.chi * trace_xp

    # dH/dq = (DpH, 0); D3_ppp H and D_x f_m vanish for the supported families
    batch = A.shape[:-2]
    dA = np.zeros(batch + (d + 1, d + 1, d + 1))
    db = np.zeros(batch + (d + 1,))
    for k in range(d):
        dv = np.zeros(batch + (d + 1,))
        dv[..., :d] = pb.DppH[..., :, k]
        dchi = (pb.chi_w * pb.DpH[..., k])[..., None, None]
        dA[..., k, :, :] = dv[..., :, None] * v[..., None, :] + v[..., :, None] * dv[..., None, :] + dchi * K
        db[..., k] = (
            np.einsum("...i,...i->...", drift, pb.DppH[..., :, k])
            - np.einsum("...i,...i->...", pb.DpH, pb.DxpH[..., :, k])
            - pb.chi_w * pb.DpH[..., k] * trace_xp
        )
    dA[..., d, :, :] = -pb.chi_w[..., None, None] * K
    db[..., d] = pb.chi_w * trace_xp
    return CoefficientBundle(A=A, b=b, dA_dq=dA, db_dq=db, chi=pb.chi)


def assemble_A(spec: ProblemSpec, x, p, s) -> np.ndarray:
    """(D_pH, -1) (x) (D_pH, -1) + chi(x, -s + H) blockdiag(D2_pp H, 0)."""
    return coefficients(spec, x, p, s).A


def assemble_b(spec: ProblemSpec, x, p, s) -> np.ndarray:
    return coefficients(spec, x, p, s).b


def q_derivatives(spec: ProblemSpec, x, p, s) -> tuple[np.ndarray, np.ndarray]:
    c = coefficients(spec, x, p, s)
    return c.dA_dq, c.db_dq


def residual_at_node(spec: ProblemSpec, x, p, s, hess) -> np.ndarray:
    c = coefficients(spec, x, p, s)
    return -np.einsum("...ij,...ij->...", c.A, hess) + c.b


def assemble_boundary(spec: ProblemSpec, x, side: str, z, p, s) -> BoundaryBundle:
    """Initial condition (side ``"start"``) or terminal condition (``"end"``)."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    s = np.asarray(s, dtype=float)
    H = spec.H(x, p)
    DpH = spec.DpH(x, p)
    batch = np.broadcast_shapes(H.shape, s.shape, np.shape(z))
    if side == "start":
        B = -s + H - spec.f(x, spec.m0(x))
        dB_dq = _direction(DpH)
        return BoundaryBundle(np.broadcast_to(B, batch), np.zeros(batch), dB_dq, side)
    if side != "end":
        raise ValueError(f"side must be 'start' or 'end', got {side!r}")
    w = -s + H
    m = spec.f_inv(x, w)
    ratio = spec.g_m(x, m) / spec.f_m(x, m)
    B = -spec.g(x, m) + z
    dB_dq = np.concatenate([-ratio[..., None] * DpH, ratio[..., None]], axis=-1)
    return BoundaryBundle(B, np.ones(batch), dB_dq, side)


def trace_inequality_terms(spec: ProblemSpec, x, p, s, hess, C0: float | None = None):
    """Both sides of the Bernstein trace inequality for a symmetric "Hessian" ``hess``.

    Returns ``(lhs, rhs)`` with
    lhs = tr(blockdiag(D2_pp H, 0) X A X),  X = hess,
    rhs = 3/(4C0) |-D_x u_t + D_pH D2_xx u|^2 + 1/(4C0) tr(I~ X A X) + 3 chi/(4C0^2) |D2_xx u|^2,
    where I~ is the identity with its time entry zeroed.  Holds whenever
    D2_pp H >= I/C0.
    """
    C0 = spec.hamiltonian.C0 if C0 is None else C0
    hess = np.asarray(hess, dtype=float)
    pb = eval_derivative_bundle(spec, x, p, s)
    c = coefficients(spec, x, p, s)
    d = spec.d
    XAX = hess @ c.A @ hess
    K = _blockdiag(pb.DppH)
    lhs = np.trace(K @ XAX, axis1=-2, axis2=-1)
    Dxx = hess[..., :d, :d]
    Dxt = hess[..., :d, d]
    transport = -Dxt + np.einsum("...i,...ij->...j", pb.DpH, Dxx)
    I_tilde = np.diag([1.0] * d + [0.0])
    rhs = (
        0.75 / C0 * np.einsum("...i,...i->...", transport, transport)
        + 0.25 / C0 * np.trace(I_tilde @ XAX, axis1=-2, axis2=-1)
        + 0.75 * pb.chi / C0**2 * np.einsum("...ij,...ij->...", Dxx, Dxx)
    )
    return lhs, rhs
