"""p-capacitary potentials of convex rings on a mapped curvilinear mesh.

The ring between K and Omega is parametrised by (s, theta) in [0, 1] x S^1,

    x(s, theta_i) = (1 - s) q_i + s Q_i,

where q_i is the point of dK with outer normal theta_i and Q_i is where the
ray from q_i along that normal leaves Omega.  The regularised equation

    div((|Du|^2 + eps^2)^((p-2)/2) Du) = 0

is written in conservation form in the mapped coordinates and discretised
with half-point fluxes, giving a 9-point stencil (the cross terms come from
the non-orthogonality of the map).  Nonlinearity is handled by Picard
iteration: freeze the coefficient, relax the linear problem with
lexicographic SOR, repeat.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BoundaryContact, InvalidExponent, MeshFold, NoConvergence
from .geometry import ConvexBody, _same_grid

log = logging.getLogger(__name__)

SOR_FACTOR = 1.7
GRAZING_COS = 0.5


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


@dataclass(eq=False)
class RingMesh:
    omega: ConvexBody
    K: ConvexBody
    L: int
    q: np.ndarray
    Q: np.ndarray
    fallback_nodes: np.ndarray

    def __post_init__(self):
        M, L = self.M, self.L
        self.s = np.linspace(0.0, 1.0, L)
        self.h_s = 1.0 / (L - 1)
        self.h_t = 2.0 * np.pi / M
        q, Q = self.q, self.Q
        D = Q - q
        dq = (np.roll(q, -1, axis=0) - np.roll(q, 1, axis=0)) / (2 * self.h_t)
        dQ = (np.roll(Q, -1, axis=0) - np.roll(Q, 1, axis=0)) / (2 * self.h_t)

        # nodes
        s = self.s[None, :, None]
        xe = (1 - s) * dq[:, None, :] + s * dQ[:, None, :]
        Dn = np.broadcast_to(D[:, None, :], xe.shape)
        self.x = (1 - s) * q[:, None, :] + s * Q[:, None, :]
        self.jac = _cross(Dn, xe)
        self._node_metric = self._metric(Dn, xe, self.jac)

        # radial half points (i, j + 1/2)
        sh = 0.5 * (self.s[:-1] + self.s[1:])[None, :, None]
        xe = (1 - sh) * dq[:, None, :] + sh * dQ[:, None, :]
        Dh = np.broadcast_to(D[:, None, :], xe.shape)
        self.jac_s = _cross(Dh, xe)
        self.metric_s = self._metric(Dh, xe, self.jac_s)

        # angular half points (i + 1/2, j)
        Da = 0.5 * (D + np.roll(D, -1, axis=0))
        fq = (np.roll(q, -1, axis=0) - q) / self.h_t
        fQ = (np.roll(Q, -1, axis=0) - Q) / self.h_t
        xe = (1 - s) * fq[:, None, :] + s * fQ[:, None, :]
        Da = np.broadcast_to(Da[:, None, :], xe.shape)
        self.jac_t = _cross(Da, xe)
        self.metric_t = self._metric(Da, xe, self.jac_t)

    @staticmethod
    def _metric(xs, xt, jac):
        """Contravariant metric (g^ss, g^st, g^tt) of the map."""
        j2 = jac**2
        return _dot(xt, xt) / j2, -_dot(xs, xt) / j2, _dot(xs, xs) / j2

    @property
    def M(self):
        return self.K.M

    @property
    def theta(self):
        return self.K.angles

    @property
    def gaps(self):
        return np.linalg.norm(self.Q - self.q, axis=1)

    @property
    def min_jacobian(self):
        return float(min(self.jac.min(), self.jac_s.min(), self.jac_t.min()))

    def node_metric(self):
        return self._node_metric


def _ray_targets(omega, K, q):
    """Exit points of the normal rays, plus a mask of grazing exits."""
    n = K.normals
    gamma = omega.normals @ n.T  # (face, ray)
    slack = omega.h[:, None] - omega.normals @ q.T
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(gamma > 1e-14, slack / gamma, np.inf)
    face = np.argmin(t, axis=0)
    tmin = t[face, np.arange(K.M)]
    grazing = gamma[face, np.arange(K.M)] < GRAZING_COS
    return q + tmin[:, None] * n, grazing


def build_mesh(omega, K, L, gap_min=None):
    """Ring mesh between K and Omega with L radial layers.

    ``gap_min`` defaults to 3 * diam(Omega) / L.
    """
    _same_grid(omega, K)
    if L < 16:
        raise ValueError("need at least 16 radial layers")
    if gap_min is None:
        gap_min = 3.0 * omega.diameter() / L
    support_gap = omega.h - K.h
    if support_gap.min() < gap_min:
        raise BoundaryContact(f"support gap {support_gap.min():.3g} below {gap_min:.3g}")
    q = K.boundary_points()
    if not np.all(omega.contains_points(q, tol=-gap_min)):
        raise BoundaryContact("inner boundary is not strictly inside the domain")
    Q, grazing = _ray_targets(omega, K, q)
    Q = np.where(grazing[:, None], omega.boundary_points(), Q)
    mesh = RingMesh(omega, K, L, q, Q, np.flatnonzero(grazing))
    if mesh.min_jacobian <= 0:
        mesh = RingMesh(omega, K, L, q, omega.boundary_points(), np.arange(K.M))
        if mesh.min_jacobian <= 0:
            raise MeshFold(f"non-positive cell Jacobian {mesh.min_jacobian:.3g}")
    if mesh.gaps.min() < gap_min:
        raise BoundaryContact(f"ray gap {mesh.gaps.min():.3g} below {gap_min:.3g}")
    return mesh


# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PotentialField:
    u: np.ndarray
    p: float
    eps_reg: float
    inner_value: float = 1.0
    iterations: int = 0
    linear_sweeps: int = 0
    residual: float = float("nan")
    converged: bool = True
    max_principle_violation: float = 0.0
    history: list = field(default_factory=list)

    def to_csv(self, path, mesh):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "theta", "s", "x", "y", "u"])
            for i in range(mesh.M):
                for j in range(mesh.L):
                    x, y = mesh.x[i, j]
                    w.writerow([i, j, repr(float(mesh.theta[i])), repr(float(mesh.s[j])),
                                repr(float(x)), repr(float(y)), repr(float(self.u[i, j]))])

    def history_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["outer_iter", "picard_update_norm", "linear_iters"])
            for row in self.history:
                w.writerow([row[0], repr(float(row[1])), row[2]])


def default_eps(mesh):
    return 1e-8 / float(mesh.gaps.mean())


def _half_gradients(u, mesh):
    """|Du|^2 at the radial and angular half points."""
    hs, ht = mesh.h_s, mesh.h_t
    up = np.roll(u, -1, axis=0)
    um = np.roll(u, 1, axis=0)
    us = (u[:, 1:] - u[:, :-1]) / hs
    ut = (up[:, :-1] + up[:, 1:] - um[:, :-1] - um[:, 1:]) / (4 * ht)
    gss, gst, gtt = mesh.metric_s
    grad_s = gss * us**2 + 2 * gst * us * ut + gtt * ut**2

    ut = (up - u) / ht
    upad = np.concatenate([u[:, :1], u, u[:, -1:]], axis=1)
    uppad = np.roll(upad, -1, axis=0)
    us = (upad[:, 2:] + uppad[:, 2:] - upad[:, :-2] - uppad[:, :-2]) / (4 * hs)
    gss, gst, gtt = mesh.metric_t
    grad_t = gss * us**2 + 2 * gst * us * ut + gtt * ut**2
    return grad_s, grad_t


def assemble_stencil(u, mesh, p, eps):
    """9-point stencil of the frozen-coefficient operator around ``u``."""
    M, L = u.shape
    hs, ht = mesh.h_s, mesh.h_t
    grad_s, grad_t = _half_gradients(u, mesh)
    a_s = (grad_s + eps**2) ** ((p - 2) / 2)
    a_t = (grad_t + eps**2) ** ((p - 2) / 2)
    gss, gst, _ = mesh.metric_s
    A_half = a_s * mesh.jac_s * gss
    B_half = a_s * mesh.jac_s * gst
    _, gst_t, gtt_t = mesh.metric_t
    C_half = a_t * mesh.jac_t * gtt_t
    E_half = a_t * mesh.jac_t * gst_t

    coef = np.zeros((9, M, L))
    sl = slice(1, L - 1)
    Ap, Am = A_half[:, 1:], A_half[:, :-1]
    Bp, Bm = B_half[:, 1:], B_half[:, :-1]
    Cp, Cm = C_half[:, sl], np.roll(C_half, 1, axis=0)[:, sl]
    Ep, Em = E_half[:, sl], np.roll(E_half, 1, axis=0)[:, sl]
    hh, hk, kk = hs * hs, 4 * hs * ht, ht * ht
    coef[0, :, sl] = -(Ap + Am) / hh - (Cp + Cm) / kk
    coef[1, :, sl] = Ap / hh + (Ep - Em) / hk
    coef[2, :, sl] = Am / hh - (Ep - Em) / hk
    coef[3, :, sl] = Cp / kk + (Bp - Bm) / hk
    coef[4, :, sl] = Cm / kk - (Bp - Bm) / hk
    coef[5, :, sl] = (Bp + Ep) / hk
    coef[6, :, sl] = -(Bp + Em) / hk
    coef[7, :, sl] = -(Bm + Ep) / hk
    coef[8, :, sl] = (Bm + Em) / hk
    return coef


def scaled_residual(u, mesh, p, eps):
    """Discrete regularised p-Laplacian divided by the stencil diagonal.

    The sign is that of the operator (positive = subharmonic); the scaling
    turns it into a Jacobi correction, i.e. units of u.
    """
    coef = assemble_stencil(u, mesh, p, eps)
    r = _kernels.apply_stencil(np.ascontiguousarray(u), coef)
    diag = -coef[0]
    out = np.zeros_like(u)
    out[:, 1:-1] = r[:, 1:-1] / diag[:, 1:-1]
    return out


def solve_p_capacitary(mesh, p, tol=1e-9, max_iter=200, *, initial=None, eps_reg=None,
                       sor_factor=SOR_FACTOR, max_sweeps=200_000, inner_value=1.0,
                       strict=False):
    """p-capacitary potential of the ring: u = inner_value on dK, 0 on dOmega."""
    if not p > 1:
        raise InvalidExponent(f"p must exceed 1 (got {p})")
    if tol <= 0:
        raise ValueError("tol must be positive")
    M, L = mesh.M, mesh.L
    eps = default_eps(mesh) if eps_reg is None else eps_reg
    if initial is None:
        u = np.repeat((inner_value * (1.0 - mesh.s))[None, :], M, axis=0)
    else:
        u = np.array(initial, dtype=float)
    u = np.ascontiguousarray(u)
    u[:, 0] = inner_value
    u[:, -1] = 0.0

    inner_tol = tol / 10
    # Undamped Picard 2-cycles for p != 2; in the radial model the coefficient
    # map is a -> a^(2-p), which the blend 1/(p-1) makes exact in one step.
    relax = min(1.0, 1.0 / (p - 1.0))
    history = []
    sweeps_total = 0
    converged = False
    for it in range(1, max_iter + 1):
        coef = assemble_stencil(u, mesh, p, eps)
        prev = u.copy()
        sweeps, last = _kernels.sor_solve(u, coef, sor_factor, inner_tol, max_sweeps)
        sweeps_total += sweeps
        update = float(np.abs(u - prev).max() / max(np.abs(u).max(), 1e-300))
        if relax < 1.0:
            u = np.ascontiguousarray(prev + relax * (u - prev))
        history.append((it, update, sweeps))
        if last >= inner_tol:
            log.warning("SOR stopped at %d sweeps with update %.3g", sweeps, last)
        elif update < tol:
            converged = True
            break

    res = scaled_residual(u, mesh, p, eps)
    lo = -u.min()
    hi = u.max() - inner_value
    fld = PotentialField(
        u=u, p=p, eps_reg=eps, inner_value=inner_value, iterations=len(history),
        linear_sweeps=sweeps_total, residual=float(np.abs(res).max()),
        converged=converged, max_principle_violation=float(max(lo, hi, 0.0)),
        history=history,
    )
    if fld.max_principle_violation > 1e-12:
        log.warning("discrete maximum principle violated by %.3g", fld.max_principle_violation)
    if not converged:
        if strict:
            raise NoConvergence(f"Picard iteration did not converge in {max_iter} steps", fld)
        log.warning("p-capacitary solve not converged after %d Picard steps", max_iter)
    return fld


def boundary_gradient(field, mesh):
    """|Du| at the nodes of dK from one-sided second-order differences."""
    u = field.u
    us = (-3 * u[:, 0] + 4 * u[:, 1] - u[:, 2]) / (2 * mesh.h_s)
    ut = (np.roll(u[:, 0], -1) - np.roll(u[:, 0], 1)) / (2 * mesh.h_t)
    gss, gst, gtt = (m[:, 0] for m in mesh.node_metric())
    g2 = gss * us**2 + 2 * gst * us * ut + gtt * ut**2
    return np.sqrt(np.maximum(g2, 0.0))


@dataclass
class SubharmonicReport:
    min_residual: float
    violations: list
    tol: float

    @property
    def passed(self):
        return not self.violations


def check_discrete_psubharmonic(field, mesh, tol_sub=1e-8):
    """Sign check of the discrete p-Laplacian at interior nodes."""
    res = scaled_residual(field.u, mesh, field.p, field.eps_reg)
    inner = res[:, 1:-1]
    bad = np.argwhere(inner < -tol_sub)
    return SubharmonicReport(
        min_residual=float(inner.min()),
        violations=[(int(i), int(j) + 1) for i, j in bad],
        tol=tol_sub,
    )
