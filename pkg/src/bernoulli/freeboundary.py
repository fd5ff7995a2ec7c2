"""Trial free boundary iteration for the interior Bernoulli problem.

Given a convex domain Omega, an exponent p and a gradient constraint g on
the unit circle, look for a convex K inside Omega whose p-capacitary
potential u satisfies |Du| = g(nu) on dK.  Each outer step solves for u on
the current ring, reads |Du| at the nodes of dK and moves the support line
with normal theta_i by

    omega * gap_i * (g_i - |Du|_i) / (g_i + |Du|_i),

then re-convexifies.  Along the branch of large (maximal) solutions |Du|
grows with K, so the step drives K to the fixed point from either side.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import oracles
from .errors import (
    BoundaryContact, BracketError, CollapseDetected, ConfigError, DegenerateBody, MeshFold,
)
from .geometry import ConvexBody, body_from_support
from .pde import boundary_gradient, build_mesh, solve_p_capacitary

log = logging.getLogger(__name__)

CONVERGED = "Converged"
NO_SOLUTION = "NoSolution"
MAX_ITERATIONS = "MaxIterations"
CORNER_RTOL = 1e-6


@dataclass
class SolverConfig:
    """Knobs of the free boundary iteration.

    ``collapse_radius`` is a fraction of the inradius of Omega and
    ``contact_gap`` a fraction of its diameter, so a config can be reused on
    domains of different size.
    """

    damping: float = 0.5
    tol_residual: float = 1e-2
    max_outer: int = 300
    M: int = 256
    L: int = 65
    shrink0: float = 0.5
    collapse_radius: float = 0.02
    contact_gap: float = 0.002
    pde_tol: float = 1e-9
    pde_max_iter: int = 200
    sor_factor: float = 1.7

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must lie in (0, 1]")
        if not self.tol_residual > 0:
            raise ConfigError("tol_residual must be positive")
        if self.max_outer < 1:
            raise ConfigError("max_outer must be at least 1")
        if self.M < 16 or self.M % 2:
            raise ConfigError("M must be even and at least 16")
        if self.L < 16:
            raise ConfigError("L must be at least 16")
        if not 0 < self.shrink0 < 1:
            raise ConfigError("shrink0 must lie in (0, 1)")
        if not 0 < self.collapse_radius < self.shrink0:
            raise ConfigError("collapse_radius must lie in (0, shrink0)")
        if not 0 < self.contact_gap < 0.5:
            raise ConfigError("contact_gap must lie in (0, 0.5)")
        if not self.pde_tol > 0 or self.pde_max_iter < 1:
            raise ConfigError("invalid PDE tolerances")
        if not 0 < self.sor_factor < 2:
            raise ConfigError("sor_factor must lie in (0, 2)")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown solver keys: {sorted(extra)}")
        return cls(**data)


@dataclass(eq=False)
class SolveReport:
    status: str
    K: ConvexBody
    omega: ConvexBody
    p: float
    config: SolverConfig
    potential: object = None
    mesh: object = None
    grad: np.ndarray | None = None
    g_values: np.ndarray | None = None
    history: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def theta(self):
        return self.K.angles

    @property
    def residual(self):
        if self.grad is None:
            return np.full(self.K.M, np.nan)
        return self.grad - self.g_values

    @property
    def sup_residual(self):
        return float(np.abs(self.residual).max())

    @property
    def iterations(self):
        return len(self.history)

    @property
    def converged(self):
        return self.status == CONVERGED

    @property
    def mesh_tolerance(self):
        """Radial spacing of the final mesh, the resolution limit of dK."""
        if self.mesh is None:
            return float("nan")
        return float(self.mesh.gaps.max() / (self.config.L - 1))

    def summary(self):
        return {
            "status": self.status,
            "iterations": self.iterations,
            "sup_residual": self.sup_residual,
            "p": self.p,
            "inradius": self.K.inradius(),
            "mesh_tolerance": self.mesh_tolerance,
            "config": self.config.to_dict(),
            "diagnostics": self.diagnostics,
        }

    def write(self, outdir, field_csv=True):
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        pts = self.K.boundary_points()
        with open(os.path.join(outdir, "boundary.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "theta", "h", "x", "y", "grad", "g", "residual"])
            for i in range(self.K.M):
                w.writerow([i] + [repr(float(v)) for v in (
                    self.theta[i], self.K.h[i], pts[i, 0], pts[i, 1],
                    self.grad[i], self.g_values[i], self.residual[i])])
        with open(os.path.join(outdir, "residuals.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "sup_residual", "inradius"])
            for row in self.history:
                w.writerow([row["iter"], repr(row["sup_residual"]), repr(row["inradius"])])
        if field_csv and self.potential is not None:
            self.potential.to_csv(os.path.join(outdir, "field.csv"), self.mesh)


def initial_guess(omega, config):
    return omega.scale(config.shrink0)


def update_boundary(K, grad, g, omega_damping, gap, smoothing=0.0):
    """One damped trial-boundary step on the support samples.

    With ``smoothing`` = beta > 0 the raw step is filtered by 1/(1 + beta|k|)
    in angular wavenumber k.  The response of |Du| to a boundary wiggle of
    wavenumber k grows like k * |Du| / r, so an unfiltered local step is
    unstable for the short modes once beta ~ gap / r is exceeded.  The filter
    kernel is non-negative, so the sign structure of the step is kept, and it
    is invertible, so fixed points are unchanged.
    """
    gv = g.on_grid(K.M)
    grad = np.asarray(grad, dtype=float)
    step = omega_damping * np.asarray(gap) * (gv - grad) / (gv + grad)
    if smoothing > 0:
        k = np.arange(K.M // 2 + 1)
        step = np.fft.irfft(np.fft.rfft(step) / (1.0 + smoothing * k), n=K.M)
    try:
        return body_from_support(K.h + step)
    except DegenerateBody as exc:
        raise CollapseDetected(str(exc)) from exc


def _solve_ring(omega, K, p, config, gap_min, initial=None):
    mesh = build_mesh(omega, K, config.L, gap_min=gap_min)
    fld = solve_p_capacitary(
        mesh, p, tol=config.pde_tol, max_iter=config.pde_max_iter,
        initial=initial, sor_factor=config.sor_factor,
    )
    return mesh, fld, boundary_gradient(fld, mesh)


def solve_interior_bernoulli(omega, g, p, config=None):
    """Run the trial boundary iteration; nonexistence is a status, not an error."""
    config = SolverConfig() if config is None else config
    if omega.M != config.M:
        raise ConfigError(f"domain grid {omega.M} differs from config M={config.M}")
    M = config.M
    gv = g.on_grid(M)
    in_omega = omega.inradius()
    collapse = config.collapse_radius * in_omega
    gap_min = config.contact_gap * omega.diameter()

    K = initial_guess(omega, config)
    damping = config.damping
    history, diagnostics = [], []
    u_prev = None
    rising = 0
    last_sign = 0.0
    contact_strikes = 0
    mesh = fld = grad = None
    status = MAX_ITERATIONS

    for it in range(1, config.max_outer + 1):
        try:
            mesh, fld, grad = _solve_ring(omega, K, p, config, gap_min, u_prev)
        except (BoundaryContact, MeshFold) as exc:
            diagnostics.append({"iter": it, "event": type(exc).__name__, "detail": str(exc)})
            status = NO_SOLUTION
            break
        if not fld.converged:
            diagnostics.append({"iter": it, "event": "PDENotConverged", "detail": f"residual {fld.residual:.3g}"})
        u_prev = fld.u
        res = grad - gv
        sup = float(np.abs(res).max())
        history.append({"iter": it, "sup_residual": sup, "inradius": K.inradius()})

        if sup <= config.tol_residual:
            # certificate: cold-start solve on the final body
            mesh, fld, grad = _solve_ring(omega, K, p, config, gap_min)
            cert = float(np.abs(grad - gv).max())
            if cert <= config.tol_residual:
                status = CONVERGED
                break
            diagnostics.append({"iter": it, "event": "CertificateFailed", "detail": f"{cert:.3g}"})
            u_prev = fld.u

        # oscillation: sup residual up twice in a row with the mean residual
        # flipping sign, i.e. overshooting the fixed point
        sign = float(np.sign(res.mean()))
        if len(history) >= 2 and sup > history[-2]["sup_residual"] and sign != last_sign:
            rising += 1
            if rising >= 2:
                damping *= 0.5
                rising = 0
                diagnostics.append({"iter": it, "event": "DampingHalved", "detail": f"{damping:.6g}"})
        else:
            rising = 0
        last_sign = sign

        smoothing = float(mesh.gaps.mean() / K.h.mean())
        try:
            K_new = update_boundary(K, grad, g, damping, mesh.gaps, smoothing)
        except CollapseDetected as exc:
            diagnostics.append({"iter": it, "event": "CollapseDetected", "detail": str(exc)})
            status = NO_SOLUTION
            break

        if (omega.h - K_new.h).min() < gap_min:
            contact_strikes += 1
            diagnostics.append({"iter": it, "event": "ContactGap", "detail": f"strike {contact_strikes}"})
            if contact_strikes >= 3:
                status = NO_SOLUTION
                break
            K_new = _retreat(omega, K, K_new, gap_min)
        else:
            contact_strikes = 0

        if K_new.inradius() < collapse:
            diagnostics.append({"iter": it, "event": "CollapseDetected", "detail": "inradius below collapse_radius"})
            K = K_new
            status = NO_SOLUTION
            break
        K = K_new

    if mesh is not None:
        # report the last body that was actually solved on
        K = mesh.K
    if status == CONVERGED:
        # one-sided gradients are unreliable at corner-like nodes; flag, do not fix
        corners = np.flatnonzero(K.curvature_radii() <= CORNER_RTOL * K.h.max())
        if corners.size:
            diagnostics.append({"iter": len(history), "event": "CornerNodes",
                                "detail": " ".join(str(int(i)) for i in corners)})
    return SolveReport(
        status=status, K=K, omega=omega, p=p, config=config, potential=fld, mesh=mesh,
        grad=grad, g_values=gv, history=history, diagnostics=diagnostics,
    )


def _retreat(omega, K, K_new, gap_min):
    """Pull K_new back towards K until it clears the contact gap."""
    for t in (0.5, 0.25, 0.125, 0.0):
        cand = ConvexBody((1 - t) * K.h + t * K_new.h) if t else K
        if (omega.h - cand.h).min() >= gap_min:
            return cand
    return K


@dataclass
class SubsolutionReport:
    passed: bool
    worst_margin: float
    worst_theta: float
    margins: np.ndarray
    grad: np.ndarray


def check_subsolution(omega, K, g, p, tol, L=65, pde_tol=1e-9, gap_min=None):
    """|Dv| <= g(nu) + tol on dK for the capacitary potential v of the ring."""
    mesh = build_mesh(omega, K, L, gap_min=gap_min)
    fld = solve_p_capacitary(mesh, p, tol=pde_tol)
    grad = boundary_gradient(fld, mesh)
    margins = g.on_grid(K.M) - grad
    k = int(np.argmin(margins))
    return SubsolutionReport(
        passed=bool(margins.min() >= -tol), worst_margin=float(margins[k]),
        worst_theta=float(K.angles[k]), margins=margins, grad=grad,
    )


@dataclass
class LambdaEstimate:
    value: float
    bracket: tuple
    probes: list

    def __float__(self):
        return float(self.value)


def bernoulli_constant_numeric(omega, p, config=None, rtol=1e-2, widen=0.1):
    """Bernoulli constant of Omega by bisection on constant g.

    A probe tau counts as solvable when the free boundary iteration converges.
    The initial bracket comes from the balls inscribed in and enclosing Omega.
    """
    from .geometry import BoundaryConstraint

    config = SolverConfig() if config is None else config
    C = oracles.bernoulli_constant_ball(p, 2, 1.0)
    lo = (1 - widen) * C / omega.enclosing_radius()
    hi = (1 + widen) * C / omega.inradius()
    probes = []

    def solvable(tau):
        rep = solve_interior_bernoulli(omega, BoundaryConstraint.constant(tau), p, config)
        probes.append((tau, rep.status))
        log.info("tau=%.6g -> %s", tau, rep.status)
        return rep.converged

    if solvable(lo) or not solvable(hi):
        raise BracketError(f"bracket [{lo:.6g}, {hi:.6g}] does not separate solvable from unsolvable")
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if solvable(mid):
            hi = mid
        else:
            lo = mid
    return LambdaEstimate(0.5 * (lo + hi), (lo, hi), probes)
