"""Planar convex bodies stored as sampled support functions.

A body is described by h_i = h(theta_i) on the uniform periodic grid
theta_i = 2*pi*i/M.  Minkowski combinations and hulls of unions are then
pointwise operations on the samples; everything else (boundary points,
curvature radii, inradius) is derived from them.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import DegenerateBody, GridMismatch, InvalidConstraint

DEFAULT_M = 256
CONVEX_RTOL = 1e-9


def angle_grid(M):
    return 2.0 * np.pi * np.arange(M) / M


def convex_hull(points):
    """Counterclockwise hull of 2-D points (Andrew's monotone chain).

    Collinear points are dropped.  Returns an (n, 2) array; n may be 1 or 2
    for degenerate input.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(poly):
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_support(poly, angles):
    """Support function of a point set sampled at ``angles``."""
    poly = np.asarray(poly, dtype=float)
    n = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return (n @ poly.T).max(axis=1)


@dataclass(frozen=True)
class Direction:
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle) % (2.0 * np.pi))

    @property
    def vector(self):
        return np.array([np.cos(self.angle), np.sin(self.angle)])


def _second_difference(h):
    return np.roll(h, 1) - 2.0 * h + np.roll(h, -1)


def _support_cone_defect(h):
    """Smallest slack of h_{i-1} + h_{i+1} >= 2 cos(dtheta) h_i.

    Non-negative exactly when the samples are the support function of the
    polygon cut out by the M half-planes, i.e. every constraint is active.
    """
    dtheta = 2.0 * np.pi / len(h)
    return float(np.min(np.roll(h, 1) + np.roll(h, -1) - 2.0 * np.cos(dtheta) * h))


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Convex body containing the origin, given by support samples."""

    h: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        M = h.size
        if h.ndim != 1 or M < 16 or M % 2:
            raise ValueError(f"support grid must be 1-D, even and >= 16 (got {h.shape})")
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise DegenerateBody("support values must be finite and positive")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        tol = CONVEX_RTOL * h.max()
        if self.curvature_radii().min() < -tol:
            raise DegenerateBody("support samples violate discrete convexity")

    @property
    def M(self):
        return self.h.size

    @property
    def dtheta(self):
        return 2.0 * np.pi / self.M

    @property
    def angles(self):
        return angle_grid(self.M)

    @property
    def normals(self):
        t = self.angles
        return np.stack([np.cos(t), np.sin(t)], axis=1)

    def derivative(self):
        """Centered periodic difference h'(theta_i)."""
        return (np.roll(self.h, -1) - np.roll(self.h, 1)) / (2.0 * self.dtheta)

    def boundary_points(self):
        t = self.angles
        n = np.stack([np.cos(t), np.sin(t)], axis=1)
        tang = np.stack([-np.sin(t), np.cos(t)], axis=1)
        return self.h[:, None] * n + self.derivative()[:, None] * tang

    def curvature_radii(self):
        return _second_difference(self.h) / self.dtheta**2 + self.h

    def is_convex(self, tol=None):
        if tol is None:
            tol = CONVEX_RTOL * self.h.max()
        return bool(self.curvature_radii().min() >= -tol)

    def steiner_point(self):
        return (2.0 / self.M) * (self.h @ self.normals)

    def translate(self, v):
        return ConvexBody(self.h + self.normals @ np.asarray(v, dtype=float))

    def scale(self, factor, about=None):
        """Homothety with ratio ``factor`` about ``about`` (default Steiner point)."""
        c = self.steiner_point() if about is None else np.asarray(about, dtype=float)
        hc = self.normals @ c
        return ConvexBody(hc + factor * (self.h - hc))

    def width(self):
        half = self.M // 2
        return self.h + np.roll(self.h, -half)

    def diameter(self):
        return float(self.width().max())

    def inradius(self):
        """Largest inscribed disk radius of the half-plane polygon (LP)."""
        n = self.normals
        A = np.hstack([n, np.ones((self.M, 1))])
        res = linprog(
            c=[0.0, 0.0, -1.0], A_ub=A, b_ub=self.h,
            bounds=[(None, None), (None, None), (0.0, None)], method="highs",
        )
        if res.status != 0:
            return float(self.h.min())
        return float(-res.fun)

    def enclosing_radius(self, center=None):
        """Radius of the smallest disk about ``center`` (Steiner point) containing the body."""
        c = self.steiner_point() if center is None else np.asarray(center, dtype=float)
        return float(np.linalg.norm(self.boundary_points() - c, axis=1).max())

    def contains_points(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        return np.all(pts @ self.normals.T <= self.h + tol, axis=1)

    def ray_exit(self, origin, direction):
        """Distance along ``direction`` from an interior point to the boundary."""
        dn = self.normals @ direction
        slack = self.h - self.normals @ origin
        mask = dn > 1e-14
        return float(np.min(slack[mask] / dn[mask]))

    def to_csv(self, path):
        pts = self.boundary_points()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "theta", "h", "x", "y"])
            for i, (t, hv, p) in enumerate(zip(self.angles, self.h, pts)):
                w.writerow([i, repr(float(t)), repr(float(hv)), repr(float(p[0])), repr(float(p[1]))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["h"]) for r in rows]))


# constructors ------------------------------------------------------------

def disk(radius=1.0, center=(0.0, 0.0), M=DEFAULT_M):
    t = angle_grid(M)
    return ConvexBody(radius + center[0] * np.cos(t) + center[1] * np.sin(t))


def ellipse(a, b, center=(0.0, 0.0), rotation=0.0, M=DEFAULT_M):
    t = angle_grid(M)
    s = t - rotation
    h = np.sqrt((a * np.cos(s)) ** 2 + (b * np.sin(s)) ** 2)
    return ConvexBody(h + center[0] * np.cos(t) + center[1] * np.sin(t))


def polygon_body(vertices, M=DEFAULT_M):
    return body_from_support(polygon_support(vertices, angle_grid(M)))


def support_fourier(a0, terms=(), M=DEFAULT_M):
    t = angle_grid(M)
    h = np.full(M, float(a0))
    for k, ak, bk in terms:
        h += ak * np.cos(k * t) + bk * np.sin(k * t)
    return body_from_support(h)


# operations --------------------------------------------------------------

def body_from_support(values):
    """Convex body from raw support samples, repairing non-convex input.

    Samples already in the discrete support cone are kept as they are.
    Otherwise the boundary points induced by the samples are hulled and the
    hull's support function is sampled back onto the grid.  The result is
    translated to its Steiner point if the origin is not interior.
    """
    h = np.asarray(values, dtype=float).copy()
    M = h.size
    if h.ndim != 1 or M < 16 or M % 2:
        raise ValueError(f"support grid must be 1-D, even and >= 16 (got {h.shape})")
    if not np.all(np.isfinite(h)):
        raise DegenerateBody("non-finite support values")
    if (h + np.roll(h, -M // 2)).min() <= 0:
        # no convex body has a negative width; hulling would mirror the points
        raise DegenerateBody("support data has non-positive width")
    if _support_cone_defect(h) < -CONVEX_RTOL * np.abs(h).max():
        t = angle_grid(M)
        dh = (np.roll(h, -1) - np.roll(h, 1)) / (2.0 * (2.0 * np.pi / M))
        pts = np.stack([h * np.cos(t) - dh * np.sin(t), h * np.sin(t) + dh * np.cos(t)], axis=1)
        hull = convex_hull(pts)
        scale = max(np.abs(pts).max(), 1e-300)
        if len(hull) < 3 or abs(polygon_area(hull)) <= 1e-12 * scale**2:
            raise DegenerateBody("convex hull of induced boundary points has empty interior")
        h = polygon_support(hull, t)
    width = h + np.roll(h, -M // 2)
    if width.min() <= 1e-12 * np.abs(h).max():
        raise DegenerateBody("support data has zero width")
    if h.min() <= 0:
        n = np.stack([np.cos(angle_grid(M)), np.sin(angle_grid(M))], axis=1)
        s = (2.0 / M) * (h @ n)
        h = h - n @ s
        if h.min() <= 0:
            raise DegenerateBody("origin cannot be moved into the interior")
    return ConvexBody(h)


def boundary_point(K, theta):
    """Boundary point of K with outer normal ``theta``.

    ``theta`` is a Direction, an angle in radians, or an integer grid index.
    Off-grid angles interpolate h and h' linearly.
    """
    if isinstance(theta, (int, np.integer)):
        return K.boundary_points()[int(theta) % K.M]
    ang = theta.angle if isinstance(theta, Direction) else float(theta) % (2 * np.pi)
    x = ang / K.dtheta
    i0 = int(np.floor(x)) % K.M
    i1 = (i0 + 1) % K.M
    w = x - np.floor(x)
    if w < 1e-12:
        return K.boundary_points()[i0]
    hv = (1 - w) * K.h[i0] + w * K.h[i1]
    dh = K.derivative()
    dv = (1 - w) * dh[i0] + w * dh[i1]
    n = np.array([np.cos(ang), np.sin(ang)])
    tang = np.array([-n[1], n[0]])
    return hv * n + dv * tang


def curvature_radius(K, i):
    return float(K.curvature_radii()[int(i) % K.M])


def _same_grid(*bodies):
    M = bodies[0].M
    for b in bodies[1:]:
        if b.M != M:
            raise GridMismatch(f"angle grids differ: {M} vs {b.M}")


def minkowski_combine(A, B, lam):
    _same_grid(A, B)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if lam == 0.0:
        return A
    if lam == 1.0:
        return B
    return ConvexBody((1.0 - lam) * A.h + lam * B.h)


def hull_of_union(A, B):
    _same_grid(A, B)
    return ConvexBody(np.maximum(A.h, B.h))


def hausdorff_distance(A, B):
    _same_grid(A, B)
    return float(np.abs(A.h - B.h).max())


# boundary constraint -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryConstraint:
    """Gradient constraint g on the unit circle.

    ``kind`` is one of ``constant``, ``fourier`` or ``samples``.  Samples are
    placed on the uniform angle grid and interpolated linearly and
    periodically.  ``c`` and ``C`` are the lower and upper bounds of g.
    """

    kind: str
    value: float = 0.0
    a0: float = 0.0
    terms: tuple = ()
    samples: np.ndarray | None = None
    c: float = field(init=False)
    C: float = field(init=False)

    def __post_init__(self):
        if self.kind == "constant":
            probe = np.array([float(self.value)])
        elif self.kind == "fourier":
            object.__setattr__(self, "terms", tuple((int(k), float(a), float(b)) for k, a, b in self.terms))
            probe = self._eval_fourier(angle_grid(4096))
        elif self.kind == "samples":
            s = np.array(self.samples, dtype=float)
            if s.ndim != 1 or s.size < 2:
                raise InvalidConstraint("samples must be a 1-D array")
            s.setflags(write=False)
            object.__setattr__(self, "samples", s)
            probe = s
        else:
            raise InvalidConstraint(f"unknown constraint kind {self.kind!r}")
        if not np.all(np.isfinite(probe)):
            raise InvalidConstraint("constraint values must be finite")
        c, C = float(probe.min()), float(probe.max())
        if c <= 0:
            raise InvalidConstraint(f"g must be bounded below by a positive constant (min {c})")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "C", C)

    @classmethod
    def constant(cls, value):
        return cls("constant", value=float(value))

    @classmethod
    def fourier(cls, a0, terms):
        return cls("fourier", a0=float(a0), terms=tuple(terms))

    @classmethod
    def from_samples(cls, values):
        return cls("samples", samples=np.asarray(values, dtype=float))

    def _eval_fourier(self, t):
        out = np.full(np.shape(t), self.a0, dtype=float)
        for k, a, b in self.terms:
            out = out + a * np.cos(k * t) + b * np.sin(k * t)
        return out

    def __call__(self, theta):
        if isinstance(theta, Direction):
            theta = theta.angle
        t = np.asarray(theta, dtype=float)
        if self.kind == "constant":
            out = np.full(t.shape, self.value)
        elif self.kind == "fourier":
            out = self._eval_fourier(t)
        else:
            n = self.samples.size
            x = np.mod(t, 2.0 * np.pi) / (2.0 * np.pi / n)
            i0 = np.floor(x).astype(int) % n
            w = x - np.floor(x)
            out = (1.0 - w) * self.samples[i0] + w * self.samples[(i0 + 1) % n]
        return float(out) if out.ndim == 0 else out

    def on_grid(self, M):
        return np.asarray(self(angle_grid(M)), dtype=float)

    def rotated(self, steps, M):
        """Samples of g(theta - steps * 2*pi/M) on the M-grid."""
        return BoundaryConstraint.from_samples(np.roll(self.on_grid(M), steps))

    def to_csv(self, path, M):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "theta", "g"])
            for i, (t, gv) in enumerate(zip(angle_grid(M), self.on_grid(M))):
                w.writerow([i, repr(float(t)), repr(float(gv))])


def harmonic_mean_constraint(g0, g1, lam, M=DEFAULT_M):
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if lam == 0.0:
        return g0
    if lam == 1.0:
        return g1
    a, b = g0.on_grid(M), g1.on_grid(M)
    return BoundaryConstraint.from_samples(1.0 / ((1.0 - lam) / a + lam / b))
