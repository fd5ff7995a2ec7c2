"""Quasi-concave envelopes and Minkowski combinations of grid functions.

The envelope u* of u has superlevel sets conv{u >= t}.  On a grid this is
approximated with a ladder of thresholds: a node receives the largest ladder
value whose superlevel hull contains it, so the error is one ladder step.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import EmptyLevel, GridMismatch, NoTriple, NotQuasiConcave
from .geometry import _same_grid, convex_hull

DEFAULT_LEVELS = 64


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on a Cartesian grid; -inf marks nodes outside the domain.

    ``values[ix, iy]`` sits at (x0 + ix * dx, y0 + iy * dy).
    """

    origin: tuple
    spacing: tuple
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if min(self.spacing) <= 0:
            raise ValueError("grid spacing must be positive")
        if not np.isfinite(v).any():
            raise ValueError("grid function has no finite value")
        if np.isnan(v).any() or np.isposinf(v).any():
            raise ValueError("values must be finite or -inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "spacing", tuple(float(c) for c in self.spacing))

    @classmethod
    def from_callable(cls, f, xlim, ylim, shape):
        nx, ny = shape
        x = np.linspace(*xlim, nx)
        y = np.linspace(*ylim, ny)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return cls((x[0], y[0]), (x[1] - x[0], y[1] - y[0]), f(X, Y))

    @property
    def shape(self):
        return self.values.shape

    def coords(self):
        nx, ny = self.shape
        x = self.origin[0] + self.spacing[0] * np.arange(nx)
        y = self.origin[1] + self.spacing[1] * np.arange(ny)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def finite_range(self):
        f = self.values[np.isfinite(self.values)]
        return float(f.min()), float(f.max())

    def with_values(self, values):
        return GridFunction(self.origin, self.spacing, values)

    def same_grid(self, other, rtol=1e-12):
        return (self.shape == other.shape
                and np.allclose(self.origin, other.origin, rtol=0, atol=rtol * max(self.spacing))
                and np.allclose(self.spacing, other.spacing, rtol=rtol))

    def to_csv(self, path):
        P = self.coords()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ix", "iy", "x", "y", "value"])
            nx, ny = self.shape
            for ix in range(nx):
                for iy in range(ny):
                    v = self.values[ix, iy]
                    w.writerow([ix, iy, repr(float(P[ix, iy, 0])), repr(float(P[ix, iy, 1])),
                                "-inf" if np.isneginf(v) else repr(float(v))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["ix", "iy", "x", "y", "value"]:
                raise ValueError(f"unexpected header {reader.fieldnames}")
            rows = list(reader)
        if not rows:
            raise ValueError("empty grid file")
        ix = np.array([int(r["ix"]) for r in rows])
        iy = np.array([int(r["iy"]) for r in rows])
        x = np.array([float(r["x"]) for r in rows])
        y = np.array([float(r["y"]) for r in rows])
        vals = np.array([float(r["value"]) for r in rows])
        nx, ny = ix.max() + 1, iy.max() + 1
        if len(rows) != nx * ny:
            raise ValueError("grid file does not cover a full rectangle")
        values = np.empty((nx, ny))
        values[ix, iy] = vals
        dx = (x.max() - x.min()) / (nx - 1) if nx > 1 else 1.0
        dy = (y.max() - y.min()) / (ny - 1) if ny > 1 else 1.0
        return cls((x.min(), y.min()), (dx, dy), values)


@dataclass(frozen=True)
class WeightVector:
    weights: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", w)


# ---------------------------------------------------------------------------

def points_in_hull(hull, pts, tol):
    """Mask of points inside a ccw convex polygon (or segment / point)."""
    pts = np.asarray(pts, dtype=float)
    hull = np.asarray(hull, dtype=float)
    if len(hull) == 1:
        return np.linalg.norm(pts - hull[0], axis=-1) <= tol
    if len(hull) == 2:
        a, b = hull
        ab = b - a
        t = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
        return np.linalg.norm(pts - (a + t[..., None] * ab), axis=-1) <= tol
    flat = pts.reshape(-1, 2)
    e = np.roll(hull, -1, axis=0) - hull
    slack = -tol * np.hypot(e[:, 0], e[:, 1])
    inside = np.empty(len(flat), dtype=bool)
    for lo in range(0, len(flat), 4096):
        q = flat[lo:lo + 4096]
        cross = (e[:, 0, None] * (q[None, :, 1] - hull[:, 1, None])
                 - e[:, 1, None] * (q[None, :, 0] - hull[:, 0, None]))
        inside[lo:lo + 4096] = np.all(cross >= slack[:, None], axis=0)
    return inside.reshape(pts.shape[:-1])


def _tol(f):
    return 1e-9 * max(f.spacing)


def superlevel_polygon(f, t):
    """Convex hull of the grid nodes with f >= t (counterclockwise)."""
    mask = f.values >= t
    if not mask.any():
        raise EmptyLevel(f"no node reaches level {t}")
    return convex_hull(f.coords()[mask])


def ladder(f, levels):
    lo, hi = f.finite_range()
    return np.linspace(lo, hi, levels)


def _ladder_fill(f, polygons, thresholds):
    out = np.full(f.shape, -np.inf)
    P = f.coords()
    tol = _tol(f)
    for t, poly in zip(thresholds, polygons):
        if poly is None:
            continue
        out[points_in_hull(poly, P, tol)] = t
    return out


def quasiconcave_envelope(f, levels=DEFAULT_LEVELS):
    """Ladder approximation of the quasi-concave envelope."""
    if levels < 2:
        raise ValueError("need at least two levels")
    ts = ladder(f, levels)
    polys = [superlevel_polygon(f, t) for t in ts]
    return f.with_values(_ladder_fill(f, polys, ts))


def ladder_step(f, levels=DEFAULT_LEVELS):
    lo, hi = f.finite_range()
    return (hi - lo) / (levels - 1)


def _ranked_nodes(f, sample_stride):
    P = f.coords()[::sample_stride, ::sample_stride].reshape(-1, 2)
    V = f.values[::sample_stride, ::sample_stride].ravel()
    keep = np.isfinite(V)
    P, V = P[keep], V[keep]
    order = np.argsort(-V, kind="stable")
    return P[order], V[order]


def _in_hull_lp(P, x):
    """Convex weights on P reproducing x, or None.  A vertex solution has <= 3 nonzeros."""
    k = len(P)
    A = np.vstack([P.T, np.ones(k)])
    res = linprog(np.zeros(k), A_eq=A, b_eq=np.append(x, 1.0), bounds=(0, None), method="highs-ds")
    return res.x if res.status == 0 else None


def maxmin_representation(f, x, sample_stride=1, return_triple=False):
    """max over node triples containing x of min(f) on the triple.

    The hulls of the top-k nodes grow with k, so the answer is the value of
    the k-th node for the smallest k whose hull contains x; k is found by
    bisection with an LP membership test.  The LP vertex is a convex
    combination of at most three nodes, which is the maximising triple.
    """
    x = np.asarray(x, dtype=float)
    P, V = _ranked_nodes(f, sample_stride)
    if _in_hull_lp(P, x) is None:
        raise NoTriple("query point is outside the hull of the sampled nodes")
    lo, hi = 1, len(P)
    while lo < hi:
        mid = (lo + hi) // 2
        if _in_hull_lp(P[:mid], x) is None:
            lo = mid + 1
        else:
            hi = mid
    # nodes tied with the last one added do not change the value
    value = float(V[lo - 1])
    if not return_triple:
        return value
    w = _in_hull_lp(P[:lo], x)
    idx = np.flatnonzero(w > 1e-12)
    return value, P[idx], w[idx]


def maxmin_triples(f, x, sample_stride=1):
    """Same quantity by explicit enumeration of node pairs and triangles.

    Cost grows like n^3 in the worst case; meant for small grids and tests.
    """
    x = np.asarray(x, dtype=float)
    P, V = _ranked_nodes(f, sample_stride)
    scale = max(f.spacing)
    tol = 1e-9 * scale
    for k in range(len(P)):
        a = P[k]
        if np.linalg.norm(a - x) <= tol:
            return float(V[k])
        prev = P[:k]
        if k >= 1:
            # pairs (a, b): x on the segment
            ab = prev - a
            ax = x - a
            cross = ab[:, 0] * ax[1] - ab[:, 1] * ax[0]
            dot = ab @ ax
            on = (np.abs(cross) <= tol * scale) & (dot >= -tol * scale) & (dot <= (ab * ab).sum(1) + tol * scale)
            if on.any():
                return float(V[k])
        if k >= 2:
            i, j = np.triu_indices(k, 1)
            if _any_triangle_contains(a, prev[i], prev[j], x, tol * scale):
                return float(V[k])
    raise NoTriple("query point is outside the hull of the sampled nodes")


def _any_triangle_contains(a, b, c, x, tol):
    def cross(o, p, q):
        return (p[..., 0] - o[..., 0]) * (q[..., 1] - o[..., 1]) - (p[..., 1] - o[..., 1]) * (q[..., 0] - o[..., 0])

    area = cross(a[None, :], b, c)
    # grid-collinear triples carry round-off area; treat them as segments (handled above)
    ok = np.abs(area) > 1e3 * tol
    sg = np.sign(area)
    s1 = cross(a[None, :], b, x[None, :]) * sg
    s2 = cross(b, c, x[None, :]) * sg
    s3 = cross(c, a[None, :], x[None, :]) * sg
    inside = ok & (s1 >= -tol) & (s2 >= -tol) & (s3 >= -tol)
    return bool(inside.any())


def harmonic_gradient(lam, grads):
    """Weighted harmonic mean (sum lam_k / grads_k)^-1."""
    w = np.asarray(lam.weights if isinstance(lam, WeightVector) else WeightVector(lam).weights)
    g = np.asarray(grads, dtype=float)
    if g.shape != w.shape:
        raise ValueError("weights and gradients differ in length")
    if np.any(g <= 0):
        raise ValueError("gradients must be positive")
    return float(1.0 / np.sum(w / g))


def level_points(f, t):
    """Nodes with f >= t plus the linear crossings of level t on grid edges.

    The crossings put the hull within O(h^2) of a smooth level curve, where
    the node hull alone lags by a fraction of a cell.
    """
    v, P = f.values, f.coords()
    pts = [P[v >= t]]
    for axis in (0, 1):
        a = v[:-1, :] if axis == 0 else v[:, :-1]
        b = v[1:, :] if axis == 0 else v[:, 1:]
        pa = P[:-1, :] if axis == 0 else P[:, :-1]
        pb = P[1:, :] if axis == 0 else P[:, 1:]
        cut = np.isfinite(a) & np.isfinite(b) & ((a >= t) != (b >= t))
        w = (t - a[cut]) / (b[cut] - a[cut])
        pts.append(pa[cut] + w[:, None] * (pb[cut] - pa[cut]))
    return np.vstack(pts)


def _minkowski_polygon(P0, P1, lam):
    """(1-lam) P0 + lam P1 for ccw convex polygons, by merging edge directions."""
    A = (1.0 - lam) * np.asarray(P0, dtype=float)
    B = lam * np.asarray(P1, dtype=float)
    if len(A) < 3 or len(B) < 3:
        pts = (A[:, None, :] + B[None, :, :]).reshape(-1, 2)
        return convex_hull(pts)

    def start(P):
        k = np.lexsort((P[:, 0], P[:, 1]))[0]  # lowest, then leftmost
        return np.roll(P, -k, axis=0)

    A, B = start(A), start(B)
    eA = np.roll(A, -1, axis=0) - A
    eB = np.roll(B, -1, axis=0) - B
    # polar angles in [0, 2pi) measured from the lowest vertex are increasing
    ang = lambda e: np.mod(np.arctan2(e[:, 1], e[:, 0]), 2.0 * np.pi)
    edges = np.vstack([eA, eB])
    order = np.argsort(np.concatenate([ang(eA), ang(eB)]), kind="stable")
    pts = A[0] + B[0] + np.vstack([[0.0, 0.0], np.cumsum(edges[order], axis=0)[:-1]])
    return convex_hull(pts)


def is_quasiconcave(f, levels=DEFAULT_LEVELS):
    env = quasiconcave_envelope(f, levels)
    finite = np.isfinite(f.values)
    with np.errstate(invalid="ignore"):
        gap = np.max(np.where(finite, env.values - f.values, -np.inf))
    return bool(gap <= ladder_step(f, levels) * (1 + 1e-9))


def minkowski_combine_potentials(u0, u1, lam, levels=DEFAULT_LEVELS):
    """Function whose level-t set is (1-lam){u0 >= t} + lam{u1 >= t}.

    Output lives on u0's grid; both inputs share one threshold ladder.
    """
    if not u0.same_grid(u1):
        raise GridMismatch("potentials must share a grid")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    for name, u in (("u0", u0), ("u1", u1)):
        if not is_quasiconcave(u, levels):
            raise NotQuasiConcave(f"{name} is not quasi-concave to ladder resolution")
    lo = min(u0.finite_range()[0], u1.finite_range()[0])
    hi = max(u0.finite_range()[1], u1.finite_range()[1])
    ts = np.linspace(lo, hi, levels)
    polys = []
    for t in ts:
        if not ((u0.values >= t).any() and (u1.values >= t).any()):
            polys.append(None)
            continue
        P0 = convex_hull(level_points(u0, t))
        P1 = convex_hull(level_points(u1, t))
        polys.append(_minkowski_polygon(P0, P1, lam))
    return u0.with_values(_ladder_fill(u0, polys, ts))


@dataclass
class InclusionReport:
    margin: float
    worst_theta: float
    tol: float

    @property
    def holds(self):
        return self.margin >= -self.tol


def check_combination_inclusion(K0, K1, Klam, lam, tol=0.0):
    """Margin of (1-lam)K0 + lam K1 inside Klam, measured on support samples."""
    _same_grid(K0, K1, Klam)
    comb = (1.0 - lam) * K0.h + lam * K1.h
    d = Klam.h - comb
    k = int(np.argmin(d))
    return InclusionReport(float(d[k]), float(Klam.angles[k]), tol)


def hull_gradient_bound(K0, grad0, K1, grad1, match=2):
    """Upper bound for |Dv| on the boundary of conv(K0 u K1), per grid normal.

    Where one body alone supports the hull the bound is that body's gradient;
    on a bridging segment y = (1-l) x0 + l x1 it is the harmonic mean of the
    two gradients.  Normals are matched within ``match`` grid steps.
    """
    from .geometry import hull_of_union

    _same_grid(K0, K1)
    grad0 = np.asarray(grad0, dtype=float)
    grad1 = np.asarray(grad1, dtype=float)
    x0, x1 = K0.boundary_points(), K1.boundary_points()
    y = hull_of_union(K0, K1).boundary_points()
    tol = 1e-6 * max(K0.h.max(), K1.h.max())
    on0 = np.linalg.norm(y - x0, axis=1) <= tol
    on1 = np.linalg.norm(y - x1, axis=1) <= tol
    raw = np.where(on0, grad0, grad1)
    for i in np.flatnonzero(~on0 & ~on1):
        seg = x1[i] - x0[i]
        n2 = seg @ seg
        lam = 0.0 if n2 == 0 else float(np.clip((y[i] - x0[i]) @ seg / n2, 0.0, 1.0))
        raw[i] = harmonic_gradient((1 - lam, lam), (grad0[i], grad1[i]))
    out = raw.copy()
    for k in range(1, match + 1):
        out = np.maximum(out, np.maximum(np.roll(raw, k), np.roll(raw, -k)))
    return out


__all__ = [
    "GridFunction", "WeightVector", "superlevel_polygon", "quasiconcave_envelope",
    "maxmin_representation", "maxmin_triples", "harmonic_gradient", "minkowski_combine_potentials",
    "check_combination_inclusion", "hull_gradient_bound", "ladder_step", "is_quasiconcave",
    "points_in_hull",
]
