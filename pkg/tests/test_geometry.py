import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bernoulli.errors import DegenerateBody, GridMismatch, InvalidConstraint
from bernoulli.geometry import (
    BoundaryConstraint, ConvexBody, Direction, angle_grid, body_from_support, boundary_point,
    convex_hull, curvature_radius, disk, ellipse, harmonic_mean_constraint, hausdorff_distance,
    hull_of_union, minkowski_combine, polygon_area, polygon_body, support_fourier,
)

M = 64


def test_disk_basics():
    K = disk(2.0, (0.3, -0.1), M)
    assert K.is_convex()
    assert np.allclose(K.steiner_point(), [0.3, -0.1])
    assert K.diameter() == pytest.approx(4.0)
    assert K.inradius() == pytest.approx(2.0, rel=1e-9)
    assert np.allclose(np.linalg.norm(K.boundary_points() - [0.3, -0.1], axis=1), 2.0)
    assert curvature_radius(disk(1.0, M=M), 5) == pytest.approx(1.0, rel=1e-3)


def test_ellipse_extent():
    E = ellipse(2.0, 1.0, M=M)
    assert E.h[0] == pytest.approx(2.0)
    assert E.h[M // 4] == pytest.approx(1.0)
    assert E.inradius() == pytest.approx(1.0, rel=1e-3)
    R = ellipse(2.0, 1.0, rotation=np.pi / 2, M=M)
    assert R.h[0] == pytest.approx(1.0)


def test_rejects_nonconvex_and_nonpositive():
    h = np.ones(M)
    h[3] = 0.5
    with pytest.raises(DegenerateBody):
        ConvexBody(h)
    with pytest.raises(DegenerateBody):
        ConvexBody(-np.ones(M))
    with pytest.raises(ValueError):
        ConvexBody(np.ones(15))


def test_body_from_support_repairs_dent():
    h = np.ones(M)
    h[3] = 0.5
    K = body_from_support(h)
    assert K.is_convex()
    assert np.all(K.h >= h - 1e-12)
    assert K.h[3] < 1.0


def test_body_from_support_keeps_cone_input():
    K = disk(1.0, M=M)
    assert np.array_equal(body_from_support(K.h).h, K.h)


def test_body_from_support_recenters():
    t = angle_grid(M)
    h = 0.2 + 1.0 * np.cos(t)  # disk of radius 0.2 centred at (1, 0)
    K = body_from_support(h)
    assert K.h.min() > 0
    assert np.allclose(K.h, 0.2, atol=1e-9)


def test_body_from_support_degenerate():
    t = angle_grid(M)
    with pytest.raises(DegenerateBody):
        body_from_support(np.abs(np.cos(t)))  # a segment
    with pytest.raises(DegenerateBody):
        body_from_support(np.full(M, np.nan))
    with pytest.raises(DegenerateBody):
        body_from_support(np.full(M, -0.5))  # would hull to the mirrored disk


def test_polygon_body_square():
    sq = polygon_body([(-1, -1), (1, -1), (1, 1), (-1, 1)], M)
    assert sq.h[0] == pytest.approx(1.0)
    assert sq.h[M // 8] == pytest.approx(math.sqrt(2.0))
    assert sq.inradius() == pytest.approx(1.0, rel=1e-9)


def test_convex_hull_drops_interior_and_collinear():
    pts = np.array([[0, 0], [1, 0], [2, 0], [2, 2], [0, 2], [1, 1]], float)
    hull = convex_hull(pts)
    assert len(hull) == 4
    assert polygon_area(hull) == pytest.approx(4.0)


def test_boundary_point_forms():
    K = disk(1.0, M=M)
    assert np.allclose(boundary_point(K, 0), [1.0, 0.0])
    assert np.allclose(boundary_point(K, Direction(np.pi / 2)), [0.0, 1.0], atol=1e-12)
    q = boundary_point(K, 0.05)
    assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-3)


def test_minkowski_endpoints_and_affinity():
    A = disk(1.0, M=M)
    B = ellipse(2.0, 0.5, M=M)
    assert minkowski_combine(A, B, 0.0) is A
    assert minkowski_combine(A, B, 1.0) is B
    C = minkowski_combine(A, B, 0.25)
    assert np.allclose(C.h, 0.75 * A.h + 0.25 * B.h)
    with pytest.raises(GridMismatch):
        minkowski_combine(A, disk(1.0, M=32), 0.5)
    with pytest.raises(ValueError):
        minkowski_combine(A, B, 1.5)


def test_hull_and_hausdorff():
    A = disk(1.0, (-0.5, 0.0), M)
    B = disk(1.0, (0.5, 0.0), M)
    H = hull_of_union(A, B)
    assert H.is_convex()
    assert H.h[0] == pytest.approx(1.5)
    assert hausdorff_distance(A, B) == pytest.approx(1.0)
    assert hausdorff_distance(disk(1.0, M=M), disk(1.2, M=M)) == pytest.approx(0.2)


def test_csv_round_trip(tmp_path):
    K = ellipse(1.5, 0.7, (0.1, 0.2), 0.3, M)
    K.to_csv(tmp_path / "body.csv")
    assert np.array_equal(ConvexBody.from_csv(tmp_path / "body.csv").h, K.h)
    header = (tmp_path / "body.csv").read_text().splitlines()[0]
    assert header == "i,theta,h,x,y"


def test_translate_and_scale():
    K = ellipse(1.5, 0.7, M=M)
    T = K.translate((0.2, 0.1))
    assert np.allclose(T.steiner_point(), K.steiner_point() + [0.2, 0.1])
    S = K.scale(0.5)
    assert np.allclose(S.h, 0.5 * K.h)


def test_constraint_kinds():
    c = BoundaryConstraint.constant(3.0)
    assert c(1.234) == 3.0 and c.c == c.C == 3.0
    f = BoundaryConstraint.fourier(4.0, [(1, 0.5, 0.0)])
    assert f(0.0) == pytest.approx(4.5)
    assert f.c == pytest.approx(3.5) and f.C == pytest.approx(4.5)
    s = BoundaryConstraint.from_samples([1.0, 2.0, 3.0, 4.0])
    assert s(np.pi / 4) == pytest.approx(1.5)
    assert s(2 * np.pi - 1e-12) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InvalidConstraint):
        BoundaryConstraint.constant(0.0)
    with pytest.raises(InvalidConstraint):
        BoundaryConstraint.fourier(0.5, [(1, 1.0, 0.0)])
    with pytest.raises(InvalidConstraint):
        BoundaryConstraint("bogus")


def test_constraint_rotation_and_csv(tmp_path):
    f = BoundaryConstraint.fourier(4.0, [(1, 0.5, 0.0)])
    r = f.rotated(3, M)
    assert np.allclose(r.on_grid(M), np.roll(f.on_grid(M), 3))
    f.to_csv(tmp_path / "g.csv", M)
    assert (tmp_path / "g.csv").read_text().splitlines()[0] == "i,theta,g"


def test_harmonic_mean_constraint():
    g0 = BoundaryConstraint.constant(4.0)
    g1 = BoundaryConstraint.constant(6.0)
    assert harmonic_mean_constraint(g0, g1, 0.0) is g0
    assert harmonic_mean_constraint(g0, g1, 1.0) is g1
    assert np.allclose(harmonic_mean_constraint(g0, g1, 0.5, M).on_grid(M), 4.8)


# property tests ------------------------------------------------------------

bodies = st.builds(
    lambda a, b, rot, cx, cy: ellipse(a, b, (cx, cy), rot, M),
    st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.floats(0.0, np.pi),
    st.floats(-0.2, 0.2), st.floats(-0.2, 0.2),
)


@settings(max_examples=40, deadline=None)
@given(bodies, bodies, st.floats(0.0, 1.0))
def test_minkowski_is_convex_and_interpolates(A, B, lam):
    C = minkowski_combine(A, B, lam)
    assert C.is_convex()
    assert hausdorff_distance(C, A) <= lam * hausdorff_distance(A, B) + 1e-12


@settings(max_examples=40, deadline=None)
@given(bodies, st.lists(st.floats(-0.3, 0.3), min_size=M, max_size=M))
def test_convexify_is_idempotent_and_dominates(K, noise):
    h = K.h * (1.0 + 0.2 * np.asarray(noise))
    C = body_from_support(h)
    assert C.is_convex()
    again = body_from_support(C.h)
    assert np.allclose(again.h, C.h, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(bodies, bodies, bodies)
def test_hausdorff_triangle(A, B, C):
    assert hausdorff_distance(A, C) <= hausdorff_distance(A, B) + hausdorff_distance(B, C) + 1e-12


@settings(max_examples=30, deadline=None)
@given(bodies)
def test_boundary_points_are_on_support_lines(K):
    pts = K.boundary_points()
    proj = np.sum(pts * K.normals, axis=1)
    assert np.allclose(proj, K.h)


def test_boundary_points_converge_to_the_curve():
    # centred h' gives second-order accurate boundary points
    errs = []
    for m in (64, 128, 256):
        pts = ellipse(2.0, 0.5, M=m).boundary_points()
        errs.append(np.abs((pts[:, 0] / 2.0) ** 2 + (pts[:, 1] / 0.5) ** 2 - 1.0).max())
    assert errs[2] < 1e-2
    assert errs[1] / errs[2] > 3.5 and errs[0] / errs[1] > 3.5
