import json

import numpy as np
import pytest

from bernoulli.errors import BracketError, CollapseDetected, ConfigError
from bernoulli.freeboundary import (
    CONVERGED, MAX_ITERATIONS, NO_SOLUTION, SolverConfig, bernoulli_constant_numeric,
    check_subsolution, initial_guess, solve_interior_bernoulli, update_boundary,
)
from bernoulli.geometry import BoundaryConstraint, disk, ellipse, hausdorff_distance, polygon_body
from bernoulli.oracles import bernoulli_radii

FAST = dict(M=64, L=33)


@pytest.fixture(scope="module")
def disk_g3():
    cfg = SolverConfig(**FAST)
    return solve_interior_bernoulli(disk(1.0, M=64), BoundaryConstraint.constant(3.0), 2.0, cfg)


def test_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(damping=0.0)
    with pytest.raises(ConfigError):
        SolverConfig(M=63)
    with pytest.raises(ConfigError):
        SolverConfig(collapse_radius=0.9)
    with pytest.raises(ConfigError):
        SolverConfig.from_dict({"bogus": 1})
    cfg = SolverConfig(damping=0.7, M=128)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg


def test_grid_mismatch_is_config_error():
    with pytest.raises(ConfigError):
        solve_interior_bernoulli(disk(1.0, M=32), BoundaryConstraint.constant(3.0), 2.0, SolverConfig(**FAST))


def test_disk_converges_to_large_root(disk_g3):
    rep = disk_g3
    assert rep.status == CONVERGED
    assert rep.sup_residual <= 1e-2
    r = bernoulli_radii(2.0, 2, 1.0, 3.0)[-1]
    assert hausdorff_distance(rep.K, disk(r, M=64)) < 1e-2
    assert rep.K.is_convex()
    sups = [h["sup_residual"] for h in rep.history]
    assert sups[-1] < sups[0]


def test_report_files(disk_g3, tmp_path):
    disk_g3.write(tmp_path)
    summary = json.loads((tmp_path / "report.json").read_text())
    assert summary["status"] == CONVERGED
    assert summary["iterations"] == disk_g3.iterations
    assert (tmp_path / "boundary.csv").read_text().splitlines()[0] == "i,theta,h,x,y,grad,g,residual"
    assert (tmp_path / "residuals.csv").read_text().splitlines()[0] == "iter,sup_residual,inradius"
    assert (tmp_path / "field.csv").exists()


def test_below_threshold_is_nosolution():
    rep = solve_interior_bernoulli(disk(1.0, M=64), BoundaryConstraint.constant(2.0), 2.0, SolverConfig(**FAST))
    assert rep.status == NO_SOLUTION
    assert rep.diagnostics


def test_iteration_cap():
    rep = solve_interior_bernoulli(
        disk(1.0, M=64), BoundaryConstraint.constant(3.0), 2.0, SolverConfig(max_outer=2, **FAST))
    assert rep.status == MAX_ITERATIONS
    assert rep.iterations == 2


def test_ellipse_with_nonconstant_g():
    omega = ellipse(1.5, 1.0, M=64)
    g = BoundaryConstraint.fourier(4.0, [(2, 0.3, 0.0)])
    rep = solve_interior_bernoulli(omega, g, 2.0, SolverConfig(**FAST))
    assert rep.status == CONVERGED
    assert rep.K.is_convex()
    assert np.all(rep.K.h < omega.h)


def test_p3_disk_matches_radial_root():
    rep = solve_interior_bernoulli(disk(1.0, M=64), BoundaryConstraint.constant(4.0), 3.0, SolverConfig(**FAST))
    assert rep.status == CONVERGED
    r = bernoulli_radii(3.0, 2, 1.0, 4.0)[-1]
    assert abs(rep.K.h.mean() - r) < 1e-2


def test_update_boundary_direction():
    K = disk(0.5, M=64)
    g = BoundaryConstraint.constant(3.0)
    gap = np.full(64, 0.5)
    grown = update_boundary(K, np.full(64, 2.0), g, 0.5, gap)
    shrunk = update_boundary(K, np.full(64, 4.0), g, 0.5, gap)
    assert np.all(grown.h > K.h) and np.all(shrunk.h < K.h)
    same = update_boundary(K, np.full(64, 3.0), g, 0.5, gap, smoothing=0.1)
    assert np.allclose(same.h, K.h)


def test_update_boundary_collapse():
    K = disk(0.01, M=64)
    with pytest.raises(CollapseDetected):
        update_boundary(K, np.full(64, 1e6), BoundaryConstraint.constant(1.0), 1.0, np.full(64, 1.0))


def test_initial_guess_is_similar():
    cfg = SolverConfig(shrink0=0.1, collapse_radius=0.02, **FAST)
    K = initial_guess(ellipse(2.0, 1.0, (0.1, 0.0), M=64), cfg)
    assert np.allclose(K.h, ellipse(0.2, 0.1, (0.1, 0.0), M=64).h)


def test_constant_g_on_disk_is_round(disk_g3):
    h = disk_g3.K.h
    assert np.ptp(h) <= 1e-3 * h.mean()


def test_rotation_equivariance():
    cfg = SolverConfig(**FAST)
    g = BoundaryConstraint.fourier(4.0, [(1, 0.5, 0.0)])
    a = solve_interior_bernoulli(disk(1.0, M=64), g, 2.0, cfg)
    b = solve_interior_bernoulli(disk(1.0, M=64), g.rotated(16, 64), 2.0, cfg)
    assert a.converged and b.converged
    tol = 2 * max(a.mesh_tolerance, b.mesh_tolerance)
    assert np.abs(np.roll(a.K.h, 16) - b.K.h).max() <= tol


def test_certificate_is_recomputed(disk_g3):
    rep = disk_g3
    assert np.allclose(rep.residual, rep.grad - 3.0)
    again = check_subsolution(rep.omega, rep.K, BoundaryConstraint.constant(3.0), 2.0,
                              rep.config.tol_residual, L=rep.config.L, gap_min=0.0)
    assert np.allclose(again.grad, rep.grad, rtol=1e-6)
    assert again.passed


def test_square_domain_is_accepted():
    sq = polygon_body([(-1, -1), (1, -1), (1, 1), (-1, 1)], 64)
    rep = solve_interior_bernoulli(sq, BoundaryConstraint.constant(4.0), 2.0, SolverConfig(**FAST))
    assert rep.status == CONVERGED
    assert rep.K.is_convex()
    # the inner body of a smooth-enough solution has no corner nodes
    assert not any(d["event"] == "CornerNodes" for d in rep.diagnostics)


def test_subsolution_radial_margins():
    omega, K = disk(1.0, M=64), disk(0.5, M=64)
    rep = check_subsolution(omega, K, BoundaryConstraint.constant(3.0), 2.0, 1e-3, L=33)
    assert rep.passed and rep.worst_margin == pytest.approx(3 - 2.8854, abs=2e-3)
    rep = check_subsolution(omega, K, BoundaryConstraint.constant(2.5), 2.0, 1e-3, L=33)
    assert not rep.passed and np.all(rep.margins < 0)


def test_subsolution_check():
    omega, K = disk(1.0, M=64), disk(0.6, M=64)
    # radial gradient at r = 0.6 is 1/(0.6 ln(1/0.6)) ~ 3.26
    assert check_subsolution(omega, K, BoundaryConstraint.constant(3.5), 2.0, 1e-3, L=33).passed
    rep = check_subsolution(omega, K, BoundaryConstraint.constant(3.0), 2.0, 1e-3, L=33)
    assert not rep.passed and rep.worst_margin == pytest.approx(-0.2627, abs=5e-3)


def test_lambda_of_ellipse_between_ball_bounds():
    est = bernoulli_constant_numeric(ellipse(1.5, 1.0, M=64), 2.0, SolverConfig(**FAST))
    assert np.e / 1.5 <= est.value <= np.e
    lo, hi = est.bracket
    assert hi - lo <= 1e-2 * lo
    assert [tau for tau, _ in est.probes][:2] == sorted([tau for tau, _ in est.probes][:2])


def test_lambda_bracket_error():
    with pytest.raises(BracketError):
        bernoulli_constant_numeric(disk(1.0, M=64), 2.0, SolverConfig(**FAST), widen=-0.5)
