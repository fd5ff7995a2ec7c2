"""Command line front end.

Problems are described by a JSON document::

    {"p": 2.0,
     "omega": {"kind": "disk", "radius": 1.0},
     "g": {"kind": "constant", "value": 3.0},
     "solver": {"M": 256, "L": 65},
     "output": "out",
     "seed": 0}

Only ``p``, ``omega`` and ``g`` are required.  Unknown keys are errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import geometry, oracles
from .envelope import (
    GridFunction, is_quasiconcave, ladder_step, quasiconcave_envelope, check_combination_inclusion,
)
from .errors import BernoulliError, BracketError, ConfigError
from .freeboundary import (
    CONVERGED, MAX_ITERATIONS, NO_SOLUTION, SolverConfig, bernoulli_constant_numeric,
    solve_interior_bernoulli,
)

log = logging.getLogger("bernoulli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_SOLUTION = 2
EXIT_MAX_ITER = 3
EXIT_BRACKET = 4

STATUS_EXIT = {CONVERGED: EXIT_OK, NO_SOLUTION: EXIT_NO_SOLUTION, MAX_ITERATIONS: EXIT_MAX_ITER}

# column layouts of every CSV the package writes
CSV_SCHEMAS = {
    "boundary.csv": ["i", "theta", "h", "x", "y", "grad", "g", "residual"],
    "residuals.csv": ["iter", "sup_residual", "inradius"],
    "field.csv": ["i", "j", "theta", "s", "x", "y", "u"],
    "history.csv": ["outer_iter", "picard_update_norm", "linear_iters"],
    "sweep.csv": ["R", "inradius", "inradius_over_R", "status"],
    "envelope.csv": ["ix", "iy", "x", "y", "value"],
    "body.csv": ["i", "theta", "h", "x", "y"],
    "constraint.csv": ["i", "theta", "g"],
}

OMEGA_KEYS = {
    "disk": {"radius": 1.0, "center": [0.0, 0.0]},
    "ellipse": {"a": None, "b": None, "center": [0.0, 0.0], "rotation": 0.0},
    "support_fourier": {"a0": None, "terms": []},
    "support_samples": {"values": None},
}
G_KEYS = {
    "constant": {"value": None},
    "fourier": {"a0": None, "terms": []},
    "samples": {"values": None},
}
TOP_KEYS = ("p", "omega", "g", "solver", "output", "seed")


# --- configuration --------------------------------------------------------

def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where} must be finite")
    return value


def _vector(value, where, length=None):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{where} must be a list")
    out = [_number(v, f"{where}[{k}]") for k, v in enumerate(value)]
    if length is not None and len(out) != length:
        raise ConfigError(f"{where} must have {length} entries")
    return out


def _terms(value, where):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{where} must be a list of [k, a_k, b_k]")
    out = []
    for n, t in enumerate(value):
        k, a, b = _vector(t, f"{where}[{n}]", 3)
        if k != int(k) or k < 1:
            raise ConfigError(f"{where}[{n}] frequency must be a positive integer")
        out.append([int(k), a, b])
    return out


def _shape_spec(spec, table, name):
    if not isinstance(spec, dict):
        raise ConfigError(f"'{name}' must be an object")
    if "kind" not in spec:
        raise ConfigError(f"missing key '{name}.kind'")
    kind = spec["kind"]
    if kind not in table:
        raise ConfigError(f"'{name}.kind' must be one of {sorted(table)} (got {kind!r})")
    allowed = table[kind]
    extra = set(spec) - set(allowed) - {"kind"}
    if extra:
        raise ConfigError(f"unknown keys in '{name}': {sorted(extra)}")
    out = {"kind": kind}
    for key, default in allowed.items():
        where = f"{name}.{key}"
        if key not in spec:
            if default is None:
                raise ConfigError(f"missing key '{where}'")
            value = default
        else:
            value = spec[key]
        if key == "terms":
            out[key] = _terms(value, where)
        elif key == "center":
            out[key] = _vector(value, where, 2)
        elif key == "values":
            out[key] = _vector(value, where)
            if len(out[key]) < 2:
                raise ConfigError(f"'{where}' needs at least two samples")
        else:
            out[key] = _number(value, where)
    return out


@dataclass
class ProblemConfig:
    p: float
    omega: dict
    g: dict
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: str = "out"
    seed: int = 0

    @classmethod
    def parse(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(data) - set(TOP_KEYS)
        if extra:
            raise ConfigError(f"unknown keys: {sorted(extra)}")
        for key in ("p", "omega", "g"):
            if key not in data:
                raise ConfigError(f"missing key '{key}'")
        p = _number(data["p"], "p")
        if p <= 1:
            raise ConfigError("'p' must exceed 1")
        omega = _shape_spec(data["omega"], OMEGA_KEYS, "omega")
        g = _shape_spec(data["g"], G_KEYS, "g")
        solver = data.get("solver", {})
        if not isinstance(solver, dict):
            raise ConfigError("'solver' must be an object")
        try:
            solver = SolverConfig.from_dict(solver)
        except TypeError as exc:
            raise ConfigError(f"invalid solver block: {exc}") from None
        output = data.get("output", "out")
        if not isinstance(output, str) or not output:
            raise ConfigError("'output' must be a non-empty string")
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("'seed' must be a non-negative integer")
        cfg = cls(p, omega, g, solver, output, seed)
        cfg.build()
        return cfg

    def serialize(self):
        return {
            "p": self.p,
            "omega": self.omega,
            "g": self.g,
            "solver": self.solver.to_dict(),
            "output": self.output,
            "seed": self.seed,
        }

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        return cls.parse(data)

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.serialize(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def build_omega(self):
        o, M = self.omega, self.solver.M
        try:
            if o["kind"] == "disk":
                if o["radius"] <= 0:
                    raise ConfigError("'omega.radius' must be positive")
                return geometry.disk(o["radius"], tuple(o["center"]), M)
            if o["kind"] == "ellipse":
                if o["a"] <= 0 or o["b"] <= 0:
                    raise ConfigError("ellipse semi-axes must be positive")
                return geometry.ellipse(o["a"], o["b"], tuple(o["center"]), o["rotation"], M)
            if o["kind"] == "support_fourier":
                return geometry.support_fourier(o["a0"], [tuple(t) for t in o["terms"]], M)
            values = np.asarray(o["values"])
            if values.size != M:
                raise ConfigError(f"'omega.values' has {values.size} samples, solver.M is {M}")
            return geometry.body_from_support(values)
        except ConfigError:
            raise
        except BernoulliError as exc:
            raise ConfigError(f"invalid omega: {exc}") from None

    def build_g(self):
        g = self.g
        try:
            if g["kind"] == "constant":
                return geometry.BoundaryConstraint.constant(g["value"])
            if g["kind"] == "fourier":
                return geometry.BoundaryConstraint.fourier(g["a0"], [tuple(t) for t in g["terms"]])
            return geometry.BoundaryConstraint.from_samples(g["values"])
        except BernoulliError as exc:
            raise ConfigError(f"invalid g: {exc}") from None

    def build(self):
        return self.build_omega(), self.build_g()


# --- output helpers -------------------------------------------------------

def _use_color(stream):
    return "NO_COLOR" not in os.environ and hasattr(stream, "isatty") and stream.isatty()


def _error(msg):
    prefix = "\033[31merror:\033[0m" if _use_color(sys.stderr) else "error:"
    print(f"{prefix} {msg}", file=sys.stderr)


def _note(msg):
    print(msg, file=sys.stderr)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _solve(cfg, omega=None, g=None):
    if omega is None:
        omega, g = cfg.build()
    return solve_interior_bernoulli(omega, g, cfg.p, cfg.solver)


# --- subcommands ----------------------------------------------------------

def cmd_solve(args):
    cfg = ProblemConfig.load(args.config)
    outdir = args.output or cfg.output
    report = _solve(cfg)
    report.write(outdir)
    _note(f"{report.status} after {report.iterations} iterations, "
          f"sup residual {report.sup_residual:.3g}, inradius {report.K.inradius():.6g} -> {outdir}")
    return STATUS_EXIT[report.status]


def cmd_lambda(args):
    cfg = ProblemConfig.load(args.config)
    if args.numeric:
        omega = cfg.build_omega()
        try:
            est = bernoulli_constant_numeric(omega, cfg.p, cfg.solver, rtol=args.rtol)
        except BracketError as exc:
            _error(str(exc))
            return EXIT_BRACKET
        out = {"lambda": est.value, "method": "numeric", "bracket": list(est.bracket)}
    else:
        if cfg.omega["kind"] != "disk":
            raise ConfigError("--ball needs a disk domain (omega.kind = 'disk')")
        lam = oracles.bernoulli_constant_ball(cfg.p, 2, cfg.omega["radius"])
        out = {"lambda": lam, "method": "ball", "bracket": [lam, lam]}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_radii(args):
    radii = oracles.bernoulli_radii(args.p, args.N, args.R, args.tau)
    out = {
        "lambda": oracles.bernoulli_constant_ball(args.p, args.N, args.R),
        "radii": list(radii),
        "maximal": radii[-1] if radii else None,
    }
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_combine(args):
    cfg0 = ProblemConfig.load(args.config0)
    cfg1 = ProblemConfig.load(args.config1)
    lam = args.lam
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("--lambda must lie in [0, 1]")
    if cfg0.p != cfg1.p:
        raise ConfigError(f"configs disagree on p ({cfg0.p} vs {cfg1.p})")
    if (cfg0.solver.M, cfg0.solver.L) != (cfg1.solver.M, cfg1.solver.L):
        raise ConfigError("configs disagree on the grid sizes M, L")
    outdir = args.output or cfg0.output
    os.makedirs(outdir, exist_ok=True)

    omega0, g0 = cfg0.build()
    omega1, g1 = cfg1.build()
    reports = {}
    for name, cfg, omega, g in (("leg0", cfg0, omega0, g0), ("leg1", cfg1, omega1, g1)):
        rep = _solve(cfg, omega, g)
        rep.write(os.path.join(outdir, name))
        reports[name] = rep
        if not rep.converged:
            _error(f"{name} ({cfg.omega['kind']}, g {cfg.g['kind']}) ended with {rep.status}")
            return EXIT_NO_SOLUTION
    omega_l = geometry.minkowski_combine(omega0, omega1, lam)
    g_l = geometry.harmonic_mean_constraint(g0, g1, lam, cfg0.solver.M)
    rep = solve_interior_bernoulli(omega_l, g_l, cfg0.p, cfg0.solver)
    rep.write(os.path.join(outdir, "combined"))
    reports["combined"] = rep
    if not rep.converged:
        _error(f"combined problem ended with {rep.status}")
        return EXIT_NO_SOLUTION

    tol = 2.0 * max(r.mesh_tolerance for r in reports.values())
    inc = check_combination_inclusion(reports["leg0"].K, reports["leg1"].K, rep.K, lam, tol)
    out = {
        "lambda": lam,
        "inclusion_margin": inc.margin,
        "inclusion_tolerance": tol,
        "inclusion_holds": inc.holds,
        "worst_theta": inc.worst_theta,
        "reports": {k: r.summary() for k, r in reports.items()},
    }
    _write_json(os.path.join(outdir, "combined.json"), out)
    _note(f"inclusion margin {inc.margin:.3g} (tolerance {tol:.3g}) -> {outdir}")
    return EXIT_OK


def cmd_sweep_R(args):
    cfg = ProblemConfig.load(args.config)
    if cfg.omega["kind"] != "disk":
        raise ConfigError("sweep-R needs a disk domain (omega.kind = 'disk')")
    try:
        radii = [float(r) for r in args.radii.split(",")]
    except ValueError:
        raise ConfigError(f"--radii must be a comma separated list of numbers (got {args.radii!r})") from None
    if not radii or min(radii) <= 0:
        raise ConfigError("--radii must be positive")
    outdir = args.output or cfg.output
    os.makedirs(outdir, exist_ok=True)
    g = cfg.build_g()
    rows = []
    for R in radii:
        omega = geometry.disk(R, tuple(cfg.omega["center"]), cfg.solver.M)
        try:
            rep = solve_interior_bernoulli(omega, g, cfg.p, cfg.solver)
        except BernoulliError as exc:
            log.warning("R=%g failed: %s", R, exc)
            rows.append((R, math.nan, "Error"))
            continue
        if args.keep:
            rep.write(os.path.join(outdir, f"R_{R:g}"))
        r_in = rep.K.inradius() if rep.converged else math.nan
        rows.append((R, r_in, rep.status))
        _note(f"R={R:g}: {rep.status}, inradius {r_in:.6g}")
    with open(os.path.join(outdir, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_SCHEMAS["sweep.csv"])
        for R, r_in, status in rows:
            w.writerow([repr(R), repr(r_in), repr(r_in / R), status])
    return EXIT_OK


def grid_from_fields(paths, n=101):
    """Resample ring potentials (field.csv) onto one Cartesian grid, taking the max.

    Nodes inside the inner body get the inner value, nodes outside every
    ring are marked -inf.
    """
    from scipy.interpolate import griddata

    data = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_SCHEMAS["field.csv"]:
                raise ValueError(f"{path}: unexpected header {header}")
            rows = np.array([[float(v) for v in row] for row in reader])
        if rows.size == 0:
            raise ValueError(f"{path}: no data rows")
        data.append(rows)
    allxy = np.vstack([d[:, 4:6] for d in data])
    lo, hi = allxy.min(axis=0), allxy.max(axis=0)
    x = np.linspace(lo[0], hi[0], n)
    y = np.linspace(lo[1], hi[1], n)
    X, Y = np.meshgrid(x, y, indexing="ij")
    P = np.stack([X, Y], axis=-1)
    out = np.full((n, n), -np.inf)
    tol = 1e-12 * float(np.max(hi - lo))
    from .envelope import points_in_hull

    for d in data:
        xy, u = d[:, 4:6], d[:, 6]
        inner = d[:, 1] == 0
        outer = d[:, 1] == d[:, 1].max()
        vals = griddata(xy, u, (X, Y), method="linear")
        in_omega = points_in_hull(geometry.convex_hull(xy[outer]), P, tol)
        in_K = points_in_hull(geometry.convex_hull(xy[inner]), P, tol)
        vals = np.where(np.isnan(vals), 0.0, np.clip(vals, u.min(), u.max()))
        vals[in_K] = u[inner].max()
        vals[~in_omega] = -np.inf
        out = np.maximum(out, vals)
    return GridFunction((x[0], y[0]), (x[1] - x[0], y[1] - y[0]), out)


def _load_grid(paths, n):
    with open(paths[0], newline="") as fh:
        header = next(csv.reader(fh), None)
    if header == CSV_SCHEMAS["envelope.csv"]:
        if len(paths) > 1:
            raise ValueError("grid files cannot be combined; pass a single file")
        return GridFunction.from_csv(paths[0])
    return grid_from_fields(paths, n)


def envelope_report(f, levels):
    env = quasiconcave_envelope(f, levels)
    step = ladder_step(f, levels)
    finite = np.isfinite(f.values)
    again = quasiconcave_envelope(env, levels)
    both = np.isfinite(env.values) & np.isfinite(again.values)
    with np.errstate(invalid="ignore"):
        diff = np.where(finite, env.values - f.values, np.inf)
        excess = float(np.max(np.where(finite, env.values - f.values, -np.inf)))
        idem = float(np.max(np.abs(again.values - env.values)[both])) if both.any() else 0.0
    idem_ok = bool(np.array_equal(np.isfinite(env.values), np.isfinite(again.values))
                   and idem <= ladder_step(env, levels) * (1 + 1e-9))
    report = {
        "levels": levels,
        "ladder_step": step,
        "dominance": {"min_gap": float(diff.min()), "passed": bool(diff.min() >= -step * (1 + 1e-9))},
        "idempotence": {"max_change": idem, "passed": idem_ok},
        "convex_superlevels": {"passed": is_quasiconcave(env, levels)},
        "already_quasiconcave": bool(excess <= step * (1 + 1e-9)),
        "max_excess": excess,
    }
    return env, report


def cmd_envelope(args):
    if args.levels < 2:
        raise ConfigError("--levels must be at least 2")
    try:
        f = _load_grid(args.fields, args.grid)
    except (OSError, ValueError, StopIteration) as exc:
        _error(f"cannot parse input: {exc}")
        return EXIT_CONFIG
    env, report = envelope_report(f, args.levels)
    outdir = args.output
    os.makedirs(outdir, exist_ok=True)
    if len(args.fields) > 1 or os.path.basename(args.fields[0]) != "envelope.csv":
        f.to_csv(os.path.join(outdir, "input_grid.csv"))
    env.to_csv(os.path.join(outdir, "envelope.csv"))
    _write_json(os.path.join(outdir, "envelope_report.json"), report)
    passed = all(report[k]["passed"] for k in ("dominance", "idempotence", "convex_superlevels"))
    _note(f"envelope checks {'passed' if passed else 'FAILED'} -> {outdir}")
    return EXIT_OK


def cmd_validate(args):
    cfg = ProblemConfig.load(args.config)
    omega, g = cfg.build()
    _note(f"ok: p={cfg.p}, omega {cfg.omega['kind']} (inradius {omega.inradius():.6g}), "
          f"g {cfg.g['kind']} in [{g.c:.6g}, {g.C:.6g}]")
    return EXIT_OK


def check_csv(path, schema=None):
    """Return None when the header of ``path`` matches its schema, else a message."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if schema is None:
        base = os.path.basename(path)
        expected = CSV_SCHEMAS.get(base)
        if expected is None:
            if header in CSV_SCHEMAS.values():
                return None
            return f"{path}: header {header} matches no known schema"
    else:
        expected = CSV_SCHEMAS[schema]
    if header != expected:
        return f"{path}: header {header}, expected {expected}"
    return None


def cmd_check_csv(args):
    bad = 0
    for path in args.files:
        try:
            msg = check_csv(path, args.schema)
        except OSError as exc:
            msg = f"{path}: {exc.strerror}"
        if msg:
            _error(msg)
            bad += 1
        else:
            _note(f"ok: {path}")
    return EXIT_CONFIG if bad else EXIT_OK


# --- entry point ----------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="bernoulli", description="Interior Bernoulli free boundary solver.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve one problem")
    sp.add_argument("config")
    sp.add_argument("-o", "--output", help="output directory (default: config 'output')")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("lambda", help="Bernoulli constant of the domain")
    sp.add_argument("config")
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--ball", action="store_true", help="closed form for disks (default)")
    mode.add_argument("--numeric", action="store_true", help="bisection over constant g")
    sp.add_argument("--rtol", type=float, default=1e-2, help="relative bracket width for --numeric")
    sp.set_defaults(func=cmd_lambda)

    sp = sub.add_parser("radii", help="radial solutions on a ball")
    sp.add_argument("p", type=float)
    sp.add_argument("N", type=int)
    sp.add_argument("R", type=float)
    sp.add_argument("tau", type=float)
    sp.set_defaults(func=cmd_radii)

    sp = sub.add_parser("combine", help="Minkowski combination of two problems")
    sp.add_argument("config0")
    sp.add_argument("config1")
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_combine)

    sp = sub.add_parser("sweep-R", help="solve on disks of several radii")
    sp.add_argument("config")
    sp.add_argument("--radii", required=True, help="comma separated radii")
    sp.add_argument("-o", "--output")
    sp.add_argument("--keep", action="store_true", help="also write each solve's output")
    sp.set_defaults(func=cmd_sweep_R)

    sp = sub.add_parser("envelope", help="quasi-concave envelope of a grid function")
    sp.add_argument("fields", nargs="+", help="grid CSV, or one or more field.csv files (max is taken)")
    sp.add_argument("--levels", type=int, default=64)
    sp.add_argument("--grid", type=int, default=101, help="resampling resolution for field.csv input")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_envelope)

    sp = sub.add_parser("validate", help="check a config without solving")
    sp.add_argument("config")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("check-csv", help="verify CSV headers against the known schemas")
    sp.add_argument("files", nargs="+")
    sp.add_argument("--schema", choices=sorted(CSV_SCHEMAS), help="force a schema instead of matching by name")
    sp.set_defaults(func=cmd_check_csv)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        _error(str(exc))
        return EXIT_CONFIG
    except (BernoulliError, ValueError) as exc:
        _error(f"{type(exc).__name__}: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
