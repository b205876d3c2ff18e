"""Command-line front end.

Subcommands: ``distance``, ``geodesic``, ``spline``, ``experiment`` and
``verify``.  Exit codes: 0 success, 1 bad input, 2 solver did not converge,
3 geometry failure, 4 a verification check failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .cone import ConePoint, geodesic_arrays
from .errors import (BlowUpError, CascadeDomainError, DomainError, InfeasibleVelocityError,
                     VertexError, WFRError)
from .measures import measure_to_csv, read_measure, write_measure
from .pipeline import SolverConfig, run_pipeline, solve_plans
from .presets import PRESETS, preset
from .uot import solve_entropic, wfr_distance
from .verification import CHECKS, run_checks

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_GEOMETRY, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("wfrspline")

_GEOMETRY_ERRORS = (DomainError, CascadeDomainError, InfeasibleVelocityError, VertexError,
                    BlowUpError)

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["version", "times", "sample_times", "config", "segments", "scales", "mass",
                 "curvature", "n_particles", "converged"],
    "additionalProperties": False,
    "properties": {
        "version": {"type": "string"},
        "times": {"type": "array", "items": _NUM, "minItems": 2},
        "sample_times": {"type": "integer", "minimum": 1},
        "config": {"type": "object"},
        "converged": {"type": "boolean"},
        "n_particles": {"type": "integer", "minimum": 0},
        "segments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "t_start", "t_end", "wfr_distance", "solver"],
                "additionalProperties": False,
                "properties": {
                    "index": {"type": "integer"},
                    "t_start": _NUM, "t_end": _NUM,
                    "wfr_distance": {"type": "number", "minimum": 0},
                    "solver": {
                        "type": "object",
                        "required": ["epsilon", "iterations", "residual", "converged",
                                     "objective", "plan_mass"],
                        "additionalProperties": False,
                        "properties": {
                            "epsilon": _NUM, "iterations": {"type": "integer"},
                            "residual": _NUM, "converged": {"type": "boolean"},
                            "objective": _NUM, "plan_mass": _NUM,
                        },
                    },
                },
            },
        },
        "scales": {
            "type": "object",
            "required": ["space_scale", "time_scale", "margin"],
            "additionalProperties": False,
            "properties": {"space_scale": _NUM, "time_scale": _NUM, "margin": _NUM},
        },
        "mass": {
            "type": "object",
            "required": ["input", "knots", "dropped"],
            "additionalProperties": False,
            "properties": {
                "input": {"type": "array", "items": _NUM},
                "knots": {"type": "array", "items": _NUM},
                "dropped": _NUM,
            },
        },
        "curvature": {
            "type": "object",
            "required": ["aggregate", "max_per_trajectory"],
            "additionalProperties": False,
            "properties": {"aggregate": _NUM, "max_per_trajectory": _NUM},
        },
    },
}


class InputError(Exception):
    """Invalid command-line input (exit code 1)."""


@dataclass
class RunConfig:
    """Everything a ``spline`` or ``experiment`` run needs."""

    measures: list = field(default_factory=list)
    times: list | None = None
    epsilon: float | None = None
    max_iters: int = 10_000
    tol: float = 1e-9
    samples_per_segment: int = 40
    space_scale: float | None = None
    time_scale: float | None = None
    sigma: float | None = None
    resolution: int | None = None
    window: float | None = None
    subsample: int | None = None
    seed: int = 0
    mass_rule: str = "sigma"
    interior_marginal: str = "forward"
    output: str = "out"

    def validate(self):
        if self.times is not None:
            t = np.asarray(self.times, float)
            if t.ndim != 1 or np.any(np.diff(t) <= 0.0):
                raise InputError("times must be strictly increasing")
        if self.epsilon is not None and not self.epsilon > 0.0:
            raise InputError("epsilon must be positive")
        if self.resolution is not None and self.resolution < 2:
            raise InputError("resolution must be at least 2")
        if self.samples_per_segment < 1:
            raise InputError("samples_per_segment must be at least 1")
        if self.max_iters < 1 or not self.tol > 0.0:
            raise InputError("max_iters must be >= 1 and tol > 0")
        try:
            self.solver()
        except ValueError as exc:
            raise InputError(str(exc)) from None
        return self

    def solver(self) -> SolverConfig:
        return SolverConfig(epsilon=self.epsilon, max_iters=self.max_iters, tol=self.tol,
                            interior_marginal=self.interior_marginal, mass_rule=self.mass_rule,
                            space_scale=self.space_scale, time_scale=self.time_scale)

    @classmethod
    def build(cls, args) -> "RunConfig":
        """Defaults, then the ``--config`` JSON file, then explicit flags."""
        values = {}
        if getattr(args, "config", None):
            try:
                values = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(values, dict):
                raise InputError("config file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for name in known:
            flag = getattr(args, name, None)
            if flag is not None and flag != []:
                values[name] = flag
        try:
            return cls(**values).validate()
        except TypeError as exc:
            raise InputError(str(exc)) from None


# --- output writers -------------------------------------------------------------

def _write_curve(curve, out: Path):
    curve_dir = out / "curve"
    curve_dir.mkdir(parents=True, exist_ok=True)
    for old in curve_dir.glob("t_*.csv"):
        old.unlink()
    width = max(4, len(str(len(curve.times) - 1)))
    rows = ["k,t"]
    for k, (t, mu) in enumerate(zip(curve.times, curve.measures)):
        (curve_dir / f"t_{k:0{width}d}.csv").write_text(measure_to_csv(mu), encoding="utf-8")
        rows.append(f"{k},{float(t)!r}")
    (out / "times.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def _write_trajectories(trajs, out: Path):
    d = trajs.dim
    with open(out / "trajectories.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["particle", "knot"] + [f"x{i + 1}" for i in range(d)] + ["r"]
                        + [f"v{i + 1}" for i in range(d)] + ["s"])
        for p in range(len(trajs)):
            for k in range(trajs.n_knots):
                writer.writerow([p, k] + [repr(float(c)) for c in trajs.x[p, k]]
                                + [repr(float(trajs.r[p, k]))]
                                + [repr(float(c)) for c in trajs.v[p, k]]
                                + [repr(float(trajs.s[p, k]))])


def build_summary(times, report, config: RunConfig, trajs) -> dict:
    segments = []
    for i, (dist, diag) in enumerate(zip(report["segment_distances"], report["solver"])):
        segments.append({
            "index": i, "t_start": float(times[i]), "t_end": float(times[i + 1]),
            "wfr_distance": float(dist),
            "solver": {k: (bool(v) if k == "converged" else int(v) if k == "iterations" else float(v))
                       for k, v in diag.items()},
        })
    cfg = asdict(config)
    cfg["measures"] = [str(m) for m in cfg["measures"]]
    cfg.pop("output", None)
    return {
        "version": __version__,
        "times": [float(t) for t in times],
        "sample_times": int(config.samples_per_segment),
        "config": cfg,
        "converged": all(s["solver"]["converged"] for s in segments),
        "n_particles": int(report["n_particles"]),
        "segments": segments,
        "scales": {"space_scale": float(trajs.space_scale), "time_scale": float(trajs.time_scale),
                   "margin": float(config.solver().margin)},
        "mass": {"input": [float(m) for m in report["input_masses"]],
                 "knots": [float(m) for m in report["knot_masses"]],
                 "dropped": float(report["dropped_mass"])},
        "curvature": {k: float(v) for k, v in report["curvature"].items()},
    }


def run_spline(measures, times, config: RunConfig, out: Path, plans=None) -> int:
    """Run the pipeline and write all outputs under ``out``."""
    trajs, curve, report = run_pipeline(measures, times, config.solver(),
                                        n_samples=config.samples_per_segment, plans=plans)
    out.mkdir(parents=True, exist_ok=True)
    _write_curve(curve, out)
    _write_trajectories(trajs, out)
    summary = build_summary(times, report, config, trajs)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    return EXIT_OK if summary["converged"] else EXIT_NONCONVERGED


# --- subcommands ------------------------------------------------------------------

def cmd_distance(args) -> int:
    mu0, mu1 = read_measure(args.mu0), read_measure(args.mu1)
    plan = solve_entropic(mu0, mu1, args.epsilon, args.max_iters or 10_000, args.tol or 1e-9)
    result = {"distance": wfr_distance(plan, mu0, mu1), "iterations": plan.iterations,
              "residual": plan.residual, "converged": plan.converged, "epsilon": plan.epsilon}
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK if plan.converged else EXIT_NONCONVERGED


def _parse_cone_point(text: str) -> ConePoint:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"cannot parse cone point {text!r}; use x1,...,xd,r") from None
    if len(vals) < 2:
        raise InputError("a cone point needs at least one coordinate and a mass")
    try:
        return ConePoint(vals[:-1], vals[-1])
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_geodesic(args) -> int:
    z0, z1 = _parse_cone_point(args.start), _parse_cone_point(args.end)
    if z0.dim != z1.dim:
        raise InputError("endpoint dimensions differ")
    if args.samples < 2:
        raise InputError("samples must be at least 2")
    ts = np.linspace(0.0, 1.0, args.samples)
    x, r = geodesic_arrays(z0.x, z0.r, z1.x, z1.r, ts)
    lines = ["t," + ",".join(f"x{i + 1}" for i in range(z0.dim)) + ",r"]
    for t, xi, ri in zip(ts, x, r):
        lines.append(",".join(repr(float(v)) for v in (t, *xi, ri)))
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_spline(args) -> int:
    config = RunConfig.build(args)
    if len(config.measures) < 2:
        raise InputError("spline needs at least two measure files")
    if config.times is None:
        config.times = [float(i) for i in range(len(config.measures))]
    measures = [read_measure(p) for p in config.measures]
    if len(config.times) != len(measures):
        raise InputError(f"{len(measures)} measures but {len(config.times)} times")
    code = run_spline(measures, np.asarray(config.times, float), config, Path(config.output))
    print(json.dumps({"output": str(config.output), "exit": code}))
    return code


def cmd_experiment(args) -> int:
    if args.name not in PRESETS:
        raise InputError(f"unknown experiment {args.name!r}; choose from {', '.join(PRESETS)}")
    config = RunConfig.build(args)
    measures, time_sets = preset(args.name, sigma=config.sigma, resolution=config.resolution,
                                 seed=config.seed, subsample=config.subsample, radius=config.window)
    if config.times is not None:
        if len(config.times) != len(measures):
            raise InputError(f"the preset has {len(measures)} measures")
        time_sets = (tuple(config.times),)
    root = Path(config.output) / args.name
    inputs = root / "inputs"
    inputs.mkdir(parents=True, exist_ok=True)
    for i, mu in enumerate(measures):
        write_measure(mu, inputs / f"mu_{i}.csv")
    plans = solve_plans(measures, config.solver())
    worst = EXIT_OK
    for j, times in enumerate(time_sets):
        run_config = RunConfig(**{**asdict(config), "times": list(times),
                                  "measures": [str(inputs / f"mu_{i}.csv") for i in range(len(measures))]})
        code = run_spline(measures, np.asarray(times, float), run_config, root / f"times_{j}", plans)
        worst = max(worst, code)
    print(json.dumps({"output": str(root), "runs": len(time_sets), "exit": worst}))
    return worst


def _parse_thresholds(items):
    out = {}
    for item in items or []:
        name, sep, value = item.rpartition("=")
        try:
            out[name if sep else "*"] = float(value)
        except ValueError:
            raise InputError(f"bad threshold {item!r}; use VALUE or CHECK=VALUE") from None
    return out


def cmd_verify(args) -> int:
    try:
        report = run_checks(args.filter or None, seed=args.seed or 0,
                            thresholds=_parse_thresholds(args.threshold))
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    print(json.dumps(report, indent=2))
    return EXIT_OK if all(r["status"] == "PASS" for r in report) else EXIT_VERIFY


# --- parser -----------------------------------------------------------------------------

def _common(parser):
    parser.add_argument("--config", help="JSON file with run settings")
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--output", default=None, help="output directory (or file for geodesic)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _solver_flags(parser):
    parser.add_argument("--epsilon", type=float, default=None, help="entropic regularization")
    parser.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)


def _spline_flags(parser):
    _solver_flags(parser)
    parser.add_argument("--times", type=float, nargs="+", default=None, help="knot times")
    parser.add_argument("--samples-per-segment", dest="samples_per_segment", type=int, default=None)
    parser.add_argument("--space-scale", dest="space_scale", type=float, default=None)
    parser.add_argument("--time-scale", dest="time_scale", type=float, default=None)
    parser.add_argument("--mass-rule", dest="mass_rule", choices=["sigma", "sqrt-mu"], default=None)
    parser.add_argument("--interior-marginal", dest="interior_marginal",
                        choices=["forward", "backward", "average"], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wfrspline", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="WFR distance between two measure files")
    _common(p)
    _solver_flags(p)
    p.add_argument("mu0")
    p.add_argument("mu1")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("geodesic", help="sample the cone geodesic between two points")
    _common(p)
    p.add_argument("start", help="x1,...,xd,r")
    p.add_argument("end", help="x1,...,xd,r")
    p.add_argument("--samples", type=int, default=11)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("spline", help="transport spline through measure files")
    _common(p)
    _spline_flags(p)
    p.add_argument("measures", nargs="*", default=None, help="measure CSV files")
    p.set_defaults(func=cmd_spline)

    p = sub.add_parser("experiment", help="run a built-in experiment")
    _common(p)
    _spline_flags(p)
    p.add_argument("name", help=" | ".join(PRESETS))
    p.add_argument("--sigma", type=float, default=None, help="kernel width of the bumps")
    p.add_argument("--resolution", type=int, default=None, help="grid nodes per axis")
    p.add_argument("--window", type=float, default=None, help="2D truncation radius")
    p.add_argument("--subsample", type=int, default=None, help="points per subsampled measure")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="run the numerical verification suite")
    _common(p)
    p.add_argument("--filter", nargs="+", default=None, help=" | ".join(CHECKS))
    p.add_argument("--threshold", nargs="+", default=None,
                   help="override thresholds: VALUE (all checks) or CHECK=VALUE")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _GEOMETRY_ERRORS as exc:
        print(f"geometry failure: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (OSError, ValueError, KeyError, WFRError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
