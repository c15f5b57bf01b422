"""Command line front end: ``mfso3 density|sample|fit|estimate``.

Distribution parameters are read from JSON files holding an ``"F"`` entry,
either a 3x3 matrix or three diagonal values. The report written by ``fit``
has that shape, so its output can be fed back to ``density`` or ``sample``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fileio
from .distribution import MatrixFisher
from .estimator import FilterStepError, SigmaOutOfRange
from .fitting import InfeasibleMoment, NoConvergence, fit_from_samples
from .simulation import run_scenario
from .special import graded_rule

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class CliError(Exception):
    """User-facing failure with a ready-made message."""

    def __init__(self, message: str, code: int = EXIT_FAILURE):
        super().__init__(message)
        self.code = code


def _rule(args):
    if args.quad_order is None:
        return None
    return graded_rule(n=args.quad_order)


def _read_parameter(path: Path) -> np.ndarray:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", EXIT_USAGE)
    if not isinstance(data, dict) or "F" not in data:
        raise CliError(f"{path}: expected an object with an 'F' entry", EXIT_USAGE)
    problems: list[str] = []
    F = fileio.parse_matrix(data["F"], "F", problems)
    if problems:
        raise CliError(f"{path}: " + "; ".join(problems), EXIT_USAGE)
    return F


def _grid_shape(text: str) -> tuple[int, int]:
    """``N`` means N elevations by 2N azimuths; ``NxM`` gives both explicitly."""
    try:
        if "x" in text.lower():
            n_el, n_az = (int(p) for p in text.lower().split("x"))
        else:
            n_el = int(text)
            n_az = 2 * n_el
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be N or NxM, got {text!r}") from None
    if n_el < 1 or n_az < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return n_el, n_az


def sphere_grid(n_el: int, n_az: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cell-centred azimuth/elevation grid and the unit vectors it addresses."""
    el = -0.5 * np.pi + (np.arange(n_el) + 0.5) * np.pi / n_el
    az = (np.arange(n_az) + 0.5) * 2.0 * np.pi / n_az
    EL, AZ = np.meshgrid(el, az, indexing="ij")
    r = np.stack([np.cos(EL) * np.cos(AZ), np.cos(EL) * np.sin(AZ), np.sin(EL)], axis=-1)
    return AZ.ravel(), EL.ravel(), r.reshape(-1, 3)


def cmd_density(args) -> dict:
    F = _read_parameter(args.input)
    dist = MatrixFisher(F, rule=_rule(args))
    n_el, n_az = args.grid
    az, el, r = sphere_grid(n_el, n_az)
    p = np.column_stack([dist.marginal_axis_density(axis, r) for axis in (1, 2, 3)])
    fileio.write_grid(args.output, az, el, p)
    return {"rows": len(az)}


def cmd_sample(args) -> dict:
    F = _read_parameter(args.input)
    dist = MatrixFisher(F, rule=_rule(args))
    rng = np.random.default_rng(args.seed)
    R = dist.sample(rng, args.samples)
    fileio.write_rotations(args.output, R)
    return {"rows": len(R)}


def cmd_fit(args) -> dict:
    samples = fileio.read_rotations(args.input)
    if len(samples) == 0:
        raise CliError(f"{args.input}: no rotations found", EXIT_USAGE)
    try:
        dist, info = fit_from_samples(samples, rule=_rule(args), full_output=True)
    except InfeasibleMoment as exc:
        raise CliError(f"{args.input}: {exc}") from None
    report = {
        "F": dist.F,
        "U": dist.U,
        "s": dist.s,
        "V": dist.V,
        "log_c": dist.log_c,
        "samples": len(samples),
        "d": info.d,
        "iterations": info.iterations,
        "residual": info.residual,
        "tied_singular_values": info.tied,
    }
    if args.output is None:
        print(json.dumps(fileio.to_jsonable(report), indent=2))
    else:
        fileio.write_json(args.output, report)
    return {"iterations": info.iterations}


def cmd_estimate(args) -> dict:
    sc, runs = fileio.load_scenario(args.input)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.sigma is not None:
        overrides["sigma"] = args.sigma
    if overrides:
        sc = replace(sc, **overrides)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    per_run = []
    for n in range(runs):
        result = run_scenario(sc.with_seed(sc.seed + n))
        tag = f"seed{sc.seed + n}"
        fileio.write_run(out / f"{sc.name}_{tag}_first_order.csv", result.first_order)
        fileio.write_run(out / f"{sc.name}_{tag}_unscented.csv", result.unscented)
        per_run.append(result.summary())
    aggregate = {}
    for mode in ("first_order", "unscented"):
        keys = per_run[0][mode].keys()
        aggregate[mode] = {k: float(np.mean([r[mode][k] for r in per_run])) for k in keys}
    summary = {
        "format": f"mfso3 summary v{fileio.FORMAT_VERSION}",
        "scenario": fileio.scenario_to_dict(sc, runs),
        "steady_state_from": 0.5,
        "runs": per_run,
        "mean_over_runs": aggregate,
    }
    fileio.write_json(out / f"{sc.name}_summary.json", summary)
    return {"runs": runs}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfso3", description="Matrix Fisher distribution tools on SO(3).")
    sub = parser.add_subparsers(dest="command", required=True)

    def positive_int(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
        return value

    def node_count(text):
        value = positive_int(text)
        if not 2 <= value <= 512:
            raise argparse.ArgumentTypeError(f"quadrature order must lie in [2, 512], got {value}")
        return value

    def open_unit(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        if not 0.0 < value < 1.0:
            raise argparse.ArgumentTypeError(f"sigma must lie in (0, 1), got {value}")
        return value

    def quad(p):
        p.add_argument("--quad-order", type=node_count, default=None,
                       help="Gauss-Legendre nodes per panel of the normalizer quadrature (default adapts to F)")

    p = sub.add_parser("density", help="marginal densities of the three body axes on a sphere grid")
    p.add_argument("--input", type=Path, required=True, help="JSON file with the parameter F")
    p.add_argument("--output", type=Path, required=True, help="sphere-grid CSV to write")
    p.add_argument("--grid", type=_grid_shape, default=(50, 100), help="N (N x 2N) or NxM elevations x azimuths")
    quad(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("sample", help="draw rotations from M(F)")
    p.add_argument("--input", type=Path, required=True, help="JSON file with the parameter F")
    p.add_argument("--output", type=Path, required=True, help="rotation CSV to write")
    p.add_argument("--samples", type=positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    quad(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="maximum likelihood fit to a rotation CSV")
    p.add_argument("--input", type=Path, required=True, help="rotation CSV")
    p.add_argument("--output", type=Path, default=None, help="JSON report (stdout if omitted)")
    quad(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("estimate", help="run both attitude filters on a scenario")
    p.add_argument("--input", type=Path, required=True, help="scenario JSON")
    p.add_argument("--output", type=Path, required=True, help="directory for run CSVs and the summary")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--sigma", type=open_unit, default=None, help="override the sigma-point spread")
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        print(f"mfso3 {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except fileio.ScenarioError as exc:
        print(f"mfso3 {args.command}: {args.input}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except fileio.FormatError as exc:
        print(f"mfso3 {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        where = exc.filename if exc.filename is not None else ""
        print(f"mfso3 {args.command}: {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (SigmaOutOfRange, FilterStepError, NoConvergence) as exc:
        print(f"mfso3 {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
