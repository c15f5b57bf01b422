"""CSV and JSON formats used by the command line.

Every CSV starts with a comment line ``# mfso3 <kind> v<version>`` followed by
a column header, so readers can reject files of the wrong kind or version.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

import numpy as np

from .distribution import VonMisesFisherS2
from .estimator import EstimationRun
from .simulation import PendulumConfig, ScenarioConfig

FORMAT_VERSION = 1

ROTATION_COLUMNS = [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)]
GRID_COLUMNS = ["azimuth_rad", "elevation_rad", "p_axis1", "p_axis2", "p_axis3"]
RUN_COLUMNS = (
    ["t", "error_deg", "s1", "s2", "s3", "inv_s23", "inv_s31", "inv_s12"]
    + [f"m{i}{j}" for i in range(1, 4) for j in range(1, 4)]
)


class FormatError(ValueError):
    """A file does not match the expected schema."""


def _write_table(path, kind: str, columns: list[str], rows: np.ndarray) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# mfso3 {kind} v{FORMAT_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in np.asarray(rows, dtype=float):
            writer.writerow([repr(float(x)) for x in row])


def _read_table(path, kind: str, columns: list[str]) -> np.ndarray:
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline().strip()
        expected = f"# mfso3 {kind} v{FORMAT_VERSION}"
        if first != expected:
            raise FormatError(f"{path}: expected header line {expected!r}, found {first!r}")
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != columns:
            raise FormatError(f"{path}: expected columns {columns}, found {header}")
        rows = []
        for lineno, row in enumerate(reader, start=3):
            if len(row) != len(columns):
                raise FormatError(f"{path}:{lineno}: expected {len(columns)} fields, found {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return np.array(rows, dtype=float).reshape(-1, len(columns))


def write_rotations(path, R: np.ndarray) -> None:
    """Rotations as rows of nine row-major entries."""
    _write_table(path, "rotations", ROTATION_COLUMNS, np.asarray(R).reshape(-1, 9))


def read_rotations(path) -> np.ndarray:
    return _read_table(path, "rotations", ROTATION_COLUMNS).reshape(-1, 3, 3)


def write_grid(path, azimuth: np.ndarray, elevation: np.ndarray, density: np.ndarray) -> None:
    """Sphere grid; ``density`` has one column per body axis."""
    rows = np.column_stack([np.ravel(azimuth), np.ravel(elevation), np.reshape(density, (-1, 3))])
    _write_table(path, "sphere-grid", GRID_COLUMNS, rows)


def read_grid(path) -> np.ndarray:
    return _read_table(path, "sphere-grid", GRID_COLUMNS)


def write_run(path, run: EstimationRun) -> None:
    inv = run.uncertainty
    rows = np.column_stack([run.t, run.error_deg, run.s, inv, run.mean.reshape(-1, 9)])
    _write_table(path, "run", RUN_COLUMNS, rows)


def read_run(path) -> EstimationRun:
    a = _read_table(path, "run", RUN_COLUMNS)
    mean = a[:, 8:17].reshape(-1, 3, 3)
    s = a[:, 2:5]
    # the parameter is U diag(s) V^T; only the mean attitude U V^T is stored
    return EstimationRun(t=a[:, 0], F=np.full_like(mean, np.nan), s=s, mean=mean, error_deg=a[:, 1])


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(to_jsonable(payload), indent=2) + "\n")


def to_jsonable(x: Any):
    if isinstance(x, dict):
        return {k: to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class ScenarioError(ValueError):
    """Scenario file violates the schema; ``problems`` lists each offending field."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {p}" for p in problems))


_SCENARIO_FIELDS = {
    "name", "duration", "gyro_rate", "attitude_rate", "H", "F_Z", "F0", "directions",
    "sigma", "seed", "runs", "pendulum", "gyro_noise", "filter_H",
}
_PENDULUM_FIELDS = {"J", "rho", "mass", "gravity", "R0", "omega0", "substeps"}


def parse_matrix(value, name: str, problems: list[str], allow_diag: bool = True):
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{name}: expected numbers, got {value!r}")
        return None
    if allow_diag and a.shape == (3,):
        a = np.diag(a)
    if a.shape != (3, 3):
        problems.append(f"{name}: expected a 3x3 matrix{' or 3 diagonal entries' if allow_diag else ''}, got shape {a.shape}")
        return None
    if not np.all(np.isfinite(a)):
        problems.append(f"{name}: entries must be finite")
        return None
    return a


def _vector(value, name: str, problems: list[str]):
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{name}: expected 3 numbers, got {value!r}")
        return None
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        problems.append(f"{name}: expected 3 finite numbers, got {value!r}")
        return None
    return a


def _number(value, name: str, problems: list[str], positive: bool = False, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{name}: expected a number, got {value!r}")
        return None
    if integer and int(value) != value:
        problems.append(f"{name}: expected an integer, got {value!r}")
        return None
    if positive and not value > 0:
        problems.append(f"{name}: must be positive, got {value!r}")
        return None
    return int(value) if integer else float(value)


def scenario_from_dict(data: dict) -> tuple[ScenarioConfig, int]:
    """Validate a scenario mapping; returns the config and the number of seeded runs."""
    if not isinstance(data, dict):
        raise ScenarioError([f"top level: expected an object, got {type(data).__name__}"])
    problems: list[str] = []
    for key in sorted(set(data) - _SCENARIO_FIELDS):
        problems.append(f"{key}: unknown field")
    kw: dict[str, Any] = {}
    if "name" in data:
        if isinstance(data["name"], str):
            kw["name"] = data["name"]
        else:
            problems.append(f"name: expected a string, got {data['name']!r}")
    for key in ("duration", "gyro_rate", "attitude_rate"):
        if key in data:
            kw[key] = _number(data[key], key, problems, positive=True)
    for key in ("H", "F_Z", "F0"):
        if key in data:
            kw[key] = parse_matrix(data[key], key, problems)
    if data.get("filter_H") is not None:
        kw["filter_H"] = parse_matrix(data["filter_H"], "filter_H", problems)
    if "sigma" in data:
        sigma = _number(data["sigma"], "sigma", problems)
        if sigma is not None and not 0.0 < sigma < 1.0:
            problems.append(f"sigma: must lie in (0, 1), got {sigma}")
        kw["sigma"] = sigma
    if "seed" in data:
        seed = _number(data["seed"], "seed", problems, integer=True)
        if seed is not None and seed < 0:
            problems.append(f"seed: must be non-negative, got {seed}")
        kw["seed"] = seed
    runs = 1
    if "runs" in data:
        runs = _number(data["runs"], "runs", problems, positive=True, integer=True) or 1
    if "gyro_noise" in data:
        if data["gyro_noise"] in ("increment", "white"):
            kw["gyro_noise"] = data["gyro_noise"]
        else:
            problems.append(f"gyro_noise: expected 'increment' or 'white', got {data['gyro_noise']!r}")
    if "directions" in data:
        dirs = []
        if not isinstance(data["directions"], list):
            problems.append("directions: expected a list")
        else:
            for n, item in enumerate(data["directions"]):
                where = f"directions[{n}]"
                if not isinstance(item, dict):
                    problems.append(f"{where}: expected an object with a, b and optional B")
                    continue
                for key in sorted(set(item) - {"a", "b", "B"}):
                    problems.append(f"{where}.{key}: unknown field")
                a = _vector(item.get("a"), f"{where}.a", problems)
                b = _number(item.get("b"), f"{where}.b", problems, positive=True)
                B = parse_matrix(item["B"], f"{where}.B", problems, allow_diag=False) if "B" in item else np.eye(3)
                if a is not None and abs(np.linalg.norm(a) - 1.0) > 1e-9:
                    problems.append(f"{where}.a: must be a unit vector")
                    a = None
                if a is not None and b is not None and B is not None:
                    dirs.append(VonMisesFisherS2(a, b, B))
        kw["directions"] = tuple(dirs)
    if "pendulum" in data:
        p = data["pendulum"]
        pkw: dict[str, Any] = {}
        if not isinstance(p, dict):
            problems.append("pendulum: expected an object")
        else:
            for key in sorted(set(p) - _PENDULUM_FIELDS):
                problems.append(f"pendulum.{key}: unknown field")
            for key in ("J", "R0"):
                if key in p:
                    pkw[key] = parse_matrix(p[key], f"pendulum.{key}", problems, allow_diag=(key == "J"))
            for key in ("rho", "omega0"):
                if key in p:
                    pkw[key] = _vector(p[key], f"pendulum.{key}", problems)
            for key in ("mass", "gravity"):
                if key in p:
                    pkw[key] = _number(p[key], f"pendulum.{key}", problems, positive=True)
            if "substeps" in p:
                pkw["substeps"] = _number(p["substeps"], "pendulum.substeps", problems, positive=True, integer=True)
            if not problems:
                try:
                    kw["pendulum"] = PendulumConfig(**pkw)
                except ValueError as exc:
                    problems.append(f"pendulum: {exc}")
    if problems:
        raise ScenarioError(problems)
    try:
        return ScenarioConfig(**kw), runs
    except ValueError as exc:
        raise ScenarioError([str(exc)]) from None


def load_scenario(path) -> tuple[ScenarioConfig, int]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    return scenario_from_dict(data)


def scenario_to_dict(sc: ScenarioConfig, runs: int = 1) -> dict:
    p = sc.pendulum
    out = {
        "name": sc.name,
        "duration": sc.duration,
        "gyro_rate": sc.gyro_rate,
        "attitude_rate": sc.attitude_rate,
        "H": sc.H,
        "F_Z": sc.F_Z,
        "F0": sc.F0,
        "directions": [{"a": d.a, "b": d.b, "B": d.B} for d in sc.directions],
        "sigma": sc.sigma,
        "seed": sc.seed,
        "runs": runs,
        "gyro_noise": sc.gyro_noise,
        "pendulum": {
            "J": p.J, "rho": p.rho, "mass": p.mass, "gravity": p.gravity,
            "R0": p.R0, "omega0": p.omega0, "substeps": p.substeps,
        },
    }
    if sc.filter_H is not None:
        out["filter_H"] = sc.filter_H
    return to_jsonable(out)
