"""File formats: run and sweep configurations, trajectory CSVs, sweep
summaries, and plot scripts.

All numbers serialize as decimal text with 17 significant digits, which
round-trips IEEE doubles exactly.  The trajectory CSV schema is

    step,t,u0..u{d-1},v0..v{d-1},f1..f{q},E1..E{q},snorm,theta1..theta{q}

one row per recorded state.  Config validation is total: every violation is
collected with the path of the offending field before anything is rejected.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from imog.dynamics import DynParams, StopRule, Trajectory
from imog.objectives import (
    BUILTIN_PROBLEMS,
    GradientCheckResult,
    VectorObjective,
    builtin_problem,
    load_problem_definition,
    pareto_filter,
)

SCHEME_NAMES = ("imog", "mog")
PLOT_KINDS = ("trajectory2d", "values", "energies", "pareto_cloud")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists (path, message) pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        lines = "; ".join(f"{path}: {msg}" for path, msg in errors)
        super().__init__(f"invalid configuration: {lines}")
        self.errors = errors


@dataclass(frozen=True)
class OutputPaths:
    csv: str | None = None
    report: str | None = None
    plot: str | None = None


@dataclass(frozen=True)
class RunConfig:
    """One integration: problem, parameters, initial data, stop rule, outputs.

    ``v0`` and ``lam`` are mutually exclusive ways to set the initial
    velocity; with neither, the run starts at rest.
    """

    problem: str
    params: DynParams
    u0: np.ndarray
    v0: np.ndarray | None = None
    lam: float | None = None
    stop: StopRule = field(default_factory=StopRule)
    scheme: str = "imog"
    seed: int = 0
    outputs: OutputPaths = field(default_factory=OutputPaths)


@dataclass(frozen=True)
class SweepConfig:
    """A family of runs: one RunConfig template, a sampling box for the
    starts, and a velocity rule ('zero' or a factor on the descent field)."""

    template: RunConfig
    n_runs: int
    u0_box: np.ndarray  # (d, 2) per-coordinate min/max
    velocity: str | float = "zero"
    parallelism: int = 1


# ---------------------------------------------------------------------------
# config validation

def _check_unknown(mapping, allowed, prefix, errors):
    for key in sorted(set(mapping) - set(allowed)):
        path = f"{prefix}.{key}" if prefix else key
        errors.append((path, "unknown field"))


def _positive_number(mapping, key, prefix, errors, *, required=True, default=None):
    if key not in mapping:
        if required:
            errors.append((f"{prefix}.{key}", "missing required field"))
        return default
    value = mapping[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not np.isfinite(value) or value <= 0:
        errors.append((f"{prefix}.{key}", "must be a positive finite number"))
        return default
    return float(value)


def _vector(value, path, errors):
    if not isinstance(value, list) or not value:
        errors.append((path, "must be a nonempty list of numbers"))
        return None
    if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
        errors.append((path, "must be a nonempty list of numbers"))
        return None
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        errors.append((path, "entries must be finite"))
        return None
    return arr


def validate_run_config(mapping, prefix: str = "") -> RunConfig:
    """Validate a run-config mapping, collecting every violation."""
    errors: list[tuple[str, str]] = []
    config = _collect_run_config(mapping, prefix, errors, allow_initial=True)
    if errors:
        raise ConfigError(errors)
    return config


def _collect_run_config(mapping, prefix, errors, allow_initial):
    dot = f"{prefix}." if prefix else ""
    if not isinstance(mapping, dict):
        errors.append((prefix or "", "configuration must be a JSON object"))
        return None
    allowed = ["problem", "params", "stop", "scheme", "seed"]
    if allow_initial:
        allowed += ["initial", "outputs"]
    _check_unknown(mapping, allowed, prefix, errors)

    problem = mapping.get("problem")
    if not isinstance(problem, str) or not problem:
        errors.append((f"{dot}problem", "must be a builtin name or a problem-file path"))
        problem = ""

    params_map = mapping.get("params")
    params = None
    if not isinstance(params_map, dict):
        errors.append((f"{dot}params", "missing or not an object"))
    else:
        _check_unknown(params_map, ["m", "gamma", "h", "t0"], f"{dot}params", errors)
        m = _positive_number(params_map, "m", f"{dot}params", errors)
        gamma = _positive_number(params_map, "gamma", f"{dot}params", errors)
        h = _positive_number(params_map, "h", f"{dot}params", errors)
        t0 = params_map.get("t0", 0.0)
        if not isinstance(t0, (int, float)) or isinstance(t0, bool) or not np.isfinite(t0):
            errors.append((f"{dot}params.t0", "must be a finite number"))
            t0 = 0.0
        if None not in (m, gamma, h):
            params = DynParams(m, gamma, h, float(t0))

    u0 = v0 = lam = None
    if allow_initial:
        initial = mapping.get("initial")
        if not isinstance(initial, dict):
            errors.append((f"{dot}initial", "missing or not an object"))
        else:
            _check_unknown(initial, ["u0", "v0"], f"{dot}initial", errors)
            if "u0" not in initial:
                errors.append((f"{dot}initial.u0", "missing required field"))
            else:
                u0 = _vector(initial["u0"], f"{dot}initial.u0", errors)
            raw_v0 = initial.get("v0")
            if raw_v0 is not None:
                if isinstance(raw_v0, dict):
                    _check_unknown(raw_v0, ["lambda"], f"{dot}initial.v0", errors)
                    lam = raw_v0.get("lambda")
                    if not isinstance(lam, (int, float)) or isinstance(lam, bool):
                        errors.append((f"{dot}initial.v0.lambda", "must be a number"))
                        lam = None
                else:
                    v0 = _vector(raw_v0, f"{dot}initial.v0", errors)
                    if v0 is not None and u0 is not None and v0.shape != u0.shape:
                        errors.append((f"{dot}initial.v0", "must match the dimension of u0"))
                        v0 = None
        if lam is not None and params is not None:
            top = 1.0 / params.damping
            if not 0.0 <= lam <= top:
                errors.append(
                    (f"{dot}initial.v0.lambda", f"must lie in the admissible interval [0, {top:g}]")
                )
                lam = None

    stop = _collect_stop_rule(mapping.get("stop"), f"{dot}stop", errors)

    scheme = mapping.get("scheme", "imog")
    if scheme not in SCHEME_NAMES:
        errors.append((f"{dot}scheme", f"must be one of {SCHEME_NAMES}"))
        scheme = "imog"

    seed = mapping.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append((f"{dot}seed", "must be a nonnegative integer"))
        seed = 0

    outputs = OutputPaths()
    if allow_initial and "outputs" in mapping:
        out_map = mapping["outputs"]
        if not isinstance(out_map, dict):
            errors.append((f"{dot}outputs", "must be an object"))
        else:
            _check_unknown(out_map, ["csv", "report", "plot"], f"{dot}outputs", errors)
            parts = {}
            for key in ("csv", "report", "plot"):
                value = out_map.get(key)
                if value is not None and (not isinstance(value, str) or not value):
                    errors.append((f"{dot}outputs.{key}", "must be a nonempty string"))
                    value = None
                parts[key] = value
            outputs = OutputPaths(**parts)

    if errors or params is None or (allow_initial and u0 is None):
        return None
    return RunConfig(
        problem=problem,
        params=params,
        u0=u0 if u0 is not None else np.zeros(0),
        v0=v0,
        lam=float(lam) if lam is not None else None,
        stop=stop,
        scheme=scheme,
        seed=seed,
        outputs=outputs,
    )


def _collect_stop_rule(mapping, prefix, errors) -> StopRule:
    if mapping is None:
        return StopRule()
    if not isinstance(mapping, dict):
        errors.append((prefix, "must be an object"))
        return StopRule()
    _check_unknown(mapping, ["max_steps", "crit_tol", "vel_tol"], prefix, errors)
    max_steps = mapping.get("max_steps", 1_000_000)
    if not isinstance(max_steps, int) or isinstance(max_steps, bool) or max_steps < 1:
        errors.append((f"{prefix}.max_steps", "must be a positive integer"))
        max_steps = 1_000_000
    crit_tol = _positive_number(mapping, "crit_tol", prefix, errors, required=False, default=1e-6)
    vel_tol = mapping.get("vel_tol", 1e-6)
    if not isinstance(vel_tol, (int, float)) or isinstance(vel_tol, bool) or vel_tol < 0:
        errors.append((f"{prefix}.vel_tol", "must be a nonnegative number"))
        vel_tol = 1e-6
    return StopRule(max_steps=max_steps, crit_tol=crit_tol, vel_tol=float(vel_tol))


def validate_sweep_config(mapping) -> SweepConfig:
    errors: list[tuple[str, str]] = []
    if not isinstance(mapping, dict):
        raise ConfigError([("", "configuration must be a JSON object")])
    _check_unknown(mapping, ["template", "n_runs", "u0_box", "velocity", "parallelism"], "", errors)

    template = None
    if "template" not in mapping:
        errors.append(("template", "missing required field"))
    else:
        template = _collect_run_config(mapping["template"], "template", errors, allow_initial=False)

    n_runs = mapping.get("n_runs")
    if not isinstance(n_runs, int) or isinstance(n_runs, bool) or n_runs < 1:
        errors.append(("n_runs", "must be a positive integer"))
        n_runs = 1

    box = None
    raw_box = mapping.get("u0_box")
    if not isinstance(raw_box, list) or not raw_box:
        errors.append(("u0_box", "must be a nonempty list of [min, max] pairs"))
    else:
        rows = []
        for k, pair in enumerate(raw_box):
            ok = (
                isinstance(pair, list)
                and len(pair) == 2
                and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
            )
            if not ok:
                errors.append((f"u0_box[{k}]", "must be a [min, max] pair of numbers"))
                continue
            lo, hi = float(pair[0]), float(pair[1])
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                errors.append((f"u0_box[{k}]", "needs finite min <= max"))
                continue
            rows.append((lo, hi))
        if len(rows) == len(raw_box):
            box = np.asarray(rows, dtype=np.float64)

    velocity = mapping.get("velocity", "zero")
    if isinstance(velocity, dict):
        _check_unknown(velocity, ["lambda"], "velocity", errors)
        lam = velocity.get("lambda")
        if not isinstance(lam, (int, float)) or isinstance(lam, bool):
            errors.append(("velocity.lambda", "must be a number"))
            velocity = "zero"
        else:
            velocity = float(lam)
            if template is not None:
                top = 1.0 / template.params.damping
                if not 0.0 <= velocity <= top:
                    errors.append(
                        ("velocity.lambda", f"must lie in the admissible interval [0, {top:g}]")
                    )
    elif velocity != "zero":
        errors.append(("velocity", "must be 'zero' or {\"lambda\": value}"))
        velocity = "zero"

    parallelism = mapping.get("parallelism", 1)
    if not isinstance(parallelism, int) or isinstance(parallelism, bool) or parallelism < 1:
        errors.append(("parallelism", "must be a positive integer"))
        parallelism = 1

    if errors:
        raise ConfigError(errors)
    return SweepConfig(
        template=template,
        n_runs=n_runs,
        u0_box=box,
        velocity=velocity,
        parallelism=parallelism,
    )


def read_run_config(path) -> RunConfig:
    """Load and validate a run configuration file."""
    return validate_run_config(_read_json(path))


def read_sweep_config(path) -> SweepConfig:
    return validate_sweep_config(_read_json(path))


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError([(str(path), f"cannot read: {exc.strerror}")]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [(str(path), f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")]
        ) from exc


def resolve_problem(name_or_path) -> tuple[VectorObjective, list[GradientCheckResult]]:
    """Builtin problem by name, otherwise a problem-definition file by path."""
    if name_or_path in BUILTIN_PROBLEMS:
        return builtin_problem(name_or_path), []
    return read_problem_file(name_or_path)


def read_problem_file(path) -> tuple[VectorObjective, list[GradientCheckResult]]:
    return load_problem_definition(_read_json(path))


# ---------------------------------------------------------------------------
# trajectory CSV

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_header(dim: int, count: int) -> list[str]:
    return (
        ["step", "t"]
        + [f"u{i}" for i in range(dim)]
        + [f"v{i}" for i in range(dim)]
        + [f"f{i + 1}" for i in range(count)]
        + [f"E{i + 1}" for i in range(count)]
        + ["snorm"]
        + [f"theta{i + 1}" for i in range(count)]
    )


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    """One row per recorded state, 17 significant digits, newline-terminated."""
    if not trajectory.states:
        raise ValueError("trajectory has no states")
    dim = trajectory.states[0].u.shape[0]
    count = trajectory.values.shape[1]
    lines = [",".join(trajectory_header(dim, count))]
    for k, state in enumerate(trajectory.states):
        row = (
            [str(k), _fmt(state.t)]
            + [_fmt(x) for x in state.u]
            + [_fmt(x) for x in state.v]
            + [_fmt(x) for x in trajectory.values[k]]
            + [_fmt(x) for x in trajectory.energies[k]]
            + [_fmt(trajectory.snorms[k])]
            + [_fmt(x) for x in trajectory.thetas[k]]
        )
        lines.append(",".join(row))
    _write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class TrajectoryTable:
    """Raw columns of a trajectory CSV."""

    header: list[str]
    data: np.ndarray  # (n_rows, n_columns)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.header.index(name)]


def read_trajectory_csv(path) -> TrajectoryTable:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read trajectory CSV {path}: {exc.strerror}") from exc
    if not lines:
        raise ValueError(f"{path}: empty trajectory CSV")
    header = lines[0].split(",")
    data = np.array(
        [[float(cell) for cell in line.split(",")] for line in lines[1:] if line],
        dtype=np.float64,
    )
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: inconsistent column count")
    return TrajectoryTable(header=header, data=data)


# ---------------------------------------------------------------------------
# sweep summaries

@dataclass(frozen=True)
class SweepRunResult:
    run: int
    seed: int
    terminal_u: np.ndarray
    terminal_values: np.ndarray
    snorm: float
    stop_reason: str
    pareto_distance: float | None = None


def nondominated_path_for(path) -> str:
    root, ext = os.path.splitext(str(path))
    return f"{root}_nondominated{ext or '.csv'}"


def write_sweep_summary(results: list[SweepRunResult], path) -> tuple[str, str]:
    """Terminal-point table plus a sibling file with its non-dominated subset.

    Returns the pair of paths written.
    """
    if not results:
        raise ValueError("no sweep results to write")
    dim = results[0].terminal_u.shape[0]
    count = results[0].terminal_values.shape[0]
    with_distance = all(r.pareto_distance is not None for r in results)
    header = (
        ["run", "seed"]
        + [f"u{i}" for i in range(dim)]
        + [f"f{i + 1}" for i in range(count)]
        + ["snorm", "stop_reason"]
        + (["pareto_distance"] if with_distance else [])
    )

    def rows_for(subset):
        lines = [",".join(header)]
        for r in subset:
            row = (
                [str(r.run), str(r.seed)]
                + [_fmt(x) for x in r.terminal_u]
                + [_fmt(x) for x in r.terminal_values]
                + [_fmt(r.snorm), r.stop_reason]
                + ([_fmt(r.pareto_distance)] if with_distance else [])
            )
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    _write_text(path, rows_for(results))
    front = [r for r, _ in pareto_filter([(r, r.terminal_values) for r in results])]
    second = nondominated_path_for(path)
    _write_text(second, rows_for(front))
    return str(path), second


# ---------------------------------------------------------------------------
# plot scripts (gnuplot)

def emit_plot_script(source, path, kind: str, csv_path) -> None:
    """Write a self-contained gnuplot script referencing the CSV next to it.

    ``trajectory2d`` and ``pareto_cloud`` require planar data; start points
    are drawn as crosses and limit points as circled pluses.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"kind must be one of {PLOT_KINDS}, got {kind!r}")
    rel_csv = os.path.relpath(str(csv_path), os.path.dirname(str(path)) or ".")
    if kind == "pareto_cloud":
        script = _pareto_cloud_script(source, rel_csv)
    else:
        script = _trajectory_script(source, rel_csv, kind)
    _write_text(path, script)


def _column_layout(dim: int, count: int) -> dict:
    # 1-based gnuplot column indices
    return {
        "u": 3,
        "v": 3 + dim,
        "f": 3 + 2 * dim,
        "E": 3 + 2 * dim + count,
        "snorm": 3 + 2 * dim + 2 * count,
        "theta": 4 + 2 * dim + 2 * count,
    }


_PLOT_PREAMBLE = """set datafile separator ','
set key outside
set grid
"""


def _trajectory_script(trajectory: Trajectory, rel_csv: str, kind: str) -> str:
    dim = trajectory.states[0].u.shape[0]
    count = trajectory.values.shape[1]
    cols = _column_layout(dim, count)
    if kind == "trajectory2d":
        if dim != 2:
            raise ValueError("trajectory2d plots need a 2-d problem")
        start = trajectory.states[0].u
        end = trajectory.states[-1].u
        return (
            _PLOT_PREAMBLE
            + "set xlabel 'u0'\nset ylabel 'u1'\nset size ratio -1\n"
            + f"plot '{rel_csv}' skip 1 using {cols['u']}:{cols['u'] + 1} "
            + "with lines lc rgb 'navy' title 'trajectory', \\\n"
            + f"     '-' with points pt 2 ps 2 lc rgb 'red' title 'start', \\\n"
            + f"     '-' with points pt 6 ps 2 lc rgb 'black' title 'limit', \\\n"
            + f"     '-' with points pt 1 ps 2 lc rgb 'black' notitle\n"
            + f"{_fmt(start[0])} {_fmt(start[1])}\ne\n"
            + f"{_fmt(end[0])} {_fmt(end[1])}\ne\n"
            + f"{_fmt(end[0])} {_fmt(end[1])}\ne\n"
        )
    base = cols["f"] if kind == "values" else cols["E"]
    label = "f" if kind == "values" else "E"
    series = ", \\\n".join(
        f"     '{rel_csv}' skip 1 using 2:{base + i} with lines title '{label}{i + 1}'"
        for i in range(count)
    )
    return _PLOT_PREAMBLE + f"set xlabel 't'\nset ylabel '{label}_i'\nplot \\\n{series}\n"


def _pareto_cloud_script(results: list[SweepRunResult], rel_csv: str) -> str:
    if not results:
        raise ValueError("no sweep results to plot")
    if results[0].terminal_u.shape[0] != 2:
        raise ValueError("pareto_cloud plots need a 2-d problem")
    rel_front = nondominated_path_for(rel_csv)
    return (
        _PLOT_PREAMBLE
        + "set xlabel 'u0'\nset ylabel 'u1'\nset size ratio -1\n"
        + f"plot '{rel_csv}' skip 1 using 3:4 with points pt 6 ps 1.5 lc rgb 'black' title 'terminal points', \\\n"
        + f"     '{rel_csv}' skip 1 using 3:4 with points pt 1 ps 1.5 lc rgb 'black' notitle, \\\n"
        + f"     '{rel_front}' skip 1 using 3:4 with points pt 7 ps 1 lc rgb 'web-green' title 'non-dominated'\n"
    )


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
