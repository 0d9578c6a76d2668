"""Command-line interface: run, sweep, check, list-problems, min-norm.

Exit codes for ``run`` (and per-run inside ``sweep``): 0 the run reached
criticality, 2 it hit the step budget, 3 it diverged, 1 the configuration was
invalid.  ``check`` exits 0 when the damping condition holds, 4 when no
Lipschitz bounds are available.  Inline flags override config-file values
field by field.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from imog.diagnostics import TrajectoryReport, analyze, distance_to_pareto, hp_report
from imog.dynamics import DynParams, DynState, default_initial_velocity, integrate
from imog.minnorm import min_norm_point
from imog.objectives import BUILTIN_PROBLEMS, ProblemDefinitionError, problem_info
from imog.trajio import (
    PLOT_KINDS,
    ConfigError,
    RunConfig,
    SweepRunResult,
    emit_plot_script,
    nondominated_path_for,
    resolve_problem,
    validate_run_config,
    validate_sweep_config,
    write_sweep_summary,
    write_trajectory_csv,
    _read_json,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MAX_STEPS = 2
EXIT_DIVERGENCE = 3
EXIT_MISSING_BOUNDS = 4

_STOP_EXIT = {"criticality": EXIT_OK, "max_steps": EXIT_MAX_STEPS, "divergence": EXIT_DIVERGENCE}

_ORACLES = ("biquadratic", "quadratic_linear")


class _CliError(Exception):
    """Argument-level failure; rendered on stderr and mapped to exit 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="imog", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate one trajectory")
    _add_run_flags(run, with_initial=True)

    sweep = sub.add_parser("sweep", help="run a seeded family of trajectories")
    _add_run_flags(sweep, with_initial=False)
    sweep.add_argument("--runs", type=int, help="number of runs (overrides n_runs)")

    check = sub.add_parser("check", help="report the damping condition without integrating")
    _add_run_flags(check, with_initial=True, with_out=False)

    lp = sub.add_parser("list-problems", help="describe the builtin problems")
    lp.set_defaults(command="list-problems")

    mn = sub.add_parser("min-norm", help="minimum-norm point of the hull of given vectors")
    mn.add_argument("vectors", nargs="*", help="vectors like '(1,0)' '(-1,0)'")
    mn.add_argument("--file", help="file with one comma-separated vector per line")

    return parser


def _add_run_flags(parser, with_initial: bool, with_out: bool = True) -> None:
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--problem", help="builtin name or problem-file path")
    parser.add_argument("--m", type=float, help="mass")
    parser.add_argument("--gamma", type=float, help="viscous damping")
    parser.add_argument("--h", type=float, help="step size")
    if with_initial:
        parser.add_argument("--u0", help="start point, comma-separated")
        group = parser.add_mutually_exclusive_group()
        group.add_argument("--v0", help="start velocity, comma-separated")
        group.add_argument("--lambda", dest="lam", type=float,
                           help="start velocity factor on the descent field")
    parser.add_argument("--max-steps", dest="max_steps", type=int)
    parser.add_argument("--crit-tol", dest="crit_tol", type=float)
    parser.add_argument("--vel-tol", dest="vel_tol", type=float)
    parser.add_argument("--scheme", choices=["imog", "mog"])
    parser.add_argument("--seed", type=int)
    if with_out:
        parser.add_argument("--out", help="output directory (default: current)")
        parser.add_argument("--plot", choices=PLOT_KINDS, help="also emit a plot script")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _CliError as exc:
        print(f"imog: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "check":
            return cmd_check(args)
        if args.command == "list-problems":
            return cmd_list_problems()
        return cmd_min_norm(args)
    except (ConfigError, ProblemDefinitionError) as exc:
        for path, message in exc.errors:
            print(f"imog: {path or 'config'}: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except _CliError as exc:
        print(f"imog: {exc}", file=sys.stderr)
        return EXIT_CONFIG


# ---------------------------------------------------------------------------
# flag overlay

def _parse_number_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in text.replace("(", "").replace(")", "").split(",")]
    except ValueError:
        raise _CliError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def _merged_mapping(args, with_initial: bool) -> dict:
    mapping = _read_json(args.config) if args.config else {}
    if not isinstance(mapping, dict):
        raise ConfigError([("", "configuration must be a JSON object")])
    if args.problem is not None:
        mapping["problem"] = args.problem
    for key in ("m", "gamma", "h"):
        value = getattr(args, key)
        if value is not None:
            mapping.setdefault("params", {})[key] = value
    if with_initial:
        if args.u0 is not None:
            mapping.setdefault("initial", {})["u0"] = _parse_number_list(args.u0, "--u0")
        if args.v0 is not None:
            mapping.setdefault("initial", {})["v0"] = _parse_number_list(args.v0, "--v0")
        if args.lam is not None:
            mapping.setdefault("initial", {})["v0"] = {"lambda": args.lam}
    for key in ("max_steps", "crit_tol", "vel_tol"):
        value = getattr(args, key)
        if value is not None:
            mapping.setdefault("stop", {})[key] = value
    if args.scheme is not None:
        mapping["scheme"] = args.scheme
    if args.seed is not None:
        mapping["seed"] = args.seed
    return mapping


def _load_problem_or_fail(config: RunConfig, strict_gradients: bool):
    obj, checks = resolve_problem(config.problem)
    failures = [c for c in checks if not c.passed]
    if strict_gradients and failures:
        raise ConfigError(
            [
                (
                    f"problem.{c.label}.grad",
                    f"analytic gradient disagrees with central differences "
                    f"(max relative error {c.max_rel_error:.3e} > {c.tolerance:g})",
                )
                for c in failures
            ]
        )
    if config.u0.shape[0] != obj.dim and config.u0.size > 0:
        raise ConfigError(
            [("initial.u0", f"has dimension {config.u0.shape[0]}, problem wants {obj.dim}")]
        )
    return obj, checks


def _initial_state(config: RunConfig, obj) -> DynState:
    if config.lam is not None:
        v0 = default_initial_velocity(obj, config.u0, config.lam, config.params.damping)
    elif config.v0 is not None:
        v0 = config.v0
    else:
        v0 = np.zeros_like(config.u0)
    return DynState(t=config.params.t0, u=config.u0, v=v0)


def _out_path(out_dir: str, configured: str | None, default: str) -> str:
    name = configured if configured else default
    if os.path.isabs(name):
        return name
    return os.path.join(out_dir, name)


def _pareto_oracle(problem: str):
    if problem in _ORACLES:
        return lambda u: distance_to_pareto(problem, u)
    return None


def _single_state_report(traj, oracle) -> TrajectoryReport:
    state = traj.states[0]
    return TrajectoryReport(
        energy_monotone_violation=0.0,
        envelope_violation=0.0,
        terminal_snorm=float(traj.snorms[0]),
        terminal_vnorm=float(np.linalg.norm(state.v)),
        value_limits=tuple(float(x) for x in traj.values[0]),
        pareto_distance=float(oracle(state.u)) if oracle else None,
    )


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(args) -> int:
    config = validate_run_config(_merged_mapping(args, with_initial=True))
    obj, _ = _load_problem_or_fail(config, strict_gradients=True)
    initial = _initial_state(config, obj)

    traj = integrate(obj, config.params, initial, config.stop, config.scheme)

    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    csv_path = _out_path(out_dir, config.outputs.csv, "trajectory.csv")
    report_path = _out_path(out_dir, config.outputs.report, "report.json")
    write_trajectory_csv(traj, csv_path)

    oracle = _pareto_oracle(config.problem)
    if len(traj) >= 2:
        report = analyze(traj, obj, pareto_oracle=oracle)
    else:
        report = _single_state_report(traj, oracle)
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)
        fh.write("\n")
    written = [csv_path, report_path]

    if args.plot or config.outputs.plot:
        kind = args.plot or ("trajectory2d" if obj.dim == 2 else "values")
        plot_path = _out_path(out_dir, config.outputs.plot, "plot.gp")
        emit_plot_script(traj, plot_path, kind, csv_path)
        written.append(plot_path)

    terminal = traj.states[-1]
    print(f"stop: {traj.stop_reason} after {len(traj) - 1} steps at t={terminal.t:g}")
    print(f"terminal point: {_vector_text(terminal.u)}")
    print(f"terminal field norm: {traj.snorms[-1]:.3e}, speed: {np.linalg.norm(terminal.v):.3e}")
    if report.pareto_distance is not None:
        print(f"distance to known critical set: {report.pareto_distance:.3e}")
    for path in written:
        print(f"wrote {path}")
    return _STOP_EXIT[traj.stop_reason]


def _sweep_single(obj, sweep, run_index: int, out_dir: str):
    seed = sweep.template.seed + run_index
    rng = np.random.default_rng(seed)
    lo, hi = sweep.u0_box[:, 0], sweep.u0_box[:, 1]
    u0 = lo + (hi - lo) * rng.random(sweep.u0_box.shape[0])
    if sweep.velocity == "zero":
        v0 = np.zeros_like(u0)
    else:
        v0 = default_initial_velocity(obj, u0, float(sweep.velocity), sweep.template.params.damping)
    initial = DynState(t=sweep.template.params.t0, u=u0, v=v0)
    traj = integrate(obj, sweep.template.params, initial, sweep.template.stop, sweep.template.scheme)
    write_trajectory_csv(traj, os.path.join(out_dir, f"run_{run_index:04d}.csv"))
    oracle = _pareto_oracle(sweep.template.problem)
    terminal = traj.states[-1]
    return SweepRunResult(
        run=run_index,
        seed=seed,
        terminal_u=terminal.u,
        terminal_values=traj.values[-1],
        snorm=float(traj.snorms[-1]),
        stop_reason=traj.stop_reason,
        pareto_distance=float(oracle(terminal.u)) if oracle else None,
    )


def cmd_sweep(args) -> int:
    mapping = _read_json(args.config) if args.config else {}
    if not isinstance(mapping, dict):
        raise ConfigError([("", "configuration must be a JSON object")])
    template = mapping.setdefault("template", {})
    if args.problem is not None:
        template["problem"] = args.problem
    for key in ("m", "gamma", "h"):
        value = getattr(args, key)
        if value is not None:
            template.setdefault("params", {})[key] = value
    for key in ("max_steps", "crit_tol", "vel_tol"):
        value = getattr(args, key)
        if value is not None:
            template.setdefault("stop", {})[key] = value
    if args.scheme is not None:
        template["scheme"] = args.scheme
    if args.seed is not None:
        template["seed"] = args.seed
    if args.runs is not None:
        mapping["n_runs"] = args.runs

    sweep = validate_sweep_config(mapping)
    obj, _ = _load_problem_or_fail(sweep.template, strict_gradients=True)
    if sweep.u0_box.shape[0] != obj.dim:
        raise ConfigError(
            [("u0_box", f"has {sweep.u0_box.shape[0]} coordinate ranges, problem wants {obj.dim}")]
        )

    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)

    if sweep.parallelism > 1:
        with ThreadPoolExecutor(max_workers=sweep.parallelism) as pool:
            results = list(
                pool.map(lambda i: _sweep_single(obj, sweep, i, out_dir), range(sweep.n_runs))
            )
    else:
        results = [_sweep_single(obj, sweep, i, out_dir) for i in range(sweep.n_runs)]

    summary_path, front_path = write_sweep_summary(results, os.path.join(out_dir, "summary.csv"))
    written = [summary_path, front_path]
    if args.plot:
        plot_path = os.path.join(out_dir, "plot.gp")
        emit_plot_script(results, plot_path, args.plot, summary_path)
        written.append(plot_path)

    converged = sum(1 for r in results if r.stop_reason == "criticality")
    print(f"{converged}/{len(results)} runs reached criticality")
    for path in written:
        print(f"wrote {path}")
    return max(_STOP_EXIT[r.stop_reason] for r in results)


def cmd_check(args) -> int:
    config = validate_run_config(_merged_mapping(args, with_initial=True))
    obj, checks = _load_problem_or_fail(config, strict_gradients=False)

    gradient_ok = True
    for check in checks:
        status = "ok" if check.passed else "MISMATCH"
        gradient_ok &= check.passed
        print(
            f"gradient check [{check.label}]: {status} "
            f"(max relative error {check.max_rel_error:.3e} over {check.points_checked} points)"
        )

    if obj.lipschitz_bounds is None:
        print(
            "imog: no gradient Lipschitz bounds available; add 'lipschitz' to each "
            "objective in the problem file, or integrate first and estimate from the "
            "trajectory (diagnostics.estimate_lipschitz)",
            file=sys.stderr,
        )
        return EXIT_MISSING_BOUNDS

    report = hp_report(obj, config.params)
    for label, bound, margin, good in zip(
        obj.labels, report.lipschitz, report.margins, report.satisfied_each
    ):
        verdict = "satisfied" if good else "VIOLATED"
        print(f"damping condition [{label}]: L={bound:g}, margin gamma^2 - m*L = {margin:g} ({verdict})")
    top = 1.0 / config.params.damping
    print(f"admissible initial-velocity factors: lambda in [0, {top:g}]")
    print(f"overall: {'satisfied' if report.satisfied else 'not satisfied'}")
    return EXIT_OK if report.satisfied and gradient_ok else EXIT_CONFIG


def cmd_list_problems() -> int:
    for name in BUILTIN_PROBLEMS:
        info = problem_info(name)
        if info.lipschitz is None:
            print(f"{name}: {info.pareto_description}")
            continue
        bounds = ", ".join(f"{b:g}" for b in info.lipschitz)
        print(
            f"{name}: dim={info.dim}, objectives={info.count}, "
            f"lipschitz=({bounds}), pareto_set={info.pareto_description}"
        )
    return EXIT_OK


def cmd_min_norm(args) -> int:
    rows: list[list[float]] = []
    if args.file:
        try:
            with open(args.file, "r", encoding="utf-8") as fh:
                lines = [line.strip() for line in fh if line.strip()]
        except OSError as exc:
            print(f"imog: cannot read {args.file}: {exc.strerror}", file=sys.stderr)
            return EXIT_CONFIG
        rows = [_parse_number_list(line, args.file) for line in lines]
    rows += [_parse_number_list(text, "vector") for text in args.vectors]
    if not rows:
        raise _CliError("min-norm needs at least one vector")
    if len({len(r) for r in rows}) != 1:
        print("imog: vectors have mismatched dimensions", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = min_norm_point(np.asarray(rows, dtype=np.float64))
    except ValueError as exc:
        print(f"imog: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"point: {_vector_text(result.point)}")
    print(f"weights: {_vector_text(result.weights.theta)}")
    print(f"norm: {result.norm:.17g}")
    return EXIT_OK


def _vector_text(values) -> str:
    return "(" + ", ".join(format(float(x), ".17g") for x in values) + ")"


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
