"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute.
"""

import time
from contextlib import contextmanager

import numpy as np

from imog.cli import main as cli_main
from imog.diagnostics import (
    count_sign_changes,
    cumulative_energy_increase,
    distance_to_pareto,
    hp_report,
    upper_bound_envelope,
)
from imog.dynamics import (
    DynParams,
    DynState,
    StopRule,
    default_initial_velocity,
    integrate,
    step_halving_error,
)
from imog.minnorm import brute_force_min_norm, min_norm_point
from imog.objectives import analytic_steepest, builtin_problem, steepest_descent
from imog.trajio import read_trajectory_csv, trajectory_header, write_trajectory_csv


@contextmanager
def criterion(number: int, name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:2d} [{name}]: FAIL")
        raise
    else:
        print(f"ACCEPTANCE {number:2d} [{name}]: PASS")


def seeded_convex_quadratic():
    rng = np.random.default_rng(5)
    centers = rng.uniform(-2.0, 2.0, size=(3, 3))
    matrices = []
    for _ in range(3):
        a = rng.normal(size=(3, 3))
        matrices.append(a.T @ a / 3.0 + 0.1 * np.eye(3))
    return builtin_problem("convex_quadratic", centers=centers, matrices=matrices)


def test_criterion_1_min_norm_oracle_equivalence():
    with criterion(1, "min-norm oracle equivalence"):
        start = time.perf_counter()
        rng = np.random.default_rng(12345)
        for i in range(200):
            q = int(rng.integers(1, 5))
            d = int(rng.integers(1, 6))
            vectors = rng.normal(size=(q, d))
            fast = min_norm_point(vectors)
            grid = brute_force_min_norm(vectors, 200)
            assert fast.norm <= grid.norm + 1e-9, i
            residual = float(np.min(vectors @ fast.point) - fast.point @ fast.point)
            assert residual >= -1e-8, i
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def test_criterion_2_steepest_field_oracle():
    with criterion(2, "steepest field matches closed forms"):
        start = time.perf_counter()
        rng = np.random.default_rng(222)
        for name in ("biquadratic", "quadratic_linear"):
            obj = builtin_problem(name)
            for _ in range(1000):
                u = rng.uniform(-5.0, 5.0, size=2)
                s = steepest_descent(obj, u)
                expected = analytic_steepest(name, u)
                assert np.linalg.norm(s.direction - expected) <= 1e-8, (name, u)
        elapsed = time.perf_counter() - start
        assert elapsed < 2.0, f"took {elapsed:.2f}s"


def test_criterion_3_common_descent_property():
    with criterion(3, "common descent inequality"):
        rng = np.random.default_rng(333)
        problems = {
            "biquadratic": builtin_problem("biquadratic"),
            "quadratic_linear": builtin_problem("quadratic_linear"),
            "hbf_quadratic": builtin_problem("hbf_quadratic"),
            "convex_quadratic": seeded_convex_quadratic(),
        }
        for name, obj in problems.items():
            for _ in range(1000):
                u = rng.uniform(-5.0, 5.0, size=obj.dim)
                s = steepest_descent(obj, u)
                worst = float(np.max(obj.gradient_rows(u) @ s.direction)) + s.norm**2
                assert worst <= 1e-7, (name, u, worst)


def test_criterion_4_convergence_to_pareto():
    with criterion(4, "convergence to the analytic Pareto sets"):
        start = time.perf_counter()
        stop = StopRule(max_steps=10**6, crit_tol=1e-6, vel_tol=1e-6)

        obj1 = builtin_problem("biquadratic")
        rng = np.random.default_rng(404)
        for _ in range(20):
            u0 = rng.uniform(-4.0, 4.0, size=2)
            v0 = default_initial_velocity(obj1, u0, 1.0, 1.0)
            traj = integrate(obj1, DynParams(1.0, 1.0, 0.01), DynState(0.0, u0, v0), stop)
            assert traj.stop_reason == "criticality"
            assert distance_to_pareto("biquadratic", traj.states[-1].u) <= 1e-3
            assert traj.snorms[-1] <= 1e-6

        obj2 = builtin_problem("quadratic_linear")
        for _ in range(20):
            u0 = rng.uniform(-4.0, 4.0, size=2)
            v0 = default_initial_velocity(obj2, u0, 1.0, 1.0)
            traj = integrate(obj2, DynParams(1.0, 1.0, 0.05), DynState(0.0, u0, v0), stop)
            assert traj.stop_reason == "criticality"
            assert distance_to_pareto("quadratic_linear", traj.states[-1].u) <= 1e-3

        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"took {elapsed:.2f}s"


def damped_example1_runs():
    obj = builtin_problem("biquadratic")
    params = DynParams(1.0, 2.0, 0.01)
    assert hp_report(obj, params).satisfied
    runs = []
    for u0 in [(3.0, 2.0), (-2.5, 1.5), (0.5, -3.0)]:
        u0 = np.asarray(u0)
        v0 = default_initial_velocity(obj, u0, 0.5, 2.0)  # factor 1/gamma
        runs.append(integrate(obj, params, DynState(0.0, u0, v0)))
    return obj, runs


def test_criterion_5_discrete_dissipation():
    with criterion(5, "discrete energy dissipation"):
        _, runs = damped_example1_runs()
        for traj in runs:
            assert traj.stop_reason == "criticality"
            assert cumulative_energy_increase(traj).max() <= 1e-3


def test_criterion_6_value_upper_bound():
    with criterion(6, "exponential value envelope"):
        _, runs = damped_example1_runs()
        for traj in runs:
            times = traj.times()
            for i in range(traj.values.shape[1]):
                bounds = np.array(
                    [
                        upper_bound_envelope(traj.energies[0, i], traj.values[0, i], traj.params, t)
                        for t in times
                    ]
                )
                assert np.max(traj.values[:, i] - bounds) <= 1e-3


def test_criterion_7_value_improvement():
    with criterion(7, "values never exceed the start"):
        gamma = 2.0
        for name, starts in [
            ("biquadratic", [(3.0, 2.0), (-2.5, 1.5), (0.5, -3.0)]),
            ("quadratic_linear", [(1.5, 1.0), (2.0, -2.0), (0.8, 0.3)]),
        ]:
            obj = builtin_problem(name)
            params = DynParams(1.0, gamma, 0.01)
            assert hp_report(obj, params).satisfied
            for u0 in starts:
                u0 = np.asarray(u0)
                for lam in (0.0, 0.5 / gamma, 1.0 / gamma):
                    v0 = default_initial_velocity(obj, u0, lam, gamma)
                    traj = integrate(obj, params, DynState(0.0, u0, v0))
                    assert (traj.values - traj.values[0]).max() <= 1e-6, (name, u0, lam)


def test_criterion_8_oscillatory_regime():
    with criterion(8, "low damping oscillates, high damping does not"):
        obj = builtin_problem("biquadratic")
        u0 = np.array([2.0, 2.0])
        weak = integrate(obj, DynParams(1.0, 0.1, 0.01), DynState(0.0, u0, np.zeros(2)))
        assert weak.stop_reason == "criticality"
        assert count_sign_changes(weak.positions()[:, 1]) > 5
        strong = integrate(obj, DynParams(1.0, 2.0, 0.01), DynState(0.0, u0, np.zeros(2)))
        assert strong.stop_reason == "criticality"
        assert count_sign_changes(strong.positions()[:, 1]) <= 1


def test_criterion_9_scheme_consistency():
    with criterion(9, "first-order step-halving ratios"):
        cases = [
            ("hbf_quadratic", (1.0, -0.7), 1.0, 3.0),
            ("biquadratic", (0.5, 2.0), 1.0, 1.0),
        ]
        for name, u0, m, g in cases:
            obj = builtin_problem(name)
            initial = DynState(0.0, np.asarray(u0), np.zeros(2))
            errors = [
                step_halving_error(obj, DynParams(m, g, h), initial, n)
                for h, n in [(0.1, 20), (0.05, 40), (0.025, 80)]
            ]
            for coarse, fine in zip(errors, errors[1:]):
                ratio = coarse / fine
                assert 1.5 <= ratio <= 3.0, (name, errors)


def test_criterion_10_determinism_and_roundtrip(tmp_path):
    with criterion(10, "seeded determinism and 17-digit round trip"):
        config = tmp_path / "sweep.json"
        config.write_text(
            """
            {
              "template": {
                "problem": "biquadratic",
                "params": {"m": 1.0, "gamma": 1.0, "h": 0.01},
                "seed": 77
              },
              "n_runs": 4,
              "u0_box": [[-3.0, 3.0], [-3.0, 3.0]],
              "velocity": {"lambda": 1.0}
            }
            """
        )
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli_main(["sweep", "--config", str(config), "--out", str(out1)]) == 0
        assert cli_main(["sweep", "--config", str(config), "--out", str(out2)]) == 0
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()
        assert (out1 / "summary_nondominated.csv").read_bytes() == (
            out2 / "summary_nondominated.csv"
        ).read_bytes()
        for i in range(4):
            name = f"run_{i:04d}.csv"
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

        obj = builtin_problem("quadratic_linear")
        traj = integrate(
            obj,
            DynParams(1.0, 1.0, 0.05),
            DynState(0.0, np.array([1.5, 1.0]), np.zeros(2)),
            StopRule(max_steps=100),
        )
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        table = read_trajectory_csv(path)
        assert table.header == trajectory_header(2, 2)
        np.testing.assert_array_equal(table.column("t"), traj.times())
        np.testing.assert_array_equal(
            table.data[:, 2:4], traj.positions()
        )
        np.testing.assert_array_equal(table.data[:, 4:6], traj.velocities())
        np.testing.assert_array_equal(table.data[:, 6:8], traj.values)
        np.testing.assert_array_equal(table.data[:, 8:10], traj.energies)
        np.testing.assert_array_equal(table.column("snorm"), traj.snorms)
        np.testing.assert_array_equal(table.data[:, 11:13], traj.thetas)
