import numpy as np
import pytest

from imog.dynamics import (
    DivergenceError,
    DynParams,
    DynState,
    StopRule,
    Trajectory,
    default_initial_velocity,
    hbf_step,
    imog_step,
    integrate,
    mog_step,
    step_halving_error,
)
from imog.objectives import builtin_problem


def make_state(u, v=None, t=0.0):
    u = np.asarray(u, dtype=float)
    v = np.zeros_like(u) if v is None else np.asarray(v, dtype=float)
    return DynState(t=t, u=u, v=v)


class TestParamsAndStates:
    def test_params_validation(self):
        DynParams(1.0, 1.0, 0.05)  # paper-style parameter set is accepted
        for bad in [(0.0, 1.0, 0.1), (1.0, -1.0, 0.1), (1.0, 1.0, 0.0), (np.inf, 1.0, 0.1)]:
            with pytest.raises(ValueError):
                DynParams(*bad)

    def test_state_validation(self):
        with pytest.raises(ValueError):
            DynState(0.0, np.array([1.0, np.nan]), np.zeros(2))
        with pytest.raises(ValueError):
            DynState(0.0, np.zeros(2), np.zeros(3))

    def test_stop_rule_validation(self):
        with pytest.raises(ValueError):
            StopRule(max_steps=0)
        with pytest.raises(ValueError):
            StopRule(crit_tol=0.0)
        with pytest.raises(ValueError):
            StopRule(vel_tol=-1.0)


class TestSingleSteps:
    def test_equilibrium_is_fixed(self):
        obj = builtin_problem("biquadratic")
        state = make_state([0.5, 0.0])  # on the critical segment, at rest
        nxt = imog_step(obj, DynParams(1.0, 1.0, 0.1), state)
        np.testing.assert_array_equal(nxt.u, state.u)
        np.testing.assert_array_equal(nxt.v, state.v)
        np.testing.assert_array_equal(mog_step(obj, 0.1, state.u), state.u)

    def test_hand_computed_update(self):
        obj = builtin_problem("biquadratic")
        nxt = imog_step(obj, DynParams(1.0, 1.0, 0.1), make_state([2.0, 0.0]))
        np.testing.assert_allclose(nxt.v, [-1.0 / 11.0, 0.0], rtol=1e-15)
        np.testing.assert_allclose(nxt.u, [2.0 - 0.1 / 11.0, 0.0], rtol=1e-15)
        assert nxt.t == pytest.approx(0.1)

    def test_mog_contraction_single_objective(self):
        obj = builtin_problem("hbf_quadratic")
        np.testing.assert_allclose(mog_step(obj, 0.1, [1.0, 0.0]), [0.9, 0.0], rtol=1e-15)

    def test_mog_on_far_branch(self):
        obj = builtin_problem("quadratic_linear")
        np.testing.assert_allclose(mog_step(obj, 0.5, [2.0, 0.0]), [1.5, 0.0], rtol=1e-15)

    def test_hbf_requires_single_objective(self):
        with pytest.raises(ValueError):
            hbf_step(builtin_problem("biquadratic"), DynParams(1.0, 1.0, 0.1), make_state([1.0, 1.0]))

    def test_hbf_matches_imog_exactly(self):
        obj = builtin_problem("hbf_quadratic")
        p = DynParams(1.0, 2.0, 0.05)
        a = make_state([1.0, -0.5], [0.2, 0.1])
        b = make_state([1.0, -0.5], [0.2, 0.1])
        for _ in range(1000):
            a = imog_step(obj, p, a)
            b = hbf_step(obj, p, b)
            assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)

    def test_hbf_overdamped_monotone(self):
        obj = builtin_problem("convex_quadratic", centers=[[0.0]])
        p = DynParams(1.0, 3.0, 0.01)
        state = make_state([1.0])
        xs = [1.0]
        for _ in range(2000):
            state = hbf_step(obj, p, state)
            xs.append(float(state.u[0]))
        xs = np.array(xs)
        assert np.all(np.diff(xs) <= 0)
        assert xs[-1] >= 0 and xs[-1] < 0.05


class TestInitialVelocity:
    def test_zero_factor(self):
        obj = builtin_problem("biquadratic")
        np.testing.assert_array_equal(default_initial_velocity(obj, [2.0, 0.0], 0.0, 1.0), [0.0, 0.0])

    def test_full_factor_on_outer_branch(self):
        obj = builtin_problem("biquadratic")
        np.testing.assert_allclose(
            default_initial_velocity(obj, [2.0, 0.0], 1.0, 1.0), [-1.0, 0.0], atol=1e-12
        )

    def test_critical_start_gives_zero(self):
        obj = builtin_problem("biquadratic")
        for lam in (0.0, 0.3, 1.0):
            v0 = default_initial_velocity(obj, [0.5, 0.0], lam, 1.0)
            np.testing.assert_allclose(v0, [0.0, 0.0], atol=1e-12)

    def test_out_of_range_factor(self):
        obj = builtin_problem("biquadratic")
        with pytest.raises(ValueError, match="admissible interval"):
            default_initial_velocity(obj, [2.0, 0.0], 1.5, 1.0)
        with pytest.raises(ValueError, match="admissible interval"):
            default_initial_velocity(obj, [2.0, 0.0], -0.1, 1.0)

    def test_decrease_condition_holds(self):
        rng = np.random.default_rng(6)
        for name in ("biquadratic", "quadratic_linear"):
            obj = builtin_problem(name)
            for _ in range(50):
                u0 = rng.uniform(-3, 3, size=2)
                lam = float(rng.uniform(0.0, 0.5))
                v0 = default_initial_velocity(obj, u0, lam, 2.0)
                grads = obj.gradient_rows(u0)
                assert np.max(grads @ v0) + 2.0 * v0 @ v0 <= 1e-9


class TestIntegrate:
    def test_critical_start_stops_immediately(self):
        obj = builtin_problem("biquadratic")
        traj = integrate(obj, DynParams(1.0, 1.0, 0.01), make_state([0.2, 0.0]))
        assert traj.stop_reason == "criticality"
        assert len(traj) == 1

    def test_example1_reaches_pareto_segment(self):
        obj = builtin_problem("biquadratic")
        u0 = np.array([3.0, 2.0])
        v0 = default_initial_velocity(obj, u0, 1.0, 1.0)
        traj = integrate(
            obj, DynParams(1.0, 1.0, 0.01), DynState(0.0, u0, v0), StopRule(10**6, 1e-6, 1e-6)
        )
        assert traj.stop_reason == "criticality"
        u = traj.states[-1].u
        assert np.hypot(u[0] - np.clip(u[0], -1.0, 1.0), u[1]) <= 1e-3

    def test_example2_reaches_pareto_ray(self):
        obj = builtin_problem("quadratic_linear")
        traj = integrate(
            obj,
            DynParams(1.0, 1.0, 0.05),
            make_state([1.5, 1.0]),
            StopRule(10**6, 1e-6, 1e-6),
        )
        assert traj.stop_reason == "criticality"
        u = traj.states[-1].u
        assert abs(u[1]) <= 1e-3 and u[0] <= 1e-3

    def test_max_steps_stop(self):
        obj = builtin_problem("biquadratic")
        traj = integrate(obj, DynParams(1.0, 1.0, 0.01), make_state([3.0, 0.0]), StopRule(max_steps=5))
        assert traj.stop_reason == "max_steps"
        assert len(traj) == 6  # initial state plus five steps

    def test_divergence_keeps_last_finite_state(self):
        # oversized step turns the quadratic into an amplifying recurrence
        obj = builtin_problem("hbf_quadratic")
        traj = integrate(obj, DynParams(1.0, 0.1, 10.0), make_state([1.0, 0.0]), StopRule(max_steps=10**4))
        assert traj.stop_reason == "divergence"
        assert len(traj) >= 1
        assert np.all(np.isfinite(traj.positions()))

    def test_times_are_arithmetic(self):
        obj = builtin_problem("biquadratic")
        traj = integrate(obj, DynParams(1.0, 1.0, 0.05, t0=2.0), make_state([2.0, 1.0], t=2.0), StopRule(max_steps=40))
        t = traj.times()
        np.testing.assert_allclose(t, 2.0 + 0.05 * np.arange(len(traj)), rtol=1e-15)
        assert np.all(np.diff(t) > 0)

    def test_diagnostics_shapes_and_consistency(self):
        obj = builtin_problem("biquadratic")
        traj = integrate(obj, DynParams(1.0, 1.0, 0.05), make_state([2.0, 1.0]), StopRule(max_steps=30))
        n = len(traj)
        assert traj.values.shape == (n, 2)
        assert traj.energies.shape == (n, 2)
        assert traj.snorms.shape == (n,)
        assert traj.thetas.shape == (n, 2)
        np.testing.assert_allclose(traj.thetas.sum(axis=1), 1.0, atol=1e-12)
        for k in (0, n // 2, n - 1):
            st = traj.states[k]
            np.testing.assert_allclose(traj.values[k], obj.value(st.u), atol=1e-14)

    def test_mog_records_field_as_velocity(self):
        obj = builtin_problem("quadratic_linear")
        traj = integrate(obj, DynParams(1.0, 1.0, 0.1), make_state([2.0, 0.5]), StopRule(max_steps=20), scheme="mog")
        for k, st in enumerate(traj.states):
            np.testing.assert_allclose(np.linalg.norm(st.v), traj.snorms[k], atol=1e-14)

    def test_value_improvement_with_chosen_velocity(self):
        # damping strong enough for dissipation, small step
        for name, starts in [("biquadratic", [(3.0, 2.0), (0.5, -3.0)]), ("quadratic_linear", [(1.5, 1.0), (2.0, -2.0)])]:
            obj = builtin_problem(name)
            for u0 in starts:
                for lam in (0.0, 0.25, 0.5):
                    v0 = default_initial_velocity(obj, np.array(u0), lam, 2.0)
                    traj = integrate(obj, DynParams(1.0, 2.0, 0.01), DynState(0.0, np.array(u0), v0))
                    assert (traj.values - traj.values[0]).max() <= 1e-6

    def test_velocity_decay_tail(self):
        obj = builtin_problem("biquadratic")
        u0 = np.array([3.0, 2.0])
        v0 = default_initial_velocity(obj, u0, 1.0, 1.0)
        traj = integrate(obj, DynParams(1.0, 1.0, 0.01), DynState(0.0, u0, v0))
        assert traj.stop_reason == "criticality"
        speeds = np.linalg.norm(traj.velocities(), axis=1)
        assert speeds[-1] <= 1e-6
        tail = speeds[-max(1, len(speeds) // 10) :]
        assert tail.max() <= 10 * 1e-6

    def test_deterministic_trajectories(self):
        obj = builtin_problem("quadratic_linear")
        runs = [
            integrate(obj, DynParams(1.0, 1.0, 0.05), make_state([1.5, 1.0]), StopRule(max_steps=200))
            for _ in range(2)
        ]
        assert np.array_equal(runs[0].positions(), runs[1].positions())
        assert np.array_equal(runs[0].energies, runs[1].energies)

    def test_velocity_form_matches_two_point_recurrence(self):
        obj = builtin_problem("biquadratic")
        m, g, h = 1.0, 1.0, 0.05
        u0 = np.array([2.0, 1.0])
        v0 = np.array([0.3, -0.2])
        traj = integrate(obj, DynParams(m, g, h), DynState(0.0, u0, v0), StopRule(max_steps=200))

        # independent oracle: u_{n+1} = u_n + m/(m+hg)(u_n - u_{n-1}) + h^2/(m+hg) s(u_n)
        from imog.objectives import steepest_descent

        prev = u0 - h * v0
        cur = u0
        oracle = [cur.copy()]
        for _ in range(len(traj) - 1):
            s = steepest_descent(obj, cur).direction
            nxt = cur + (m / (m + h * g)) * (cur - prev) + (h * h / (m + h * g)) * s
            prev, cur = cur, nxt
            oracle.append(cur.copy())
        np.testing.assert_allclose(traj.positions(), np.array(oracle), atol=1e-12)

    def test_scheme_name_validation(self):
        obj = builtin_problem("biquadratic")
        with pytest.raises(ValueError):
            integrate(obj, DynParams(1.0, 1.0, 0.1), make_state([1.0, 1.0]), scheme="leapfrog")

    def test_dimension_mismatch(self):
        obj = builtin_problem("biquadratic")
        with pytest.raises(ValueError):
            integrate(obj, DynParams(1.0, 1.0, 0.1), make_state([1.0, 1.0, 1.0]))


class TestStepHalving:
    def test_zero_field_zero_error(self):
        obj = builtin_problem("biquadratic")
        err = step_halving_error(obj, DynParams(1.0, 1.0, 0.1), make_state([0.3, 0.0]), 10)
        assert err == 0.0

    def test_first_order_ratio_hbf(self):
        obj = builtin_problem("hbf_quadratic")
        initial = make_state([1.0, -0.7])
        errs = [
            step_halving_error(obj, DynParams(1.0, 3.0, h), initial, n)
            for h, n in [(0.1, 20), (0.05, 40)]
        ]
        assert 1.5 <= errs[0] / errs[1] <= 3.0

    def test_error_decreases_with_step(self):
        obj = builtin_problem("biquadratic")
        initial = make_state([0.5, 2.0])
        errs = [
            step_halving_error(obj, DynParams(1.0, 1.0, h), initial, n)
            for h, n in [(0.1, 20), (0.05, 40), (0.025, 80)]
        ]
        assert errs[0] > errs[1] > errs[2]

    def test_odd_steps_rejected(self):
        obj = builtin_problem("biquadratic")
        with pytest.raises(ValueError):
            step_halving_error(obj, DynParams(1.0, 1.0, 0.1), make_state([1.0, 1.0]), 7)

    def test_divergence_propagates(self):
        obj = builtin_problem("hbf_quadratic")
        with pytest.raises(DivergenceError):
            step_halving_error(obj, DynParams(1.0, 0.1, 10.0), make_state([1.0, 0.0]), 100)
