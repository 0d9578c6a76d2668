"""Lyapunov-energy diagnostics along trajectories.

Each objective carries the energy

    E_i = f_i(u) + (m/gamma) <grad f_i(u), v> + m ||v||^2,

which is nonincreasing along the continuous flow when the damping dominates
the gradient curvature (gamma^2 > m L_i, with L_i a bound on the Lipschitz
constant of grad f_i over the trajectory).  Under that condition the values
stay below an exponential envelope anchored at the initial energy.  The
discrete trajectories reproduce these laws up to step-size noise, which this
module measures rather than assumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from imog.dynamics import DynParams, DynState, Trajectory
from imog.objectives import UnknownProblemError, VectorObjective


@dataclass(frozen=True)
class HpReport:
    """Damping-condition margins gamma^2 - m L_i, one per objective.

    ``is_estimate`` flags bounds measured along a trajectory instead of
    supplied globally.
    """

    lipschitz: tuple[float, ...]
    is_estimate: tuple[bool, ...]
    margins: tuple[float, ...]
    satisfied_each: tuple[bool, ...]

    @property
    def satisfied(self) -> bool:
        return all(self.satisfied_each)


@dataclass(frozen=True)
class TrajectoryReport:
    """Worst-case deviations of a trajectory from the continuous-time laws.

    Violation fields are nonnegative; zero means the discrete run obeyed the
    corresponding inequality everywhere.  ``value_limits`` is the mean of the
    final one percent of each objective's samples.  ``pareto_distance`` is
    present only when a distance oracle was supplied.
    """

    energy_monotone_violation: float
    envelope_violation: float
    terminal_snorm: float
    terminal_vnorm: float
    value_limits: tuple[float, ...]
    pareto_distance: float | None = None

    def to_json_dict(self) -> dict:
        out = {
            "energy_monotone_violation": self.energy_monotone_violation,
            "envelope_violation": self.envelope_violation,
            "terminal_snorm": self.terminal_snorm,
            "terminal_vnorm": self.terminal_vnorm,
            "value_limits": list(self.value_limits),
        }
        if self.pareto_distance is not None:
            out["pareto_distance"] = self.pareto_distance
        return out


def energy(obj: VectorObjective, params: DynParams, state: DynState) -> np.ndarray:
    """Per-objective energies at a state, shape (q,)."""
    values = obj.value(state.u)
    grads = obj.gradient_rows(state.u)
    speed2 = float(state.v @ state.v)
    return values + (params.mass / params.damping) * (grads @ state.v) + params.mass * speed2


def estimate_lipschitz(obj: VectorObjective, trajectory: Trajectory) -> np.ndarray:
    """Largest observed gradient difference quotient along a trajectory.

    A lower estimate of each Lipschitz constant, not a bound; callers should
    label it as such.
    """
    if len(trajectory) < 2:
        raise ValueError("need at least two states to estimate")
    positions = trajectory.positions()
    grads = np.stack([obj.gradient_rows(u) for u in positions])  # (n, q, d)
    du = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    dg = np.linalg.norm(np.diff(grads, axis=0), axis=2)  # (n-1, q)
    moved = du > 0
    if not np.any(moved):
        return np.zeros(obj.count)
    return (dg[moved] / du[moved, None]).max(axis=0)


def hp_report(
    obj: VectorObjective,
    params: DynParams,
    lipschitz=None,
    trajectory: Trajectory | None = None,
) -> HpReport:
    """Check gamma^2 > m L_i per objective.

    Bounds come from ``lipschitz`` if given, else from the objective's own
    global bounds, else are estimated along ``trajectory``.  With none of the
    three available this is an error.
    """
    estimated = False
    if lipschitz is not None:
        bounds = np.asarray(lipschitz, dtype=np.float64).reshape(-1)
        if bounds.shape != (obj.count,):
            raise ValueError(f"need {obj.count} bounds, got {bounds.shape}")
    elif obj.lipschitz_bounds is not None:
        bounds = np.asarray(obj.lipschitz_bounds, dtype=np.float64)
    elif trajectory is not None:
        bounds = estimate_lipschitz(obj, trajectory)
        estimated = True
    else:
        raise ValueError(
            "no gradient Lipschitz bounds available and no trajectory to estimate from"
        )
    if np.any(bounds < 0):
        raise ValueError("Lipschitz bounds must be nonnegative")
    margins = params.damping**2 - params.mass * bounds
    return HpReport(
        lipschitz=tuple(float(b) for b in bounds),
        is_estimate=(estimated,) * obj.count,
        margins=tuple(float(m) for m in margins),
        satisfied_each=tuple(bool(m > 0) for m in margins),
    )


def upper_bound_envelope(
    energy_start: float, value_start: float, params: DynParams, t: float
) -> float:
    """Exponential value bound  E_0 + (f_0 - E_0) exp(-(gamma/m)(t - t0))."""
    if t < params.t0:
        raise ValueError("t must not precede the start time")
    decay = np.exp(-(params.damping / params.mass) * (t - params.t0))
    return float(energy_start + (value_start - energy_start) * decay)


def cumulative_energy_increase(trajectory: Trajectory) -> np.ndarray:
    """Sum of positive energy increments per objective; zero for a
    perfectly dissipative run."""
    if len(trajectory) < 2:
        return np.zeros(trajectory.energies.shape[1])
    increments = np.diff(trajectory.energies, axis=0)
    return np.clip(increments, 0.0, None).sum(axis=0)


def oscillation_count(trajectory: Trajectory, axis: int = 1) -> int:
    """Sign changes of the displacement component along one axis."""
    steps = np.diff(trajectory.positions()[:, axis])
    return count_sign_changes(steps)


def count_sign_changes(series) -> int:
    signs = np.sign(np.asarray(series, dtype=np.float64))
    signs = signs[signs != 0]
    if signs.size < 2:
        return 0
    return int(np.sum(signs[1:] != signs[:-1]))


def analyze(
    trajectory: Trajectory, obj: VectorObjective, pareto_oracle=None
) -> TrajectoryReport:
    """Summarize a trajectory against the continuous-time laws.

    ``pareto_oracle`` maps a point to its distance from the known critical
    set; omit it for problems without one.
    """
    if len(trajectory) < 2:
        raise ValueError("need at least two states to analyze")
    if trajectory.values.shape[1] != obj.count:
        raise ValueError("trajectory and objective disagree on the objective count")

    energies = trajectory.energies
    increments = np.diff(energies, axis=0)
    energy_violation = float(max(0.0, increments.max()))

    params = trajectory.params
    t = trajectory.times()
    decay = np.exp(-(params.damping / params.mass) * (t - t[0]))
    bounds = energies[0][None, :] + (trajectory.values[0] - energies[0])[None, :] * decay[:, None]
    envelope_violation = float(max(0.0, (trajectory.values - bounds).max()))

    window = max(1, len(trajectory) // 100)
    value_limits = trajectory.values[-window:].mean(axis=0)

    distance = None
    if pareto_oracle is not None:
        distance = float(pareto_oracle(trajectory.states[-1].u))

    return TrajectoryReport(
        energy_monotone_violation=energy_violation,
        envelope_violation=envelope_violation,
        terminal_snorm=float(trajectory.snorms[-1]),
        terminal_vnorm=float(np.linalg.norm(trajectory.states[-1].v)),
        value_limits=tuple(float(v) for v in value_limits),
        pareto_distance=distance,
    )


def distance_to_pareto(name: str, u) -> float:
    """Euclidean distance to the analytic critical set of a planar builtin."""
    point = np.asarray(u, dtype=np.float64)
    x, y = float(point[0]), float(point[1])
    if name == "biquadratic":
        return float(np.hypot(x - min(1.0, max(-1.0, x)), y))
    if name == "quadratic_linear":
        return float(np.hypot(max(x, 0.0), y))
    raise UnknownProblemError(name)
