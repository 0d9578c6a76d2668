"""Time discretization of the inertial and first-order common-descent flows.

The second-order system  m u'' + gamma u' = s(u)  is advanced by the explicit
scheme

    v_{n+1} = (m v_n + h s(u_n)) / (m + h gamma),
    u_{n+1} = u_n + h v_{n+1},

algebraically the two-point recurrence
u_{n+1} = u_n + m/(m+h*gamma) (u_n - u_{n-1}) + h^2/(m+h*gamma) s(u_n)
with v_n = (u_n - u_{n-1})/h.  Dropping inertia gives the first-order flow
u' = s(u), advanced by explicit Euler.  With a single objective the field is
the negated gradient and the scheme is the classical damped heavy-ball
iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from imog.expressions import EvaluationDomainError
from imog.minnorm import min_norm_point
from imog.objectives import VectorObjective, steepest_descent

SCHEMES = ("imog", "mog")

_POSITION_BOUND = 1e12


class DivergenceError(RuntimeError):
    """A step left the finite range; carries the offending raw state."""

    def __init__(self, t: float, u: np.ndarray, v: np.ndarray):
        super().__init__(f"trajectory diverged at t={t!r}")
        self.t = t
        self.u = u
        self.v = v


@dataclass(frozen=True)
class DynParams:
    """Mass, viscous damping, step size, and start time of an integration."""

    mass: float
    damping: float
    step: float
    t0: float = 0.0

    def __post_init__(self) -> None:
        for name in ("mass", "damping", "step"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not np.isfinite(self.t0):
            raise ValueError("t0 must be finite")


@dataclass(frozen=True)
class DynState:
    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u and v must be 1-d vectors of equal dimension")
        if not (np.isfinite(self.t) and np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("state has non-finite coordinates")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class StopRule:
    """Stop on criticality (both tolerances met), step budget, or divergence."""

    max_steps: int = 1_000_000
    crit_tol: float = 1e-6
    vel_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.crit_tol <= 0:
            raise ValueError("crit_tol must be positive")
        if self.vel_tol < 0:
            raise ValueError("vel_tol must be nonnegative")


@dataclass
class Trajectory:
    """Recorded states plus per-step diagnostics, one row per state.

    ``values`` holds the objective vectors, ``energies`` the per-objective
    Lyapunov quantities f_i + (m/g) <grad f_i, v> + m ||v||^2, ``snorms`` the
    descent-field norms, and ``thetas`` the convex weights selected by the
    minimum-norm projection.
    """

    params: DynParams
    scheme: str
    states: list[DynState] = field(default_factory=list)
    values: np.ndarray = None
    energies: np.ndarray = None
    snorms: np.ndarray = None
    thetas: np.ndarray = None
    stop_reason: str = ""

    def __len__(self) -> int:
        return len(self.states)

    def times(self) -> np.ndarray:
        return np.array([st.t for st in self.states])

    def positions(self) -> np.ndarray:
        return np.stack([st.u for st in self.states])

    def velocities(self) -> np.ndarray:
        return np.stack([st.v for st in self.states])


def _advance(params: DynParams, state: DynState, s_dir: np.ndarray, t_next: float) -> DynState:
    h, m, g = params.step, params.mass, params.damping
    v_next = (m * state.v + h * s_dir) / (m + h * g)
    u_next = state.u + h * v_next
    _check_finite(t_next, u_next, v_next)
    return DynState(t=t_next, u=u_next, v=v_next)


def _check_finite(t: float, u: np.ndarray, v: np.ndarray) -> None:
    if (
        not np.all(np.isfinite(u))
        or not np.all(np.isfinite(v))
        or float(np.linalg.norm(u)) > _POSITION_BOUND
    ):
        raise DivergenceError(t, u, v)


def imog_step(obj: VectorObjective, params: DynParams, state: DynState) -> DynState:
    """One inertial step driven by the common-descent field at the current point."""
    s = steepest_descent(obj, state.u)
    return _advance(params, state, s.direction, state.t + params.step)


def mog_step(obj: VectorObjective, h: float, u) -> np.ndarray:
    """Explicit Euler step of the first-order flow: u + h s(u)."""
    if h <= 0:
        raise ValueError("h must be positive")
    point = np.asarray(u, dtype=np.float64)
    s = steepest_descent(obj, point)
    u_next = point + h * s.direction
    _check_finite(0.0, u_next, np.zeros_like(u_next))
    return u_next


def hbf_step(obj: VectorObjective, params: DynParams, state: DynState) -> DynState:
    """Heavy-ball step for a single objective; same code path as imog_step."""
    if obj.count != 1:
        raise ValueError(f"heavy-ball stepping needs exactly one objective, got {obj.count}")
    return imog_step(obj, params, state)


def default_initial_velocity(obj: VectorObjective, u0, lam: float, damping: float) -> np.ndarray:
    """Initial velocity lam * s(u0) for lam in [0, 1/damping].

    Within that range the velocity satisfies
    <grad f_i(u0), v0> <= -damping * ||v0||^2  for every objective, which
    keeps every value at or below its starting level along the flow.  The
    inequality is re-verified numerically and a violation beyond 1e-9 is
    rejected.
    """
    if damping <= 0:
        raise ValueError("damping must be positive")
    if not 0.0 <= lam <= 1.0 / damping:
        raise ValueError(
            f"lambda={lam!r} outside the admissible interval [0, {1.0 / damping!r}]"
        )
    s = steepest_descent(obj, u0)
    v0 = lam * s.direction
    grads = obj.gradient_rows(u0)
    margin = float(np.max(grads @ v0) + damping * float(v0 @ v0))
    if margin > 1e-9:
        raise ValueError(f"initial velocity violates the decrease condition by {margin:.3e}")
    return v0


def integrate(
    obj: VectorObjective,
    params: DynParams,
    initial: DynState,
    stop: StopRule | None = None,
    scheme: str = "imog",
) -> Trajectory:
    """Step from ``initial`` until criticality, the step budget, or divergence.

    Criticality means ||s(u_n)|| <= crit_tol and ||v_n|| <= vel_tol.  With
    the first-order scheme the recorded velocity is the flow velocity s(u_n)
    and the initial velocity of ``initial`` is ignored.  Divergence is
    recorded as a stop reason on the trajectory, keeping the last finite
    state.  Deterministic: identical inputs give identical trajectories.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if stop is None:
        stop = StopRule()
    if initial.u.shape != (obj.dim,):
        raise ValueError(f"initial point has dimension {initial.u.shape[0]}, problem wants {obj.dim}")

    h, m, g = params.step, params.mass, params.damping
    t_start = initial.t
    traj = Trajectory(params=params, scheme=scheme)
    values, energies, snorms, thetas = [], [], [], []

    state = initial
    n = 0
    while True:
        try:
            grads = obj.gradient_rows(state.u)
            mn = min_norm_point(grads)
            s_dir = -mn.point
            if scheme == "mog":
                state = DynState(t=state.t, u=state.u, v=s_dir)
            vals = obj.value(state.u)
            if not np.all(np.isfinite(vals)):
                raise EvaluationDomainError("objective value is not finite")
        except (EvaluationDomainError, DivergenceError):
            if not traj.states:
                raise
            traj.stop_reason = "divergence"
            break

        speed2 = float(state.v @ state.v)
        energy = vals + (m / g) * (grads @ state.v) + m * speed2
        traj.states.append(state)
        values.append(vals)
        energies.append(energy)
        snorms.append(mn.norm)
        thetas.append(mn.weights.theta)

        if mn.norm <= stop.crit_tol and np.sqrt(speed2) <= stop.vel_tol:
            traj.stop_reason = "criticality"
            break
        if n == stop.max_steps:
            traj.stop_reason = "max_steps"
            break

        t_next = t_start + (n + 1) * h
        try:
            if scheme == "imog":
                state = _advance(params, state, s_dir, t_next)
            else:
                u_next = state.u + h * s_dir
                _check_finite(t_next, u_next, state.v)
                state = DynState(t=t_next, u=u_next, v=state.v)
        except DivergenceError:
            traj.stop_reason = "divergence"
            break
        n += 1

    traj.values = np.array(values)
    traj.energies = np.array(energies)
    traj.snorms = np.array(snorms)
    traj.thetas = np.array(thetas)
    return traj


def step_halving_error(
    obj: VectorObjective,
    params: DynParams,
    initial: DynState,
    n_steps: int,
    scheme: str = "imog",
) -> float:
    """Distance at the common final time between runs at step h and h/2.

    Certifies first-order consistency: halving the step should roughly halve
    the error, so this quantity shrinks by about two per halving.  Divergence
    propagates.
    """
    if n_steps < 2 or n_steps % 2 != 0:
        raise ValueError("n_steps must be a positive even integer")
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    coarse = _run_fixed(obj, params, initial, n_steps, scheme)
    fine_params = DynParams(params.mass, params.damping, params.step / 2.0, params.t0)
    fine = _run_fixed(obj, fine_params, initial, 2 * n_steps, scheme)
    return float(np.linalg.norm(coarse - fine))


def _run_fixed(obj, params, initial, n_steps, scheme) -> np.ndarray:
    """Position after exactly n_steps steps, no stopping rule."""
    u, v = initial.u, initial.v
    h, m, g = params.step, params.mass, params.damping
    for k in range(n_steps):
        s_dir = -min_norm_point(obj.gradient_rows(u)).point
        if scheme == "imog":
            v = (m * v + h * s_dir) / (m + h * g)
            u = u + h * v
        else:
            u = u + h * s_dir
        _check_finite(initial.t + (k + 1) * h, u, v)
    return u
