"""Vector objectives, Pareto order predicates, and the common-descent field.

A vector objective packages q smooth scalar functions over R^d with their
gradient oracles.  The steepest common-descent direction at u is the negated
minimum-norm element of co{grad f_i(u)}; it vanishes exactly at Pareto
critical points and satisfies

    <grad f_i(u), s(u)> <= -||s(u)||^2       for every i,

so every objective decreases along it.  Builtin benchmark problems come with
closed-form piecewise fields and known Pareto sets, usable as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from imog.expressions import (
    ExpressionObjective,
    finite_diff_gradient,
    parse_expression,
)
from imog.minnorm import DEFAULT_TOL, SimplexWeights, min_norm_point


class UnknownProblemError(LookupError):
    """Requested builtin problem does not exist."""


class ProblemDefinitionError(ValueError):
    """Invalid problem definition; ``errors`` lists (path, message) pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        lines = "; ".join(f"{path}: {msg}" for path, msg in errors)
        super().__init__(f"invalid problem definition: {lines}")
        self.errors = errors


@dataclass(frozen=True)
class VectorObjective:
    """A family of q scalar objectives over R^d with gradient oracles.

    ``lipschitz_bounds`` holds optional global bounds on the gradient
    Lipschitz constants; ``fd_gradient`` flags objectives whose gradient is a
    central-difference approximation rather than analytic.  Immutable after
    construction; evaluations are reentrant.
    """

    dim: int
    evaluators: tuple[Callable, ...]
    gradients: tuple[Callable, ...]
    labels: tuple[str, ...]
    lipschitz_bounds: tuple[float, ...] | None = None
    fd_gradient: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        q = len(self.evaluators)
        if q < 1:
            raise ValueError("need at least one objective")
        if len(self.gradients) != q or len(self.labels) != q:
            raise ValueError("evaluators, gradients, and labels must have equal length")
        if self.lipschitz_bounds is not None:
            if len(self.lipschitz_bounds) != q:
                raise ValueError("lipschitz_bounds must have one entry per objective")
            if any(b < 0 for b in self.lipschitz_bounds):
                raise ValueError("lipschitz bounds must be nonnegative")
        if self.fd_gradient is None:
            object.__setattr__(self, "fd_gradient", (False,) * q)
        elif len(self.fd_gradient) != q:
            raise ValueError("fd_gradient must have one flag per objective")

    @property
    def count(self) -> int:
        return len(self.evaluators)

    def value(self, u) -> np.ndarray:
        """Objective vector F(u), shape (q,)."""
        point = np.asarray(u, dtype=np.float64)
        return np.array([f(point) for f in self.evaluators], dtype=np.float64)

    def gradient_rows(self, u) -> np.ndarray:
        """Stacked gradients at u, shape (q, d)."""
        point = np.asarray(u, dtype=np.float64)
        return np.stack([np.asarray(g(point), dtype=np.float64) for g in self.gradients])


@dataclass(frozen=True)
class SteepestResult:
    """Common-descent direction with the convex weights that produce it."""

    direction: np.ndarray
    weights: SimplexWeights
    norm: float


# ---------------------------------------------------------------------------
# order predicates and the non-dominated filter

def dominates(a, b) -> bool:
    """Componentwise order: a_i <= b_i for every i."""
    a, b = _paired(a, b)
    return bool(np.all(a <= b))


def strictly_dominates_weak(a, b) -> bool:
    """Strict componentwise order: a_i < b_i for every i."""
    a, b = _paired(a, b)
    return bool(np.all(a < b))


def _paired(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"objective vectors have different lengths: {a.size} vs {b.size}")
    return a, b


def pareto_filter(cloud: Sequence[tuple], weak: bool = False) -> list[tuple]:
    """Keep the entries whose objective vector no other entry improves.

    An entry is dropped when some other entry is componentwise <= with at
    least one strict improvement (``weak=True`` instead requires strict
    improvement in every component).  Input order is preserved; the pairwise
    scan is quadratic in the cloud size.
    """
    cloud = list(cloud)
    if not cloud:
        raise ValueError("empty cloud")
    values = np.array([np.asarray(v, dtype=np.float64).reshape(-1) for _, v in cloud])
    if values.ndim != 2:
        raise ValueError("inconsistent objective vector lengths")
    keep: list[tuple] = []
    for k in range(values.shape[0]):
        others = np.delete(values, k, axis=0)
        if weak:
            beaten = np.any(np.all(others < values[k], axis=1))
        else:
            leq = np.all(others <= values[k], axis=1)
            strict = np.any(others < values[k], axis=1)
            beaten = np.any(leq & strict)
        if not beaten:
            keep.append(cloud[k])
    return keep


# ---------------------------------------------------------------------------
# the steepest common-descent field

def steepest_descent(obj: VectorObjective, u, tol: float = DEFAULT_TOL) -> SteepestResult:
    """Steepest common-descent direction at u: the negated projection of the
    origin onto the hull of the gradients.  With a single objective this is
    exactly the negated gradient."""
    point = np.asarray(u, dtype=np.float64)
    if point.shape != (obj.dim,):
        raise ValueError(f"expected a point of dimension {obj.dim}, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise ValueError("point has non-finite coordinates")
    res = min_norm_point(obj.gradient_rows(point), tol=tol)
    return SteepestResult(direction=-res.point, weights=res.weights, norm=res.norm)


def is_pareto_critical(obj: VectorObjective, u, eps: float) -> bool:
    """First-order criticality: the origin lies in the gradient hull up to eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return steepest_descent(obj, u).norm <= eps


def steepest_characterization_gap(
    obj: VectorObjective, u, sample_directions
) -> float:
    """Margin by which the normalized descent direction beats sampled unit
    directions on the worst-case derivative  max_i <grad f_i(u), d>.

    Nonnegative output certifies no sampled direction does better.  Must not
    be called at a critical point.
    """
    s = steepest_descent(obj, u)
    if s.norm == 0.0:
        raise ValueError("characterization gap is undefined at a critical point")
    directions = np.asarray(sample_directions, dtype=np.float64)
    if directions.ndim == 1:
        directions = directions.reshape(1, -1)
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ValueError("sample directions must be unit vectors")
    grads = obj.gradient_rows(u)
    best_sampled = float(np.min(np.max(grads @ directions.T, axis=0)))
    own = float(np.max(grads @ (s.direction / s.norm)))
    return best_sampled - own


# ---------------------------------------------------------------------------
# builtin benchmark problems

BUILTIN_PROBLEMS = ("biquadratic", "quadratic_linear", "hbf_quadratic", "convex_quadratic")


@dataclass(frozen=True)
class ProblemInfo:
    name: str
    dim: int
    count: int
    lipschitz: tuple[float, ...] | None
    pareto_description: str


def _biquadratic() -> VectorObjective:
    def f1(u):
        return 0.5 * (u[0] + 1.0) ** 2 + 0.5 * u[1] ** 2

    def f2(u):
        return 0.5 * (u[0] - 1.0) ** 2 + 0.5 * u[1] ** 2

    def g1(u):
        return np.array([u[0] + 1.0, u[1]])

    def g2(u):
        return np.array([u[0] - 1.0, u[1]])

    return VectorObjective(
        dim=2,
        evaluators=(f1, f2),
        gradients=(g1, g2),
        labels=("f1", "f2"),
        lipschitz_bounds=(1.0, 1.0),
    )


def _quadratic_linear() -> VectorObjective:
    def f1(u):
        return 0.5 * (u[0] ** 2 + u[1] ** 2)

    def f2(u):
        return u[0]

    def g1(u):
        return np.array([u[0], u[1]])

    def g2(u):
        return np.array([1.0, 0.0])

    return VectorObjective(
        dim=2,
        evaluators=(f1, f2),
        gradients=(g1, g2),
        labels=("f1", "f2"),
        lipschitz_bounds=(1.0, 0.0),
    )


def _hbf_quadratic() -> VectorObjective:
    def f(u):
        return 0.5 * (u[0] ** 2 + u[1] ** 2)

    def g(u):
        return np.array([u[0], u[1]])

    return VectorObjective(
        dim=2,
        evaluators=(f,),
        gradients=(g,),
        labels=("f1",),
        lipschitz_bounds=(1.0,),
    )


def _convex_quadratic(centers=None, matrices=None, labels=None) -> VectorObjective:
    """f_i(u) = 0.5 (u - a_i)^T Q_i (u - a_i) with symmetric PSD Q_i."""
    if centers is None:
        raise ValueError("convex_quadratic requires 'centers'")
    centers = [np.asarray(a, dtype=np.float64).reshape(-1) for a in centers]
    q = len(centers)
    if q < 1:
        raise ValueError("need at least one center")
    dim = centers[0].shape[0]
    if any(a.shape != (dim,) for a in centers):
        raise ValueError("centers must share one dimension")
    if matrices is None:
        mats = [np.eye(dim) for _ in range(q)]
    else:
        mats = [np.asarray(m, dtype=np.float64) for m in matrices]
        if len(mats) != q:
            raise ValueError("need one matrix per center")
        for m in mats:
            if m.shape != (dim, dim):
                raise ValueError("matrices must be (d, d)")
            if not np.allclose(m, m.T, atol=1e-10):
                raise ValueError("matrices must be symmetric")
            if np.linalg.eigvalsh(m).min() < -1e-10:
                raise ValueError("matrices must be positive semidefinite")
    bounds = tuple(float(np.linalg.eigvalsh(m).max()) for m in mats)
    if labels is None:
        labels = tuple(f"f{i + 1}" for i in range(q))

    def make(a, m):
        def f(u):
            r = u - a
            return 0.5 * float(r @ m @ r)

        def g(u):
            return m @ (u - a)

        return f, g

    pairs = [make(a, m) for a, m in zip(centers, mats)]
    return VectorObjective(
        dim=dim,
        evaluators=tuple(f for f, _ in pairs),
        gradients=tuple(g for _, g in pairs),
        labels=tuple(labels),
        lipschitz_bounds=bounds,
    )


def builtin_problem(name: str, **params) -> VectorObjective:
    """Instantiate a builtin benchmark problem by name.

    ``convex_quadratic`` takes family parameters (``centers``, optional
    ``matrices`` and ``labels``); the fixed problems take none.
    """
    if name == "convex_quadratic":
        return _convex_quadratic(**params)
    if params:
        raise ValueError(f"problem {name!r} takes no parameters")
    if name == "biquadratic":
        return _biquadratic()
    if name == "quadratic_linear":
        return _quadratic_linear()
    if name == "hbf_quadratic":
        return _hbf_quadratic()
    raise UnknownProblemError(name)


def problem_info(name: str) -> ProblemInfo:
    if name == "biquadratic":
        return ProblemInfo(name, 2, 2, (1.0, 1.0), "[-1,1]x{0}")
    if name == "quadratic_linear":
        return ProblemInfo(name, 2, 2, (1.0, 0.0), "(-inf,0]x{0}")
    if name == "hbf_quadratic":
        return ProblemInfo(name, 2, 1, (1.0,), "{(0,0)}")
    if name == "convex_quadratic":
        return ProblemInfo(
            name, 0, 0, None, "family: depends on the chosen centers and matrices"
        )
    raise UnknownProblemError(name)


def analytic_steepest(name: str, u) -> np.ndarray:
    """Closed-form piecewise common-descent field of a planar builtin problem.

    Oracle counterpart to :func:`steepest_descent` for ``biquadratic`` and
    ``quadratic_linear``.
    """
    point = np.asarray(u, dtype=np.float64)
    x, y = float(point[0]), float(point[1])
    if name == "biquadratic":
        if x > 1.0:
            return np.array([-(x - 1.0), -y])
        if x < -1.0:
            return np.array([-(x + 1.0), -y])
        return np.array([0.0, -y])
    if name == "quadratic_linear":
        if x >= 1.0:
            return np.array([-1.0, 0.0])
        if (x - 0.5) ** 2 + y * y <= 0.25:
            return np.array([-x, -y])
        denom = (x - 1.0) ** 2 + y * y
        return np.array([-(y * y) / denom, -(y * (1.0 - x)) / denom])
    raise UnknownProblemError(name)


# ---------------------------------------------------------------------------
# expression-defined problems

@dataclass(frozen=True)
class GradientCheckResult:
    """Agreement between a supplied analytic gradient and central differences."""

    label: str
    max_rel_error: float
    tolerance: float
    passed: bool
    points_checked: int


_GRADIENT_CHECK_TOL = 1e-4
_GRADIENT_CHECK_POINTS = 10


def load_problem_definition(mapping) -> tuple[VectorObjective, list[GradientCheckResult]]:
    """Build a VectorObjective from a problem-definition mapping.

    Schema: ``{"dim": d, "objectives": [{"name", "expr" | "builtin",
    optional "grad": [exprs], optional "lipschitz": L}]}``; unknown fields
    are rejected.  ``builtin`` selects one scalar component of a builtin
    problem as ``"<problem>:<index>"``.  Supplied analytic gradients are
    cross-checked against central differences at random points; the check
    results come back alongside the objective (callers decide whether a
    failure is fatal).
    """
    errors: list[tuple[str, str]] = []
    if not isinstance(mapping, dict):
        raise ProblemDefinitionError([("", "definition must be a JSON object")])
    unknown = set(mapping) - {"dim", "objectives"}
    for key in sorted(unknown):
        errors.append((key, "unknown field"))
    dim = mapping.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        errors.append(("dim", "must be a positive integer"))
        dim = None
    entries = mapping.get("objectives")
    if not isinstance(entries, list) or not entries:
        errors.append(("objectives", "must be a nonempty list"))
        entries = []

    evaluators: list[Callable] = []
    gradients: list[Callable] = []
    labels: list[str] = []
    bounds: list[float | None] = []
    fd_flags: list[bool] = []
    checks: list[GradientCheckResult] = []

    for k, entry in enumerate(entries):
        path = f"objectives[{k}]"
        if not isinstance(entry, dict):
            errors.append((path, "must be an object"))
            continue
        unknown = set(entry) - {"name", "expr", "builtin", "grad", "lipschitz"}
        for key in sorted(unknown):
            errors.append((f"{path}.{key}", "unknown field"))
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            errors.append((f"{path}.name", "must be a nonempty string"))
            name = f"f{k + 1}"
        has_expr = "expr" in entry
        has_builtin = "builtin" in entry
        if has_expr == has_builtin:
            errors.append((path, "needs exactly one of 'expr' or 'builtin'"))
            continue
        lip = entry.get("lipschitz")
        if lip is not None and (not isinstance(lip, (int, float)) or isinstance(lip, bool) or lip < 0):
            errors.append((f"{path}.lipschitz", "must be a nonnegative number"))
            lip = None

        if has_builtin:
            picked = _pick_builtin_component(entry["builtin"], dim, errors, path)
            if picked is None:
                continue
            evaluator, gradient, component_lip = picked
            evaluators.append(evaluator)
            gradients.append(gradient)
            labels.append(name)
            bounds.append(float(lip) if lip is not None else component_lip)
            fd_flags.append(False)
            continue

        expr_src = entry["expr"]
        if not isinstance(expr_src, str):
            errors.append((f"{path}.expr", "must be a string"))
            continue
        try:
            expr = parse_expression(expr_src)
        except ValueError as exc:
            errors.append((f"{path}.expr", str(exc)))
            continue
        if dim is not None and expr.dim > dim:
            errors.append((f"{path}.expr", f"uses x{expr.dim - 1} but dim is {dim}"))
            continue

        grad_exprs = entry.get("grad")
        if grad_exprs is None:
            evaluators.append(expr)
            gradients.append(_fd_gradient_fn(expr))
            labels.append(name)
            bounds.append(float(lip) if lip is not None else None)
            fd_flags.append(True)
            continue

        if not isinstance(grad_exprs, list) or (dim is not None and len(grad_exprs) != dim):
            errors.append((f"{path}.grad", f"must be a list of {dim} expressions"))
            continue
        parsed_grad = []
        ok = True
        for j, src in enumerate(grad_exprs):
            try:
                g = parse_expression(src) if isinstance(src, str) else None
                if g is None:
                    raise ValueError("must be a string")
                if dim is not None and g.dim > dim:
                    raise ValueError(f"uses x{g.dim - 1} but dim is {dim}")
                parsed_grad.append(g)
            except ValueError as exc:
                errors.append((f"{path}.grad[{j}]", str(exc)))
                ok = False
        if not ok:
            continue
        gradient = _analytic_gradient_fn(parsed_grad)
        if dim is not None:
            checks.append(_cross_check_gradient(name, expr, gradient, dim))
        evaluators.append(expr)
        gradients.append(gradient)
        labels.append(name)
        bounds.append(float(lip) if lip is not None else None)
        fd_flags.append(False)

    if errors:
        raise ProblemDefinitionError(errors)

    lipschitz = None
    if all(b is not None for b in bounds):
        lipschitz = tuple(float(b) for b in bounds)
    obj = VectorObjective(
        dim=int(dim),
        evaluators=tuple(evaluators),
        gradients=tuple(gradients),
        labels=tuple(labels),
        lipschitz_bounds=lipschitz,
        fd_gradient=tuple(fd_flags),
    )
    return obj, checks


def _pick_builtin_component(spec, dim, errors, path):
    if not isinstance(spec, str) or ":" not in spec:
        errors.append((f"{path}.builtin", "must be '<problem>:<index>'"))
        return None
    problem_name, _, index_text = spec.partition(":")
    try:
        source = builtin_problem(problem_name)
    except UnknownProblemError:
        errors.append((f"{path}.builtin", f"unknown builtin problem {problem_name!r}"))
        return None
    except ValueError as exc:
        errors.append((f"{path}.builtin", str(exc)))
        return None
    if not index_text.isdigit() or int(index_text) >= source.count:
        errors.append(
            (f"{path}.builtin", f"index must be in 0..{source.count - 1} for {problem_name!r}")
        )
        return None
    if dim is not None and source.dim != dim:
        errors.append((f"{path}.builtin", f"{problem_name!r} has dim {source.dim}, file says {dim}"))
        return None
    i = int(index_text)
    lip = source.lipschitz_bounds[i] if source.lipschitz_bounds else None
    return source.evaluators[i], source.gradients[i], lip


def _fd_gradient_fn(expr: ExpressionObjective) -> Callable:
    def gradient(u):
        return finite_diff_gradient(expr, u)

    return gradient


def _analytic_gradient_fn(components: list[ExpressionObjective]) -> Callable:
    def gradient(u):
        return np.array([c(u) for c in components], dtype=np.float64)

    return gradient


def _cross_check_gradient(label, expr, gradient, dim) -> GradientCheckResult:
    rng = np.random.default_rng(0)
    worst = 0.0
    checked = 0
    for _ in range(5 * _GRADIENT_CHECK_POINTS):
        if checked >= _GRADIENT_CHECK_POINTS:
            break
        u = rng.normal(size=dim)
        try:
            fd = finite_diff_gradient(expr, u)
            analytic = np.asarray(gradient(u), dtype=np.float64)
        except ArithmeticError:
            continue  # point outside the expression's domain; draw another
        scale = np.maximum(1.0, np.abs(analytic))
        worst = max(worst, float(np.max(np.abs(fd - analytic) / scale)))
        checked += 1
    return GradientCheckResult(
        label=label,
        max_rel_error=worst,
        tolerance=_GRADIENT_CHECK_TOL,
        passed=checked > 0 and worst <= _GRADIENT_CHECK_TOL,
        points_checked=checked,
    )
