"""Minimum-norm element of the convex hull of a finite set of vectors.

Solves  min { ||x|| : x in co{g_1, ..., g_q} }  and returns the minimizer
together with convex coefficients certifying hull membership.  The point is
the Euclidean projection of the origin onto the polytope spanned by the
vertices, characterized by  <p, g_i - p> >= 0  for every vertex g_i.

The solver is Wolfe's minimum-norm-point algorithm over the vertex set; a
closed form handles the one- and two-vector cases.  The vertex count q is
the number of objective functions in the intended use, so the per-iteration
linear solves are tiny.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_TOL = 1e-10

# corral coefficients at or below this are treated as zero and pruned
_PRUNE_EPS = 1e-12

_BRUTE_FORCE_MAX_Q = 4
_BRUTE_FORCE_CHUNK = 1 << 18


@dataclass(frozen=True)
class SimplexWeights:
    """Nonnegative coefficients summing to one (a point of the unit simplex)."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.ndim != 1 or theta.size == 0:
            raise ValueError("weights must be a nonempty 1-d vector")
        if not np.all(np.isfinite(theta)):
            raise ValueError("weights must be finite")
        if np.any(theta < 0.0):
            raise ValueError("weights must be nonnegative")
        if abs(float(theta.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "theta", theta)

    def __len__(self) -> int:
        return int(self.theta.size)


@dataclass(frozen=True)
class MinNormResult:
    """Projection of the origin onto a hull: the point, its convex weights, its norm."""

    point: np.ndarray
    weights: SimplexWeights
    norm: float


def as_gradient_bundle(vectors) -> np.ndarray:
    """Validate and return a (q, d) float64 array of hull vertices.

    Raises ValueError on an empty set, inconsistent dimensions, or
    non-finite coordinates.
    """
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a (q, d) array of vectors, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("bundle contains non-finite coordinates")
    return arr


def min_norm_point(bundle, tol: float = DEFAULT_TOL) -> MinNormResult:
    """Minimum-norm point of co{g_1, ..., g_q} with certifying weights.

    Stops when the duality gap  max_i <p, p - g_i>  drops to ``tol`` (which
    certifies <p, g_i - p> >= -tol for every vertex).  Deterministic: ties in
    vertex selection go to the lowest index.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    vectors = as_gradient_bundle(bundle)
    q = vectors.shape[0]
    if q == 1:
        return _singleton_result(vectors[0])
    if q == 2:
        return min_norm_point_pair(vectors[0], vectors[1])
    point, theta = _wolfe(vectors, tol)
    return _assemble(vectors, theta)


def min_norm_point_pair(g1, g2) -> MinNormResult:
    """Closed form for the two-vector case: project 0 onto the segment [g1, g2]."""
    a = np.asarray(g1, dtype=np.float64).reshape(-1)
    b = np.asarray(g2, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("bundle contains non-finite coordinates")
    diff = a - b
    denom = float(diff @ diff)
    if denom == 0.0:
        # degenerate segment
        return _assemble(np.stack([a, b]), np.array([1.0, 0.0]))
    t = float(diff @ a) / denom
    t = min(1.0, max(0.0, t))
    if t == 0.0:
        return _assemble(np.stack([a, b]), np.array([1.0, 0.0]))
    if t == 1.0:
        return _assemble(np.stack([a, b]), np.array([0.0, 1.0]))
    return _assemble(np.stack([a, b]), np.array([1.0 - t, t]))


def brute_force_min_norm(bundle, resolution: int) -> MinNormResult:
    """Exhaustive lattice search over {theta : theta_i = k_i/resolution}.

    Test oracle only: enumerates the full simplex grid, so q is capped at
    four.  Returns the lattice point of least norm (lowest index on ties).
    """
    vectors = as_gradient_bundle(bundle)
    q = vectors.shape[0]
    if q > _BRUTE_FORCE_MAX_Q:
        raise ValueError(
            f"brute_force_min_norm supports at most q={_BRUTE_FORCE_MAX_Q} vectors, got {q}"
        )
    resolution = int(resolution)
    if resolution < 1:
        raise ValueError("resolution must be a positive integer")
    weights = _simplex_lattice(q, resolution)
    best_norm2 = np.inf
    best_row = 0
    for start in range(0, weights.shape[0], _BRUTE_FORCE_CHUNK):
        chunk = weights[start : start + _BRUTE_FORCE_CHUNK]
        pts = chunk @ vectors
        norms2 = np.einsum("ij,ij->i", pts, pts)
        i = int(np.argmin(norms2))
        if norms2[i] < best_norm2:
            best_norm2 = float(norms2[i])
            best_row = start + i
    return _assemble(vectors, np.array(weights[best_row], dtype=np.float64))


def _singleton_result(g: np.ndarray) -> MinNormResult:
    # exact: the hull is one point
    return MinNormResult(
        point=g.copy(),
        weights=SimplexWeights(np.array([1.0])),
        norm=float(np.linalg.norm(g)),
    )


def _assemble(vectors: np.ndarray, theta: np.ndarray) -> MinNormResult:
    theta = np.maximum(theta, 0.0)
    theta = theta / float(theta.sum())
    point = theta @ vectors
    return MinNormResult(
        point=point,
        weights=SimplexWeights(theta),
        norm=float(np.linalg.norm(point)),
    )


def _wolfe(vectors: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Wolfe's algorithm: maintain a corral of vertices whose affine hull
    contains the current iterate with positive weights."""
    q = vectors.shape[0]
    norms2 = np.einsum("ij,ij->i", vectors, vectors)
    corral = [int(np.argmin(norms2))]
    lam = np.array([1.0])
    x = vectors[corral[0]].copy()

    max_major = 16 * q + 64
    for _ in range(max_major):
        dots = vectors @ x
        gap = float(x @ x) - float(dots.min())
        if gap <= tol:
            break
        j = int(np.argmin(dots))
        if j in corral:
            # x is already the affine minimizer over a corral containing the
            # best vertex; any residual gap is floating-point noise
            break
        corral.append(j)
        lam = np.append(lam, 0.0)
        lam, corral = _minor_cycles(vectors, lam, corral)
        x = lam @ vectors[corral]
    else:
        raise RuntimeError("minimum-norm iteration failed to converge")

    theta = np.zeros(q)
    theta[corral] = lam
    return x, theta


def _minor_cycles(
    vectors: np.ndarray, lam: np.ndarray, corral: list[int]
) -> tuple[np.ndarray, list[int]]:
    """Shrink the corral until the affine minimizer has all-positive weights."""
    while True:
        alpha = _affine_minimizer_weights(vectors[corral])
        if alpha.min() > _PRUNE_EPS:
            return alpha, corral
        drop = alpha <= _PRUNE_EPS
        denom = lam - alpha
        valid = drop & (denom > _PRUNE_EPS)
        if valid.any():
            step = min(1.0, float((lam[valid] / denom[valid]).min()))
            lam = (1.0 - step) * lam + step * alpha
        else:
            # stalled boundary case: fall back to the clipped minimizer
            lam = np.maximum(alpha, 0.0)
        keep = lam > _PRUNE_EPS
        if not keep.any():
            keep[int(np.argmax(lam))] = True
        corral = [c for c, k in zip(corral, keep) if k]
        lam = lam[keep]
        lam = lam / float(lam.sum())
        if len(corral) == 1:
            return lam, corral


def _affine_minimizer_weights(points: np.ndarray) -> np.ndarray:
    """Weights of the least-norm point of the affine hull of ``points``.

    Solves  min ||sum_j a_j p_j||  s.t.  sum_j a_j = 1  through the bordered
    Gram system; least squares tolerates affinely dependent vertices.
    """
    k = points.shape[0]
    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = points @ points.T
    system[:k, k] = 1.0
    system[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(system, rhs, rcond=None)[0]
    return sol[:k]


@lru_cache(maxsize=8)
def _simplex_lattice(q: int, resolution: int) -> np.ndarray:
    """All q-part compositions of ``resolution``, scaled to the unit simplex."""
    r = resolution
    if q == 1:
        counts = np.array([[r]], dtype=np.int64)
    elif q == 2:
        k = np.arange(r + 1, dtype=np.int64)
        counts = np.stack([k, r - k], axis=1)
    else:
        grid = np.indices((r + 1,) * (q - 1), dtype=np.int64).reshape(q - 1, -1).T
        grid = grid[grid.sum(axis=1) <= r]
        counts = np.concatenate([grid, (r - grid.sum(axis=1))[:, None]], axis=1)
    weights = counts.astype(np.float64) / float(r)
    weights.setflags(write=False)
    return weights
