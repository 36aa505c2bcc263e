"""Classical adaptive shape-parameter selectors.

Hardy:            eps = 1 / (0.815 * d),  d = mean nearest-neighbour distance
Franke:           eps = 0.8 * sqrt(N) / D
modified Franke:  eps = 0.8 * N^(1/4) / D

with D the diameter of the minimal circle enclosing the points (max - min in
one dimension). Rippa's leave-one-out selector computes every leave-one-out
error from a single factorization; the brute-force oracle that refits N
reduced interpolants is kept alongside as an independent check.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .conditioning import frobenius_cond
from .core import (
    Interpolant,
    KernelSpec,
    PointCloud,
    eval_interpolant,
    fit_interpolant,
    interpolation_matrix,
)
from .errors import (
    IllConditionedSolveError,
    NoFeasibleCandidateError,
    SingularMatrixError,
)

# Condition above which a LOOCV candidate is treated as numerically unusable.
SKIP_CONDITION = 1e15

# Default candidate list for the leave-one-out search.
DEFAULT_EPS_CANDIDATES = (
    0.001, 0.002, 0.005, 0.0075, 0.01, 0.02, 0.05, 0.075, 0.1, 0.2, 0.5, 0.75,
    1.0, 2.0, 5.0, 7.5, 10.0, 20.0, 50.0, 75.0, 100.0, 200.0, 500.0, 1000.0,
)


@dataclass(frozen=True)
class EpsGrid:
    """Strictly increasing list of positive candidate shape parameters."""

    candidates: tuple[float, ...] = DEFAULT_EPS_CANDIDATES

    def __post_init__(self):
        c = np.asarray(self.candidates, dtype=float)
        if c.size < 1 or np.any(c <= 0) or np.any(np.diff(c) <= 0):
            raise ValueError("candidates must be strictly increasing and positive")
        object.__setattr__(self, "candidates", tuple(float(x) for x in c))


@dataclass(frozen=True)
class LoocvResult:
    """Outcome of the grid search: chosen eps, per-candidate error norms
    (NaN where skipped), and the indices of skipped candidates."""

    eps: float
    error_norms: np.ndarray
    skipped: tuple[int, ...] = field(default_factory=tuple)


def nearest_neighbor_distances(cloud: PointCloud) -> np.ndarray:
    d = squareform(pdist(cloud.points))
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1)


def hardy_shape(cloud: PointCloud) -> float:
    """1 / (0.815 * mean nearest-neighbour distance)."""
    return float(1.0 / (0.815 * nearest_neighbor_distances(cloud).mean()))


def enclosing_diameter(cloud: PointCloud) -> float:
    """Diameter of the minimal enclosing interval (1-d) or circle (2-d)."""
    if cloud.dim == 1:
        x = cloud.points[:, 0]
        return float(x.max() - x.min())
    return 2.0 * _enclosing_circle(cloud.points)[2]


def franke_shape(cloud: PointCloud) -> float:
    """0.8 * sqrt(N) / D."""
    return float(0.8 * np.sqrt(cloud.n) / enclosing_diameter(cloud))


def modified_franke_shape(cloud: PointCloud) -> float:
    """0.8 * N^(1/4) / D."""
    return float(0.8 * cloud.n**0.25 / enclosing_diameter(cloud))


def rippa_error_vector(
    cloud: PointCloud, values, eps: float, kernel: KernelSpec
) -> np.ndarray:
    """All N leave-one-out errors from one inverse: E_k = (A^-1 f)_k / (A^-1)_kk.

    Raises
    ------
    IllConditionedSolveError
        When the interpolation matrix is unusable at this eps (condition
        above ``SKIP_CONDITION`` or singular); callers performing a grid
        search treat this as a skip signal.
    """
    values = np.asarray(values, dtype=float)
    A = interpolation_matrix(cloud, eps, kernel)
    try:
        cond = frobenius_cond(A)
    except SingularMatrixError:
        raise IllConditionedSolveError(
            f"interpolation matrix singular at eps={eps:g}", estimated_cond=None
        ) from None
    if cond > SKIP_CONDITION:
        raise IllConditionedSolveError(
            f"interpolation matrix condition {cond:.3e} exceeds skip threshold at eps={eps:g}",
            estimated_cond=cond,
        )
    Ainv = np.linalg.inv(A)
    return (Ainv @ values) / np.diag(Ainv)


def loocv_error_vector_direct(
    cloud: PointCloud, values, eps: float, kernel: KernelSpec
) -> np.ndarray:
    """Brute-force oracle: refit N reduced interpolants, one per left-out node."""
    values = np.asarray(values, dtype=float)
    n = cloud.n
    errors = np.empty(n)
    for k in range(n):
        keep = np.arange(n) != k
        reduced = PointCloud(cloud.points[keep])
        s = fit_interpolant(reduced, values[keep], eps, kernel)
        errors[k] = values[k] - eval_interpolant(s, cloud.points[k])
    return errors


def rippa_shape(
    cloud: PointCloud, values, kernel: KernelSpec, grid: EpsGrid = EpsGrid()
) -> LoocvResult:
    """Pick the grid candidate minimizing the Euclidean norm of the
    leave-one-out error vector. Ill-conditioned candidates are skipped;
    ties resolve to the smallest eps.
    """
    norms = np.full(len(grid.candidates), np.nan)
    skipped: list[int] = []
    for i, eps in enumerate(grid.candidates):
        try:
            norms[i] = np.linalg.norm(rippa_error_vector(cloud, values, eps, kernel))
        except IllConditionedSolveError:
            skipped.append(i)
    if np.all(np.isnan(norms)):
        raise NoFeasibleCandidateError(
            f"all {len(grid.candidates)} candidates were skipped as ill-conditioned"
        )
    best = int(np.nanargmin(norms))
    return LoocvResult(grid.candidates[best], norms, tuple(skipped))


def rippa_interpolant(
    cloud: PointCloud, values, kernel: KernelSpec, grid: EpsGrid = EpsGrid()
) -> Interpolant:
    """Convenience: grid-search eps, then fit at the winner."""
    return fit_interpolant(cloud, values, rippa_shape(cloud, values, kernel, grid).eps, kernel)


# ---------------------------------------------------------------------------
# Minimal enclosing circle (Welzl-style incremental construction).
# Points are (n, 2) arrays; circles are (cx, cy, r) tuples.

_EPS_GROW = 1.0 + 1e-12


def _enclosing_circle(points: np.ndarray) -> tuple[float, float, float]:
    pts = [(float(x), float(y)) for x, y in points]
    rng = random.Random(0x5EED)  # fixed order: deterministic, and the circle is unique anyway
    rng.shuffle(pts)
    c = None
    for i, p in enumerate(pts):
        if c is None or not _in_circle(c, p):
            c = _circle_with_one(pts[: i + 1], p)
    assert c is not None
    return c


def _circle_with_one(pts, p):
    c = (p[0], p[1], 0.0)
    for i, q in enumerate(pts):
        if not _in_circle(c, q):
            c = _diameter(p, q) if c[2] == 0.0 else _circle_with_two(pts[: i + 1], p, q)
    return c


def _circle_with_two(pts, p, q):
    circ = _diameter(p, q)
    left = None
    right = None
    px, py = p
    qx, qy = q
    for r in pts:
        if _in_circle(circ, r):
            continue
        cross = _cross(px, py, qx, qy, r[0], r[1])
        c = _circumcircle(p, q, r)
        if c is None:
            continue
        if cross > 0.0 and (left is None or _cross(px, py, qx, qy, c[0], c[1]) > _cross(px, py, qx, qy, left[0], left[1])):
            left = c
        elif cross < 0.0 and (right is None or _cross(px, py, qx, qy, c[0], c[1]) < _cross(px, py, qx, qy, right[0], right[1])):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _diameter(p, q):
    cx = (p[0] + q[0]) / 2.0
    cy = (p[1] + q[1]) / 2.0
    r = max(_dist(p, (cx, cy)), _dist(q, (cx, cy)))
    return (cx, cy, r)


def _circumcircle(a, b, c):
    # Work relative to the bounding-box midpoint for stability.
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0
    if d == 0.0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(_dist((x, y), a), _dist((x, y), b), _dist((x, y), c))
    return (x, y, r)


def _in_circle(c, p):
    return _dist(p, (c[0], c[1])) <= c[2] * _EPS_GROW


def _dist(p, q):
    return float(np.hypot(p[0] - q[0], p[1] - q[1]))


def _cross(x0, y0, x1, y1, x2, y2):
    return (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
