"""RBF-generated finite differences on scattered nodes.

Each interpolation node gets a stencil of its N nearest neighbours. Local
differentiation weights come from the constant-augmented block system

    [ Phi  1 ] [ lambda ]   [ u ]
    [ 1^T  0 ] [ gamma  ] = [ 0 ],

which makes the weights exact for constants: identity weights sum to 1,
Laplacian weights sum to 0. Every evaluation node y is served by the
stencil of its closest center, and the per-stencil weights scatter into a
sparse global operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, squareform, pdist

from .core import KernelSpec, _check_eps, kernel_eval, kernel_laplacian
from .errors import IllConditionedSolveError

IDENTITY = "identity"
LAPLACIAN = "laplacian"


@dataclass(frozen=True)
class NodeSets:
    """Interpolation nodes X (build the approximation space) and evaluation
    nodes Y (where equations are sampled), with boundary flags for each."""

    x: np.ndarray  # (M, dim)
    y: np.ndarray  # (P, dim)
    x_boundary: np.ndarray  # (M,) bool
    y_boundary: np.ndarray  # (P,) bool

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_2d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "y", np.atleast_2d(np.asarray(self.y, dtype=float)))
        object.__setattr__(self, "x_boundary", np.asarray(self.x_boundary, dtype=bool))
        object.__setattr__(self, "y_boundary", np.asarray(self.y_boundary, dtype=bool))
        if self.x_boundary.shape != (self.x.shape[0],):
            raise ValueError("x_boundary must flag every interpolation node")
        if self.y_boundary.shape != (self.y.shape[0],):
            raise ValueError("y_boundary must flag every evaluation node")

    @property
    def oversampling(self) -> float:
        return self.y.shape[0] / self.x.shape[0]

    @classmethod
    def collocation(cls, x: np.ndarray, boundary: np.ndarray) -> "NodeSets":
        return cls(x, x, boundary, boundary)


@dataclass
class StencilSet:
    """Per-center neighbour lists, the evaluation-to-stencil map, and the
    per-stencil shape parameters (set by a selection strategy)."""

    indices: np.ndarray  # (M, N) int
    nu: np.ndarray  # (P,) int: stencil serving each evaluation node
    eps: np.ndarray | None = None  # (M,)


def build_stencils(x: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Index lists of the N nearest nodes to each node (self included).

    Distance ties break toward the lower node index, so the result matches
    a brute-force scan.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m = x.shape[0]
    if m < n_neighbors:
        raise ValueError(f"need at least {n_neighbors} nodes, got {m}")
    tree = cKDTree(x)
    k = min(m, n_neighbors + 8)
    while True:
        dist, idx = tree.query(x, k=k)
        # All ties of the N-th neighbour must fall inside the k candidates.
        if k == m or np.all(dist[:, k - 1] > dist[:, n_neighbors - 1]):
            break
        k = min(m, 2 * k)
    out = np.empty((m, n_neighbors), dtype=np.intp)
    for i in range(m):
        order = np.lexsort((idx[i], dist[i]))
        out[i] = idx[i][order[:n_neighbors]]
    return out


def closest_center_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """For each evaluation node, the index of the nearest center in X
    (exact-distance ties resolve to the lowest index)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    tree = cKDTree(x)
    if x.shape[0] == 1:
        return np.zeros(y.shape[0], dtype=np.intp)
    dist, idx = tree.query(y, k=2)
    nu = idx[:, 0].astype(np.intp)
    ties = dist[:, 0] == dist[:, 1]
    if np.any(ties):
        d = cdist(y[ties], x)
        for row, j in enumerate(np.flatnonzero(ties)):
            nu[j] = np.flatnonzero(d[row] == d[row].min()).min()
    return nu


def build_stencil_set(nodes: NodeSets, n_neighbors: int) -> StencilSet:
    return StencilSet(
        build_stencils(nodes.x, n_neighbors),
        closest_center_map(nodes.x, nodes.y),
    )


def _augmented_matrix(points: np.ndarray, eps: float, kernel: KernelSpec) -> np.ndarray:
    n = points.shape[0]
    full = np.empty((n + 1, n + 1))
    full[:n, :n] = kernel_eval(kernel, squareform(pdist(points)), eps)
    full[:n, n] = 1.0
    full[n, :n] = 1.0
    full[n, n] = 0.0
    return full


def _operator_rhs(points: np.ndarray, eps: float, kernel: KernelSpec, operator: str, y) -> np.ndarray:
    r = np.linalg.norm(points - np.asarray(y, dtype=float), axis=1)
    if operator == IDENTITY:
        return np.concatenate([kernel_eval(kernel, r, eps), [1.0]])
    if operator == LAPLACIAN:
        return np.concatenate([kernel_laplacian(kernel, r, eps, points.shape[1]), [0.0]])
    raise ValueError(f"unknown operator {operator!r}")


def local_weights(points: np.ndarray, eps: float, kernel: KernelSpec, operator: str, y) -> np.ndarray:
    """Differentiation weights w with  L u(y) ~ sum_j w_j u(x_j)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    eps = _check_eps(eps)
    full = _augmented_matrix(points, eps, kernel)
    rhs = _operator_rhs(points, eps, kernel, operator, y)
    try:
        w = scipy.linalg.solve(full, rhs, assume_a="sym")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
        raise IllConditionedSolveError(
            f"stencil system singular at eps={eps:g}", estimated_cond=None
        ) from None
    if not np.all(np.isfinite(w)):
        raise IllConditionedSolveError(f"stencil solve produced non-finite weights at eps={eps:g}")
    return w[: points.shape[0]]


class _StencilSolver:
    """Factor each stencil's augmented matrix once, reuse across operators
    and evaluation nodes."""

    def __init__(self, x: np.ndarray, stencils: StencilSet, eps: np.ndarray, kernel: KernelSpec):
        self.x = x
        self.stencils = stencils
        self.eps = np.asarray(eps, dtype=float)
        self.kernel = kernel
        self._factors: dict[int, tuple] = {}

    def weights(self, stencil_id: int, operator: str, y) -> np.ndarray:
        idx = self.stencils.indices[stencil_id]
        pts = self.x[idx]
        eps = self.eps[stencil_id]
        fac = self._factors.get(stencil_id)
        try:
            if fac is None:
                fac = scipy.linalg.lu_factor(_augmented_matrix(pts, eps, self.kernel))
                self._factors[stencil_id] = fac
            w = scipy.linalg.lu_solve(fac, _operator_rhs(pts, eps, self.kernel, operator, y))
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError, ValueError) as exc:
            raise IllConditionedSolveError(
                f"stencil {stencil_id} failed at eps={eps:g}: {exc}", estimated_cond=None
            ) from None
        if not np.all(np.isfinite(w)):
            raise IllConditionedSolveError(
                f"stencil {stencil_id} produced non-finite weights at eps={eps:g}"
            )
        return w[: len(idx)]


def assemble_global(
    x: np.ndarray,
    y: np.ndarray,
    stencils: StencilSet,
    eps,
    kernel: KernelSpec,
    operator: str,
) -> scipy.sparse.csr_matrix:
    """Sparse P x M operator: row j holds the weights of stencil nu(y_j),
    scattered to that stencil's global column indices."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (x.shape[0],))
    solver = _StencilSolver(x, stencils, eps, kernel)
    n = stencils.indices.shape[1]
    p = y.shape[0]
    rows = np.repeat(np.arange(p), n)
    cols = np.empty(p * n, dtype=np.intp)
    vals = np.empty(p * n)
    for j in range(p):
        i = stencils.nu[j]
        try:
            w = solver.weights(i, operator, y[j])
        except IllConditionedSolveError as exc:
            raise IllConditionedSolveError(
                f"assembly failed at evaluation node {j} (stencil {i}): {exc}",
                estimated_cond=exc.estimated_cond,
                stencil_id=int(i),
            ) from None
        cols[j * n : (j + 1) * n] = stencils.indices[i]
        vals[j * n : (j + 1) * n] = w
    mat = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(p, x.shape[0]))
    return mat.tocsr()


def solve_poisson(
    nodes: NodeSets,
    stencils: StencilSet,
    eps,
    kernel: KernelSpec,
    f_at_y,
    g_at_y,
) -> np.ndarray:
    """Steady solve: Laplacian rows at interior evaluation nodes (= f),
    identity rows at boundary evaluation nodes (= g). Square systems are
    solved directly, oversampled ones by least squares (QR, unweighted rows).
    """
    f_at_y = np.asarray(f_at_y, dtype=float)
    g_at_y = np.asarray(g_at_y, dtype=float)
    p, m = nodes.y.shape[0], nodes.x.shape[0]

    lap = assemble_global(nodes.x, nodes.y, stencils, eps, kernel, LAPLACIAN)
    ident = assemble_global(nodes.x, nodes.y, stencils, eps, kernel, IDENTITY)
    bnd = nodes.y_boundary
    system = scipy.sparse.vstack(
        [lap[~bnd], ident[bnd]], format="csr"
    )
    rhs = np.concatenate([f_at_y[~bnd], g_at_y[bnd]])

    if p == m:
        # Restore row order irrelevant for a direct solve; keep as stacked.
        try:
            return scipy.sparse.linalg.splu(system.tocsc()).solve(rhs)
        except RuntimeError as exc:
            raise IllConditionedSolveError(f"steady solve failed: {exc}") from None
    sol, _, rank, _ = scipy.linalg.lstsq(system.toarray(), rhs)
    if rank < m:
        raise IllConditionedSolveError(f"steady system is rank deficient ({rank} < {m})")
    return sol


def bdf2_heat(
    nodes: NodeSets,
    stencils: StencilSet,
    eps,
    kernel: KernelSpec,
    dt: float,
    t_final: float,
    alpha: float,
    initial_values,
    boundary_fn,
) -> tuple[np.ndarray, np.ndarray]:
    """Method of lines for u_t = alpha * Lap(u) with Dirichlet injection.

    Advances with BDF2 (one implicit-Euler step to start); the operator is
    factored once and reused since meshes are static. After every step the
    boundary nodes are overwritten with ``boundary_fn(points, t)``.

    Returns (times, trajectory) with trajectory[k] the solution at times[k].
    """
    if dt <= 0 or t_final < dt:
        raise ValueError(f"need dt > 0 and t_final >= dt, got dt={dt}, t_final={t_final}")
    if not np.array_equal(nodes.x, nodes.y):
        raise ValueError("time stepping uses collocation (Y must equal X)")

    m = nodes.x.shape[0]
    bnd = nodes.x_boundary
    lap = assemble_global(nodes.x, nodes.x, stencils, eps, kernel, LAPLACIAN).tolil()
    # Boundary values are injected data, not unknowns: their implicit rows
    # are identity, and the post-step overwrite refreshes them.
    lap[np.flatnonzero(bnd), :] = 0.0
    lap = lap.tocsr()
    eye = scipy.sparse.identity(m, format="csr")
    lu_euler = scipy.sparse.linalg.splu((eye - dt * alpha * lap).tocsc())
    lu_bdf2 = scipy.sparse.linalg.splu((eye - (2.0 / 3.0) * dt * alpha * lap).tocsc())

    n_steps = int(round(t_final / dt))
    times = dt * np.arange(n_steps + 1)
    traj = np.empty((n_steps + 1, m))

    u = np.asarray(initial_values, dtype=float).copy()
    u[bnd] = boundary_fn(nodes.x[bnd], 0.0)
    traj[0] = u

    for k in range(1, n_steps + 1):
        if k == 1:
            rhs = traj[0].copy()
        else:
            rhs = (4.0 * traj[k - 1] - traj[k - 2]) / 3.0
        rhs[bnd] = boundary_fn(nodes.x[bnd], times[k])
        u_new = (lu_euler if k == 1 else lu_bdf2).solve(rhs)
        if not np.all(np.isfinite(u_new)):
            raise IllConditionedSolveError(f"implicit solve diverged at step {k}")
        u_new[bnd] = boundary_fn(nodes.x[bnd], times[k])
        traj[k] = u_new
    return times, traj
