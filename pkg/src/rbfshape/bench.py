"""Experiment runner: interpolation and PDE convergence studies, shape
selection timing, and the fallback threshold study, with CSV output.

1-d meshes start from 10 nodes on [0, 1] (equidistant, or degree-10
Chebyshev first-kind zeros remapped to [0, 1]) and refine by inserting
midpoints, giving 9 * 2^k + 1 nodes at level k. The interpolation path
fits one 10-node cluster at a time, consecutive clusters sharing one
node. 2-d tasks use Cartesian meshes with 4 * 2^k + 1 nodes per axis and
the 10-nearest-neighbour stencil machinery.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import (
    EpsGrid,
    franke_shape,
    hardy_shape,
    modified_franke_shape,
    rippa_shape,
)
from .conditioning import CondBand, OptimizerConfig, logcond, optimize_shape
from .core import KernelSpec, PointCloud, eval_interpolant, fit_interpolant, l2_error
from .dataset import load_dataset
from .errors import IllConditionedSolveError, RbfShapeError
from .fallback import (
    FallbackConfig,
    FallbackOutcome,
    FallbackReport,
    fallback_report,
    mean_pairwise_distance,
    predict_shape,
)
from .neural import MlpModel, load_model
from .rbffd import (
    IDENTITY,
    LAPLACIAN,
    NodeSets,
    StencilSet,
    assemble_global,
    bdf2_heat,
    build_stencil_set,
    solve_poisson,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

PDE_TASKS = ("heat1d", "heat2d", "poisson2d")
ALL_TASKS = ("interp1d", "interp2d", "fallback-study", "timing") + PDE_TASKS
STRATEGIES = ("hardy", "franke", "mod-franke", "rippa", "optimizer", "nn")


# ---------------------------------------------------------------------------
# Test functions

def f1(points):
    return np.exp(np.sin(np.pi * points[:, 0]))


def f2(points):
    return 1.0 / (1.0 + 16.0 * points[:, 0] ** 2)


def f3(points):
    return np.where(points[:, 0] > 0.5, 1.0, 0.0)


def f4(points):
    x, y = points[:, 0], points[:, 1]
    return (
        0.75 * np.exp(-((9 * x - 2) ** 2 + (9 * y - 2) ** 2) / 4)
        + 0.75 * np.exp(-((9 * x + 1) ** 2 / 49 + (9 * y + 1) ** 2 / 10))
        + 0.5 * np.exp(-((9 * x - 7) ** 2 + (9 * y - 3) ** 2) / 4)
        - 0.2 * np.exp(-((9 * x - 4) ** 2 + (9 * y - 7) ** 2))
    )


def _f5(points, alpha):
    def edge(s):
        return 1.0 + np.exp(-1.0 / alpha) - np.exp(-s / alpha) - np.exp((s - 1.0) / alpha)

    return edge(points[:, 0]) * edge(points[:, 1])


def f5_steep(points):
    return _f5(points, 0.1)


def f5_smooth(points):
    return _f5(points, 1.0)


FUNCTIONS = {
    "f1": (1, f1),
    "f2": (1, f2),
    "f3": (1, f3),
    "f4": (2, f4),
    "f5-steep": (2, f5_steep),
    "f5-smooth": (2, f5_smooth),
}


def heat1d_u1_initial(points):
    x = points[:, 0]
    return -(x**2) + x


def heat1d_u1_exact(points, t, dt_reference=1e-3):
    """Fourier series solution for the parabolic initial profile.

    Only odd modes contribute (coefficient 8/(n^3 pi^3)); the sum stops
    once the next term's magnitude falls below 1e-14 at the reference time.
    """
    x = points[:, 0]
    out = np.zeros_like(x)
    n = 1
    while True:
        coef = 8.0 / (n**3 * math.pi**3)
        decay = math.exp(-(n**2) * math.pi**2 * dt_reference)
        if coef * decay < 1e-14 and n > 1:
            break
        out += coef * np.sin(n * math.pi * x) * math.exp(-(n**2) * math.pi**2 * t)
        n += 2
    return out


def heat1d_u2_initial(points):
    return 6.0 * np.sin(np.pi * points[:, 0])


def heat1d_u2_exact(points, t):
    return 6.0 * np.sin(np.pi * points[:, 0]) * math.exp(-math.pi**2 * t)


def poisson2d_exact(points):
    return np.sin(2.0 * np.pi * points[:, 0] * points[:, 1])


def poisson2d_forcing(points):
    x, y = points[:, 0], points[:, 1]
    return -4.0 * np.pi**2 * np.sin(2.0 * np.pi * x * y) * (x**2 + y**2)


def heat2d_initial(points):
    return np.sin(np.pi * points[:, 0]) * np.sin(np.pi * points[:, 1])


def heat2d_exact(points, t, alpha):
    return heat2d_initial(points) * math.exp(-2.0 * alpha * math.pi**2 * t)


# ---------------------------------------------------------------------------
# Meshes and clusters

def make_mesh_1d(level: int, family: str = "equidistant") -> PointCloud:
    """9 * 2^level + 1 nodes on [0, 1], refined by midpoint insertion."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    if family == "equidistant":
        nodes = np.linspace(0.0, 1.0, 10)
    elif family == "chebyshev":
        i = np.arange(1, 11)
        nodes = np.sort((np.cos((2 * i - 1) * np.pi / 20.0) + 1.0) / 2.0)
    else:
        raise ValueError(f"unknown node family {family!r}")
    for _ in range(level):
        mid = (nodes[:-1] + nodes[1:]) / 2.0
        nodes = np.sort(np.concatenate([nodes, mid]))
    return PointCloud.from_1d(nodes)


def cluster_1d(mesh: PointCloud, n: int = 10) -> list[np.ndarray]:
    """Consecutive n-node clusters sharing one boundary node."""
    count = mesh.n
    if (count - 1) % (n - 1) != 0:
        raise ValueError(f"{count} nodes cannot tile into overlapping clusters of {n}")
    step = n - 1
    return [np.arange(i * step, i * step + n) for i in range((count - 1) // step)]


def make_grid_2d(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian mesh with 4 * 2^level + 1 nodes per axis; returns points
    (lexicographic) and the boundary mask."""
    m = 4 * 2**level + 1
    axis = np.linspace(0.0, 1.0, m)
    pts = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    on_edge = (pts == 0.0) | (pts == 1.0)
    return pts, on_edge.any(axis=1)


def make_eval_grid_2d(level: int) -> np.ndarray:
    """Oversampled evaluation mesh with twice the nodes per axis (P = 4M)."""
    m = 2 * (4 * 2**level + 1)
    axis = np.linspace(0.0, 1.0, m)
    return np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)


# ---------------------------------------------------------------------------
# Configuration

@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    function: str = "f1"
    node_family: str = "equidistant"
    levels: tuple[int, ...] = (0, 1, 2, 3, 4)
    strategies: tuple[str, ...] = ("hardy", "franke", "mod-franke", "rippa", "optimizer")
    seed: int = 0
    kernel_family: str = "imq"
    imq_beta: float = 1.0
    band_a: float = 11.0
    band_b: float = 11.5
    model_path: str | None = None
    log10_theta: float = math.inf  # threshold for the "nn" strategy
    thetas: tuple[float, ...] = (12.0, 16.0, math.inf)  # fallback study, log10
    functions: tuple[str, ...] = ("f1", "f3")  # fallback study
    train_data: str | None = None
    augment: bool = False
    n_stencil: int = 10
    eval_points: int = 1000
    dt: float = 1e-3
    t_final: float = 1.0
    alpha: float = 1.0
    repetitions: int = 5
    warmup: int = 1

    def __post_init__(self):
        if self.task not in ALL_TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {ALL_TASKS}")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}; expected subset of {STRATEGIES}")

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.kernel_family, self.imq_beta)

    @property
    def band(self) -> CondBand:
        return CondBand(self.band_a, self.band_b)


def load_experiment_config(path) -> ExperimentConfig:
    with open(path, "rb") as handle:
        doc = tomllib.load(handle)
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys in {path}: {sorted(unknown)}")
    for key in ("levels", "strategies", "thetas", "functions"):
        if key in doc:
            doc[key] = tuple(doc[key])
    if "thetas" in doc:
        doc["thetas"] = tuple(math.inf if t in ("inf", "Inf") else float(t) for t in doc["thetas"])
    if "log10_theta" in doc and doc["log10_theta"] in ("inf", "Inf"):
        doc["log10_theta"] = math.inf
    return ExperimentConfig(**doc)


# ---------------------------------------------------------------------------
# Shape selection strategies

def band_for_theta(log_theta: float, band: CondBand, margin: float = 0.01) -> CondBand:
    """Correction band compatible with a threshold: when theta sits at or
    below the default band, aim just under it so corrected outcomes meet
    the hard guarantee."""
    if math.isinf(log_theta) or log_theta >= band.b + margin + 1e-2:
        return band
    return CondBand(log_theta - 0.5 - margin, log_theta - margin)


@dataclass
class SelectionStats:
    corrected: int = 0


@dataclass
class Selector:
    """Shape selection strategy.

    ``select`` picks eps for a cloud (threshold corrections are counted
    inside). ``recover`` re-selects after a downstream solve rejected the
    choice as numerically unusable; the runner reports the event through
    ``note_correction`` only if the recovered value is actually adopted.
    """

    select: object  # (cloud, values) -> eps
    recover: object = None  # (cloud) -> eps
    note_correction: object = None  # (cloud) -> None


def make_selector(
    name: str, cfg: ExperimentConfig, model: MlpModel | None, stats: SelectionStats
) -> Selector:
    kernel = cfg.kernel
    if name == "hardy":
        return Selector(lambda cloud, values: hardy_shape(cloud))
    if name == "franke":
        return Selector(lambda cloud, values: franke_shape(cloud))
    if name == "mod-franke":
        return Selector(lambda cloud, values: modified_franke_shape(cloud))
    if name == "rippa":
        grid = EpsGrid()

        def rippa_select(cloud, values):
            if values is None:
                raise RbfShapeError("rippa needs function values and cannot serve PDE stencils")
            return rippa_shape(cloud, values, kernel, grid).eps

        return Selector(rippa_select)
    if name == "optimizer":
        band = cfg.band

        def optimizer_select(cloud, values):
            return optimize_shape(cloud, kernel, band, hardy_shape(cloud)).eps

        return Selector(optimizer_select)
    if name == "nn":
        if model is None:
            raise RbfShapeError("the nn strategy requires a trained model file")
        fb = FallbackConfig.from_log10_theta(
            cfg.log10_theta, band=band_for_theta(cfg.log10_theta, cfg.band), kernel=kernel
        )

        def nn_select(cloud, values):
            outcome = predict_shape(model, cloud, fb)
            if outcome.corrected:
                stats.corrected += 1
            return outcome.eps

        def nn_recover(cloud):
            return optimize_shape(cloud, kernel, fb.band, hardy_shape(cloud)).eps

        def nn_note(cloud):
            stats.corrected += 1

        return Selector(nn_select, nn_recover, nn_note)
    raise ValueError(f"unknown strategy {name!r}")


# ---------------------------------------------------------------------------
# Rows and CSV output

@dataclass
class ConvergenceRow:
    task: str
    function: str
    strategy: str
    level: int
    centers: int
    l2_error: float
    wall_time: float
    max_logcond: float
    corrections: int = 0
    log10_theta: float = math.inf
    note: str = ""


@dataclass
class TimingRow:
    task: str
    function: str
    strategy: str
    level: int
    centers: int
    calls: int
    seconds_total: float
    seconds_per_call: float


def write_rows_csv(rows, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("")
        return
    fields = list(asdict(rows[0]))
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))


def write_plotdata_csv(rows: list[ConvergenceRow], path) -> None:
    """(x, y, series) triples: centers, error, strategy (theta-tagged when
    the study varies it)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x", "y", "series"])
        for row in rows:
            series = row.strategy
            if not math.isinf(row.log10_theta):
                series = f"{row.strategy}(theta={row.log10_theta:g})"
            if row.function:
                series = f"{row.function}:{series}"
            writer.writerow([row.centers, row.l2_error, series])


# ---------------------------------------------------------------------------
# Interpolation experiments

def _cluster_clouds(mesh: PointCloud, clusters) -> list[PointCloud]:
    return [PointCloud(mesh.points[idx]) for idx in clusters]


def _interp_1d_level(
    cfg: ExperimentConfig, fn, level: int, selector, kernel: KernelSpec
) -> tuple[int, float, float]:
    mesh = make_mesh_1d(level, cfg.node_family)
    clusters = cluster_1d(mesh, cfg.n_stencil)
    clouds = _cluster_clouds(mesh, clusters)
    mesh_values = fn(mesh.points)

    eval_x = np.linspace(0.0, 1.0, cfg.eval_points).reshape(-1, 1)
    edges = mesh.points[:: cfg.n_stencil - 1, 0]
    assignment = np.clip(np.searchsorted(edges, eval_x[:, 0], side="right") - 1, 0, len(clusters) - 1)

    approx = np.empty(cfg.eval_points)
    max_lc = -math.inf
    for ci, (idx, cloud) in enumerate(zip(clusters, clouds)):
        eps = selector.select(cloud, mesh_values[idx])
        s = None
        try:
            s = fit_interpolant(cloud, mesh_values[idx], eps, kernel, cfg.augment)
        except IllConditionedSolveError:
            # A fit unusable at working precision takes the same correction
            # path as a finite condition threshold; a cluster that cannot be
            # certified even then poisons only its own evaluation points.
            if selector.recover is not None:
                eps = selector.recover(cloud)
                try:
                    s = fit_interpolant(cloud, mesh_values[idx], eps, kernel, cfg.augment)
                except IllConditionedSolveError:
                    s = None
                else:
                    if selector.note_correction is not None:
                        selector.note_correction(cloud)
        mask = assignment == ci
        if np.any(mask):
            approx[mask] = eval_interpolant(s, eval_x[mask]) if s is not None else math.nan
        max_lc = max(max_lc, logcond(cloud, eps, kernel))
    err = l2_error(fn(eval_x), approx)
    return mesh.n, err, max_lc


def _stencil_eps_and_logcond(
    x: np.ndarray, stencils: StencilSet, selector: Selector, kernel: KernelSpec, fn_values=None
) -> tuple[np.ndarray, float]:
    m = stencils.indices.shape[0]
    eps = np.empty(m)
    max_lc = -math.inf
    for i in range(m):
        cloud = PointCloud(x[stencils.indices[i]])
        values = None if fn_values is None else fn_values[stencils.indices[i]]
        eps[i] = selector.select(cloud, values)
        max_lc = max(max_lc, logcond(cloud, eps[i], kernel))
    return eps, max_lc


def _assemble_with_recovery(
    x, y, stencils: StencilSet, eps: np.ndarray, kernel: KernelSpec, operator: str, selector: Selector
):
    """Assemble, re-selecting the shape parameter of any stencil whose local
    system is unusable at working precision (at most once per stencil)."""
    eps = eps.copy()
    retried: set[int] = set()
    while True:
        try:
            return assemble_global(x, y, stencils, eps, kernel, operator), eps
        except IllConditionedSolveError as exc:
            sid = exc.stencil_id
            if selector.recover is None or sid is None or sid in retried:
                raise
            retried.add(sid)
            cloud = PointCloud(x[stencils.indices[sid]])
            eps[sid] = selector.recover(cloud)
            if selector.note_correction is not None:
                selector.note_correction(cloud)


def _interp_2d_level(
    cfg: ExperimentConfig, fn, level: int, selector: Selector, kernel: KernelSpec
) -> tuple[int, float, float]:
    x, x_bnd = make_grid_2d(level)
    y = make_eval_grid_2d(level)
    nodes = NodeSets(x, y, x_bnd, np.zeros(y.shape[0], dtype=bool))
    stencils = build_stencil_set(nodes, cfg.n_stencil)
    values = fn(x)
    eps, max_lc = _stencil_eps_and_logcond(x, stencils, selector, kernel, values)
    op, eps = _assemble_with_recovery(x, y, stencils, eps, kernel, IDENTITY, selector)
    err = l2_error(fn(y), op @ values)
    return x.shape[0], err, max_lc


def run_interp_experiment(cfg: ExperimentConfig, model: MlpModel | None = None) -> list[ConvergenceRow]:
    dim, fn = FUNCTIONS[cfg.function]
    if (cfg.task == "interp1d") != (dim == 1):
        raise ValueError(f"function {cfg.function} has dimension {dim}, task is {cfg.task}")
    kernel = cfg.kernel
    rows: list[ConvergenceRow] = []
    for strategy in cfg.strategies:
        stats = SelectionStats()
        selector = make_selector(strategy, cfg, model, stats)
        for level in cfg.levels:
            stats.corrected = 0
            t0 = time.perf_counter()
            try:
                if dim == 1:
                    centers, err, max_lc = _interp_1d_level(cfg, fn, level, selector, kernel)
                else:
                    centers, err, max_lc = _interp_2d_level(cfg, fn, level, selector, kernel)
                note = ""
            except (RbfShapeError, np.linalg.LinAlgError) as exc:
                centers, err, max_lc, note = _level_centers(cfg, level, dim), math.nan, math.nan, str(exc)
            rows.append(
                ConvergenceRow(
                    cfg.task, cfg.function, strategy, level, centers,
                    err, time.perf_counter() - t0, max_lc, stats.corrected,
                    cfg.log10_theta if strategy == "nn" else math.inf,
                    note,
                )
            )
    return rows


def _level_centers(cfg: ExperimentConfig, level: int, dim: int) -> int:
    return 9 * 2**level + 1 if dim == 1 else (4 * 2**level + 1) ** 2


# ---------------------------------------------------------------------------
# PDE experiments

def run_pde_experiment(cfg: ExperimentConfig, model: MlpModel | None = None) -> list[ConvergenceRow]:
    kernel = cfg.kernel
    rows: list[ConvergenceRow] = []
    for strategy in cfg.strategies:
        stats = SelectionStats()
        selector = make_selector(strategy, cfg, model, stats)
        for level in cfg.levels:
            stats.corrected = 0
            t0 = time.perf_counter()
            try:
                centers, err, max_lc = _pde_level(cfg, level, selector, kernel)
                note = ""
            except (RbfShapeError, np.linalg.LinAlgError) as exc:
                dim = 1 if cfg.task == "heat1d" else 2
                centers, err, max_lc, note = _level_centers(cfg, level, dim), math.nan, math.nan, str(exc)
            rows.append(
                ConvergenceRow(
                    cfg.task, cfg.function, strategy, level, centers,
                    err, time.perf_counter() - t0, max_lc, stats.corrected,
                    cfg.log10_theta if strategy == "nn" else math.inf,
                    note,
                )
            )
    return rows


def _run_with_stencil_recovery(run, x, stencils: StencilSet, eps: np.ndarray, selector: Selector):
    """Call ``run(eps)``, re-selecting any stencil whose local system the
    solver rejects (at most once per stencil)."""
    eps = eps.copy()
    retried: set[int] = set()
    while True:
        try:
            return run(eps)
        except IllConditionedSolveError as exc:
            sid = exc.stencil_id
            if selector.recover is None or sid is None or sid in retried:
                raise
            retried.add(sid)
            cloud = PointCloud(x[stencils.indices[sid]])
            eps[sid] = selector.recover(cloud)
            if selector.note_correction is not None:
                selector.note_correction(cloud)


def _pde_level(cfg: ExperimentConfig, level: int, selector: Selector, kernel: KernelSpec) -> tuple[int, float, float]:
    if cfg.task == "heat1d":
        mesh = make_mesh_1d(level, cfg.node_family)
        x = mesh.points
        bnd = np.zeros(x.shape[0], dtype=bool)
        bnd[np.argmin(x[:, 0])] = bnd[np.argmax(x[:, 0])] = True
        nodes = NodeSets.collocation(x, bnd)
        stencils = build_stencil_set(nodes, cfg.n_stencil)
        eps, max_lc = _stencil_eps_and_logcond(x, stencils, selector, kernel)
        if cfg.function == "u1":
            initial, exact = heat1d_u1_initial, lambda pts, t: heat1d_u1_exact(pts, t, cfg.dt)
        elif cfg.function == "u2":
            initial, exact = heat1d_u2_initial, heat1d_u2_exact
        else:
            raise ValueError(f"heat1d supports u1/u2, got {cfg.function!r}")

        def run_heat(eps_arr):
            _, traj = bdf2_heat(
                nodes, stencils, eps_arr, kernel, cfg.dt, cfg.t_final, cfg.alpha,
                initial(x), lambda pts, t: np.zeros(pts.shape[0]),
            )
            return traj

        traj = _run_with_stencil_recovery(run_heat, x, stencils, eps, selector)
        t_end = cfg.dt * (traj.shape[0] - 1)
        return x.shape[0], l2_error(exact(x, t_end), traj[-1]), max_lc

    x, bnd = make_grid_2d(level)
    nodes = NodeSets.collocation(x, bnd)
    stencils = build_stencil_set(nodes, cfg.n_stencil)
    eps, max_lc = _stencil_eps_and_logcond(x, stencils, selector, kernel)
    if cfg.task == "poisson2d":
        def run_poisson(eps_arr):
            return solve_poisson(nodes, stencils, eps_arr, kernel, poisson2d_forcing(x), poisson2d_exact(x))

        u = _run_with_stencil_recovery(run_poisson, x, stencils, eps, selector)
        return x.shape[0], l2_error(poisson2d_exact(x), u), max_lc
    if cfg.task == "heat2d":
        def run_heat2d(eps_arr):
            _, traj = bdf2_heat(
                nodes, stencils, eps_arr, kernel, cfg.dt, cfg.t_final, cfg.alpha,
                heat2d_initial(x), lambda pts, t: np.zeros(pts.shape[0]),
            )
            return traj

        traj = _run_with_stencil_recovery(run_heat2d, x, stencils, eps, selector)
        t_end = cfg.dt * (traj.shape[0] - 1)
        return x.shape[0], l2_error(heat2d_exact(x, t_end, cfg.alpha), traj[-1]), max_lc
    raise ValueError(f"unknown PDE task {cfg.task!r}")


# ---------------------------------------------------------------------------
# Timing

def run_timing(cfg: ExperimentConfig, model: MlpModel | None = None) -> list[TimingRow]:
    """Median-of-repetitions cost of shape selection over all clusters or
    stencils of each level."""
    dim, fn = FUNCTIONS[cfg.function]
    kernel = cfg.kernel
    rows: list[TimingRow] = []
    for level in cfg.levels:
        if dim == 1:
            mesh = make_mesh_1d(level, cfg.node_family)
            clusters = cluster_1d(mesh, cfg.n_stencil)
            clouds = _cluster_clouds(mesh, clusters)
            values = [fn(mesh.points)[idx] for idx in clusters]
            centers = mesh.n
        else:
            x, x_bnd = make_grid_2d(level)
            stencils = build_stencil_set(NodeSets.collocation(x, x_bnd), cfg.n_stencil)
            clouds = [PointCloud(x[idx]) for idx in stencils.indices]
            values = [fn(x)[idx] for idx in stencils.indices]
            centers = x.shape[0]
        for strategy in cfg.strategies:
            stats = SelectionStats()
            selector = make_selector(strategy, cfg, model, stats)

            def run_once():
                for cloud, vals in zip(clouds, values):
                    selector.select(cloud, vals)

            for _ in range(cfg.warmup):
                run_once()
            times = []
            for _ in range(cfg.repetitions):
                t0 = time.perf_counter()
                run_once()
                times.append(time.perf_counter() - t0)
            total = statistics.median(times)
            rows.append(
                TimingRow(cfg.task, cfg.function, strategy, level, centers, len(clouds), total, total / len(clouds))
            )
    return rows


# ---------------------------------------------------------------------------
# Fallback study

@dataclass
class FallbackStudyResult:
    rows: list[ConvergenceRow]
    correction_counts: dict  # (function, log10_theta) -> total corrections
    reports: dict  # log10_theta -> FallbackReport (only thetas with data)


def run_fallback_study(cfg: ExperimentConfig, model: MlpModel) -> FallbackStudyResult:
    if model is None:
        raise RbfShapeError("the fallback study requires a trained model")
    kernel = cfg.kernel
    rows: list[ConvergenceRow] = []
    counts: dict = {}
    corrected_clouds: dict = {theta: [] for theta in cfg.thetas}

    for fn_name in cfg.functions:
        dim, fn = FUNCTIONS[fn_name]
        if dim != 1:
            raise ValueError("the fallback study runs on 1-d interpolation tasks")
        for theta in cfg.thetas:
            fb = FallbackConfig.from_log10_theta(
                theta, band=band_for_theta(theta, cfg.band), kernel=kernel
            )
            total = 0
            for level in cfg.levels:
                corrected_here: list[PointCloud] = []

                def nn_select(cloud, values):
                    outcome = predict_shape(model, cloud, fb)
                    if outcome.corrected:
                        corrected_here.append(cloud)
                    return outcome.eps

                def nn_recover(cloud):
                    return optimize_shape(cloud, kernel, fb.band, hardy_shape(cloud)).eps

                selector = Selector(nn_select, nn_recover, corrected_here.append)
                t0 = time.perf_counter()
                centers, err, max_lc = _interp_1d_level(cfg, fn, level, selector, kernel)
                rows.append(
                    ConvergenceRow(
                        cfg.task, fn_name, "nn", level, centers, err,
                        time.perf_counter() - t0, max_lc, len(corrected_here), theta,
                    )
                )
                total += len(corrected_here)
                corrected_clouds[theta].extend(corrected_here)
            counts[(fn_name, theta)] = total

    reports = {}
    if cfg.train_data:
        train_dist = [mean_pairwise_distance(r.points) for r in load_dataset(cfg.train_data)]
        for theta, clouds in corrected_clouds.items():
            if clouds:
                outcomes = [FallbackOutcome(1.0, "optimizer", 0.0, True)] * len(clouds)
                reports[theta] = fallback_report(outcomes, clouds, train_dist)
    return FallbackStudyResult(rows, counts, reports)
