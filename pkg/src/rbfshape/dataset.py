"""Labeled training data: random clouds paired with the shape parameter the
banded-condition optimizer assigns them.

Labels are purely condition-based; the function tags carried by each cell
are provenance metadata only. Records are JSON lines whose floats
round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import hardy_shape
from .conditioning import CondBand, OptimizerConfig, condition_loss, logcond, optimize_shape
from .core import KernelSpec, PointCloud
from .errors import DegenerateCloudError
from .neural import sort_cloud


@dataclass(frozen=True)
class CellSpec:
    """One generation cell: a domain scale, a provenance tag, and counts.

    1-d cells sample one fresh N-point cloud per record (``master_size`` =
    N, ``records_per_cloud`` = 1). 2-d cells draw ``n_clouds`` master clouds
    of ``master_size`` points and take N-point subsets of each.
    """

    dim: int
    domain_scale: float
    function_tag: str
    n_clouds: int
    records_per_cloud: int = 1
    master_size: int = 10


def default_cells_1d() -> tuple[CellSpec, ...]:
    cells = []
    for tag in ("exp_sin_pi", "runge"):
        for scale in (0.01, 0.1, 1.0):
            cells.append(CellSpec(1, scale, tag, n_clouds=700))
    for tag, scale in (("cos_200pi", 0.01), ("cos_20pi", 0.1), ("cos_2pi", 1.0)):
        cells.append(CellSpec(1, scale, tag, n_clouds=700))
    return tuple(cells)


def default_cells_2d() -> tuple[CellSpec, ...]:
    cells = []
    for tag in ("steep_boundary_a0.1", "steep_boundary_a1", "franke"):
        for scale in (0.001, 0.01, 0.1, 1.0):
            cells.append(
                CellSpec(2, scale, tag, n_clouds=20, records_per_cloud=50, master_size=20)
            )
    return tuple(cells)


@dataclass(frozen=True)
class GenerationConfig:
    cells: tuple[CellSpec, ...]
    n_points: int = 10
    band: CondBand = CondBand()
    kernel: KernelSpec = KernelSpec()
    optimizer: OptimizerConfig = OptimizerConfig(loss_tol=1e-3)
    max_trials: int = 40
    seed: int = 0
    scale: float = 1.0  # uniform shrink factor applied to every cell

    def __post_init__(self):
        if self.max_trials < 1:
            raise ValueError("max_trials must be positive")
        if not 0.0 < self.scale <= 1.0:
            raise ValueError("scale must lie in (0, 1]")

    def scaled_cells(self) -> tuple[CellSpec, ...]:
        if self.scale == 1.0:
            return self.cells
        out = []
        for cell in self.cells:
            if cell.records_per_cloud == 1:
                out.append(replace(cell, n_clouds=max(1, round(cell.n_clouds * self.scale))))
            else:
                out.append(
                    replace(cell, records_per_cloud=max(1, round(cell.records_per_cloud * self.scale)))
                )
        return tuple(out)


@dataclass(frozen=True)
class DatasetRecord:
    points: PointCloud  # sorted
    eps_label: float
    dim: int
    domain_scale: float
    function_tag: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "points": self.points.points.tolist(),
                "eps": self.eps_label,
                "dim": self.dim,
                "domain_scale": self.domain_scale,
                "function_tag": self.function_tag,
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "DatasetRecord":
        doc = json.loads(line)
        return cls(
            PointCloud(np.array(doc["points"], dtype=float)),
            float(doc["eps"]),
            int(doc["dim"]),
            float(doc["domain_scale"]),
            str(doc["function_tag"]),
        )


def sample_cloud(dim: int, interval: tuple[float, float], n: int, rng: np.random.Generator) -> PointCloud:
    """N i.i.d. uniform points in the interval (per coordinate), sorted,
    redrawn on the (measure-zero) event of a duplicate."""
    lo, hi = interval
    if not hi > lo:
        raise ValueError(f"degenerate interval [{lo}, {hi}]")
    for _ in range(100):
        pts = rng.uniform(lo, hi, size=(n, dim))
        try:
            return sort_cloud(PointCloud(pts))
        except DegenerateCloudError:
            continue
    raise DegenerateCloudError(f"could not draw {n} distinct points in [{lo}, {hi}]")


def generate_record(
    cloud: PointCloud, kernel: KernelSpec, config: GenerationConfig, domain_scale: float, tag: str
) -> DatasetRecord | None:
    """Label one cloud, or reject it after ``max_trials`` optimizer runs.

    Starts from the Hardy value and re-invokes the optimizer from the best
    iterate until the loss tolerance is met.
    """
    eps = hardy_shape(cloud)
    for _ in range(config.max_trials):
        result = optimize_shape(cloud, kernel, config.band, eps, config.optimizer)
        eps = result.eps
        if result.converged:
            return DatasetRecord(sort_cloud(cloud), eps, cloud.dim, domain_scale, tag)
    return None


def _record_rng(seed: int, cell_idx: int, cloud_idx: int, record_idx: int) -> np.random.Generator:
    # Stream per (cell, cloud, record): deterministic under any schedule.
    return np.random.default_rng(np.random.SeedSequence([seed, cell_idx, cloud_idx, record_idx]))


def generate_dataset(config: GenerationConfig, out_path) -> dict:
    """Write JSON-lines records; return a per-cell summary with counts and
    the rejection tally."""
    out_path = Path(out_path)
    cells = config.scaled_cells()
    summary_cells = []
    total = 0
    rejected_total = 0
    try:
        handle = out_path.open("w")
    except OSError as exc:
        raise OSError(f"cannot open dataset output {out_path}: {exc}") from None
    with handle:
        for cell_idx, cell in enumerate(cells):
            accepted = 0
            rejected = 0
            for cloud_idx in range(cell.n_clouds):
                master_rng = _record_rng(config.seed, cell_idx, cloud_idx, 0)
                interval = (0.0, cell.domain_scale)
                if cell.records_per_cloud == 1:
                    clouds = [sample_cloud(cell.dim, interval, config.n_points, master_rng)]
                else:
                    master = sample_cloud(cell.dim, interval, cell.master_size, master_rng)
                    clouds = []
                    for rec_idx in range(cell.records_per_cloud):
                        rng = _record_rng(config.seed, cell_idx, cloud_idx, rec_idx + 1)
                        subset = rng.choice(cell.master_size, size=config.n_points, replace=False)
                        clouds.append(sort_cloud(PointCloud(master.points[subset])))
                for cloud in clouds:
                    record = generate_record(cloud, config.kernel, config, cell.domain_scale, cell.function_tag)
                    if record is None:
                        rejected += 1
                        continue
                    handle.write(record.to_json() + "\n")
                    accepted += 1
            summary_cells.append(
                {
                    "dim": cell.dim,
                    "domain_scale": cell.domain_scale,
                    "function_tag": cell.function_tag,
                    "accepted": accepted,
                    "rejected": rejected,
                }
            )
            total += accepted
            rejected_total += rejected
    return {
        "records": total,
        "rejected": rejected_total,
        "rejection_rate": rejected_total / max(total + rejected_total, 1),
        "cells": summary_cells,
    }


def load_dataset(path) -> list[DatasetRecord]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read dataset {path}: {exc}") from None
    return [DatasetRecord.from_json(line) for line in lines if line.strip()]


def verify_record(record: DatasetRecord, kernel: KernelSpec, band: CondBand = CondBand()) -> float:
    """Recompute the banded loss of a persisted record from scratch."""
    return condition_loss(logcond(record.points, record.eps_label, kernel), band)
