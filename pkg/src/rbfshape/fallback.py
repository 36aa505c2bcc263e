"""Predict a shape parameter with the network, verify it against a
condition threshold, and re-optimize when the check fails.

This is the hard well-posedness guarantee of the pipeline: every outcome
returned satisfies cond(A) <= theta, or the call raises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .conditioning import CondBand, OptimizerConfig, frobenius_cond, optimize_shape
from .core import KernelSpec, PointCloud, distance_matrix, kernel_eval
from .errors import GuaranteeViolationError, SingularMatrixError
from .neural import MlpModel, predict_eps

INIT_NN = "nn-output"
INIT_FIXED = "fixed"


@dataclass(frozen=True)
class FallbackConfig:
    """Threshold, correction band, and optimizer settings.

    ``theta`` is a condition-number value (use ``math.inf`` to correct only
    on numerically singular matrices); experiment configs usually express
    it as log10 and convert.
    """

    theta: float = math.inf
    band: CondBand = CondBand()
    kernel: KernelSpec = KernelSpec()
    optimizer: OptimizerConfig = OptimizerConfig()
    init_policy: str = INIT_NN
    fixed_init_eps: float = 400.0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.init_policy not in (INIT_NN, INIT_FIXED):
            raise ValueError(f"unknown init policy {self.init_policy!r}")

    @classmethod
    def from_log10_theta(cls, log_theta: float, **kwargs) -> "FallbackConfig":
        return cls(theta=math.inf if math.isinf(log_theta) else 10.0**log_theta, **kwargs)


@dataclass(frozen=True)
class FallbackOutcome:
    eps: float
    source: str  # "nn" or "optimizer"
    achieved_cond: float
    corrected: bool


def _cond_at(cloud: PointCloud, eps: float, kernel: KernelSpec, dist: np.ndarray) -> float:
    return frobenius_cond(kernel_eval(kernel, dist, eps))


def predict_shape(model: MlpModel, cloud: PointCloud, config: FallbackConfig) -> FallbackOutcome:
    """Network prediction with the condition-threshold fallback.

    Returns the raw prediction when cond(A) <= theta. Otherwise re-runs the
    band optimizer (initialized per the configured policy) and returns its
    value, still subject to the threshold.

    Raises
    ------
    GuaranteeViolationError
        If even the corrected shape parameter leaves cond(A) above theta.
    """
    dist = distance_matrix(cloud)
    eps_nn = predict_eps(model, cloud)

    nn_cond = math.inf
    if math.isfinite(eps_nn) and eps_nn > 0:
        try:
            nn_cond = _cond_at(cloud, eps_nn, config.kernel, dist)
        except SingularMatrixError:
            nn_cond = math.inf
        # A numerically singular matrix always corrects, even at theta = inf.
        if nn_cond <= config.theta and math.isfinite(nn_cond):
            return FallbackOutcome(eps_nn, "nn", nn_cond, False)

    if config.init_policy == INIT_NN and math.isfinite(eps_nn) and eps_nn > 0:
        init = eps_nn
    else:
        init = config.fixed_init_eps
    result = optimize_shape(cloud, config.kernel, config.band, init, config.optimizer, dist=dist)
    try:
        achieved = _cond_at(cloud, result.eps, config.kernel, dist)
    except SingularMatrixError:
        achieved = math.inf
    if achieved > config.theta:
        raise GuaranteeViolationError(
            f"corrected eps={result.eps:g} still has cond {achieved:.3e} > theta {config.theta:.3e} "
            f"(optimizer converged={result.converged})"
        )
    return FallbackOutcome(result.eps, "optimizer", achieved, True)


def mean_pairwise_distance(cloud: PointCloud) -> float:
    """Average pairwise distance; the summary statistic used to compare
    corrected inputs against the training distribution."""
    return float(pdist(cloud.points).mean())


@dataclass(frozen=True)
class FallbackReport:
    correction_rate: float
    corrected_distances: np.ndarray
    training_distances: np.ndarray
    bin_edges: np.ndarray
    corrected_counts: np.ndarray
    training_counts: np.ndarray


def fallback_report(
    outcomes: list[FallbackOutcome],
    clouds: list[PointCloud],
    training_distances,
    bins: int = 20,
) -> FallbackReport:
    """Correction rate plus histogram data comparing the mean pairwise
    distance of corrected clouds with that of the training set."""
    if not outcomes or len(outcomes) != len(clouds):
        raise ValueError("need one cloud per outcome and at least one outcome")
    training = np.asarray(training_distances, dtype=float)
    corrected = np.array(
        [mean_pairwise_distance(c) for o, c in zip(outcomes, clouds) if o.corrected]
    )
    rate = sum(o.corrected for o in outcomes) / len(outcomes)

    pool = np.concatenate([training, corrected]) if corrected.size else training
    lo, hi = (float(pool.min()), float(pool.max())) if pool.size else (0.0, 1.0)
    if lo == hi:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    corrected_counts, _ = np.histogram(corrected, bins=edges)
    training_counts, _ = np.histogram(training, bins=edges)
    return FallbackReport(rate, corrected, training, edges, corrected_counts, training_counts)
