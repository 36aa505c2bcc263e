"""Frobenius condition number of the interpolation matrix, its derivative
with respect to the shape parameter, and the banded-loss gradient descent
that picks ``eps`` so that log10(cond) lands in a target interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import KernelSpec, PointCloud, _check_eps, distance_matrix, kernel_deps, kernel_eval
from .errors import SingularMatrixError

LN10 = math.log(10.0)

# Above this condition number a double-precision inverse (and hence the
# derivative built from it) is no longer trustworthy.
TRUSTWORTHY_COND = 1e15


@dataclass(frozen=True)
class CondBand:
    """Target interval [a, b] for log10 of the Frobenius condition number."""

    a: float = 11.0
    b: float = 11.5

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam hyperparameters for the banded-condition search.

    The step is taken in log(eps) so the iterate stays positive; ``eps_min``
    is a hard floor applied after each step.
    """

    learning_rate: float = 0.05
    max_iters: int = 500
    loss_tol: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_min: float = 1e-12

    def __post_init__(self):
        if self.loss_tol <= 0 or self.eps_min <= 0 or self.learning_rate <= 0:
            raise ValueError("learning_rate, loss_tol and eps_min must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")


@dataclass(frozen=True)
class OptimizeResult:
    eps: float
    achieved_logcond: float
    final_loss: float
    iterations: int
    converged: bool


def frobenius_cond(A: np.ndarray) -> float:
    """``||A||_F * ||A^{-1}||_F``.

    Raises
    ------
    SingularMatrixError
        If A is singular at working precision.
    """
    A = np.asarray(A, dtype=float)
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"matrix of shape {A.shape} is singular: {exc}") from None
    cond = np.linalg.norm(A, "fro") * np.linalg.norm(Ainv, "fro")
    if not np.isfinite(cond):
        raise SingularMatrixError("condition number overflowed; matrix is numerically singular")
    return float(cond)


def logcond(
    cloud: PointCloud, eps: float, kernel: KernelSpec, dist: np.ndarray | None = None
) -> float:
    """log10 of the Frobenius condition of the interpolation matrix."""
    if dist is None:
        dist = distance_matrix(cloud)
    return math.log10(frobenius_cond(kernel_eval(kernel, dist, _check_eps(eps))))


def cond_derivative(
    cloud: PointCloud, eps: float, kernel: KernelSpec, dist: np.ndarray | None = None
) -> float:
    """Derivative of the Frobenius condition with respect to ``eps``.

    Built from the entrywise kernel derivative A' and the identity (valid
    for symmetric A)

        d cond = ||A^{-1}||_F Tr(A A') / ||A||_F
                + ||A||_F Tr(-A' (A^{-1})^3) / ||A^{-1}||_F.
    """
    if dist is None:
        dist = distance_matrix(cloud)
    eps = _check_eps(eps)
    A = kernel_eval(kernel, dist, eps)
    return _cond_derivative_from(A, kernel_deps(kernel, dist, eps))


def _cond_derivative_from(A: np.ndarray, Aprime: np.ndarray, Ainv: np.ndarray | None = None) -> float:
    if Ainv is None:
        try:
            Ainv = np.linalg.inv(A)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"singular matrix in condition derivative: {exc}") from None
    norm_a = np.linalg.norm(A, "fro")
    norm_inv = np.linalg.norm(Ainv, "fro")
    ainv3 = Ainv @ Ainv @ Ainv
    # Tr(M N) = sum(M * N) for symmetric M, N.
    term1 = norm_inv * np.sum(A * Aprime) / norm_a
    term2 = norm_a * (-np.sum(Aprime * ainv3)) / norm_inv
    return float(term1 + term2)


def condition_loss(x: float, band: CondBand) -> float:
    """Piecewise linear loss: zero on [a, b], unit slope outside."""
    if x > band.b:
        return x - band.b
    if x < band.a:
        return band.a - x
    return 0.0


def optimize_shape(
    cloud: PointCloud,
    kernel: KernelSpec,
    band: CondBand = CondBand(),
    init_eps: float = 1.0,
    config: OptimizerConfig = OptimizerConfig(),
    dist: np.ndarray | None = None,
) -> OptimizeResult:
    """Drive log10(cond) into ``band`` by Adam steps on log(eps).

    The loss is the banded condition loss; its subgradient with respect to
    log(eps) chains the +-1 slope outside the band through
    d(logcond)/d(eps) = cond' / (cond * ln 10) and the log reparametrization.
    A singular matrix during iteration (eps too small) rejects the step and
    doubles eps instead. Returns the best iterate with ``converged=False``
    if the tolerance is not met within ``max_iters``.
    """
    init_eps = max(_check_eps(init_eps), config.eps_min)
    if dist is None:
        dist = distance_matrix(cloud)

    z = math.log(init_eps)
    m = 0.0
    v = 0.0
    best: tuple[float, float, float] = (math.inf, init_eps, math.nan)
    # The gradient is only meaningful where the inverse can be trusted.
    trust_limit = max(TRUSTWORTHY_COND, 10.0 ** (band.b + 1.0))

    for it in range(config.max_iters + 1):
        eps = max(math.exp(z), config.eps_min)
        z = math.log(eps)
        try:
            A = kernel_eval(kernel, dist, eps)
            Ainv = np.linalg.inv(A)
            cond = np.linalg.norm(A, "fro") * np.linalg.norm(Ainv, "fro")
            if not np.isfinite(cond):
                raise np.linalg.LinAlgError("non-finite condition")
        except np.linalg.LinAlgError:
            # Conditioning improves as eps grows: reject and push upward.
            z += math.log(2.0)
            continue

        lc = math.log10(cond)
        loss = condition_loss(lc, band)
        if loss < best[0]:
            best = (loss, eps, lc)
        if loss <= config.loss_tol:
            return OptimizeResult(eps, lc, loss, it, True)
        if it == config.max_iters:
            break
        if cond > trust_limit:
            # Effectively singular at working precision: same treatment as
            # the singular branch, eps is too small.
            z += math.log(2.0)
            continue

        slope = 1.0 if lc > band.b else -1.0
        dcond = _cond_derivative_from(A, kernel_deps(kernel, dist, eps), Ainv)
        grad = slope * dcond / (cond * LN10) * eps  # d loss / d log(eps)

        m = config.beta1 * m + (1.0 - config.beta1) * grad
        v = config.beta2 * v + (1.0 - config.beta2) * grad * grad
        t = it + 1
        m_hat = m / (1.0 - config.beta1**t)
        v_hat = v / (1.0 - config.beta2**t)
        z -= config.learning_rate * m_hat / (math.sqrt(v_hat) + 1e-8)

    loss, eps, lc = best
    return OptimizeResult(eps, lc, loss, config.max_iters, False)
