"""Kernels, interpolation matrices, and the (optionally augmented) RBF
interpolant for scattered data in one and two dimensions.

The two kernel families in scope, with shape parameter ``eps > 0``:

=====================  =========================================
Gaussian               ``exp(-(eps*r)**2)``
Inverse multiquadric   ``(1 + (eps*r)**2)**(-beta/2)``
=====================  =========================================

Both satisfy ``phi(0) = 1`` and decrease strictly in ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateCloudError, IllConditionedSolveError

GAUSSIAN = "gaussian"
IMQ = "imq"

_FAMILIES = (GAUSSIAN, IMQ)


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not math.isfinite(eps) or eps <= 0.0:
        raise ValueError(f"shape parameter must be positive and finite, got {eps!r}")
    return eps


@dataclass(frozen=True)
class KernelSpec:
    """RBF family plus its fixed exponent.

    Parameters
    ----------
    family : str
        One of ``"gaussian"`` or ``"imq"``.
    imq_beta : float
        Exponent of the inverse multiquadric; ignored by the Gaussian.
        Defaults to 1, the canonical inverse multiquadric.
    """

    family: str = IMQ
    imq_beta: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not math.isfinite(self.imq_beta) or self.imq_beta <= 0.0:
            raise ValueError(f"imq_beta must be positive and finite, got {self.imq_beta!r}")


@dataclass(frozen=True)
class PointCloud:
    """Ordered set of N pairwise-distinct points in R^dim, dim in {1, 2}.

    ``points`` is an (N, dim) float array. Construction validates the
    invariants eagerly: at least two points, all pairwise distinct.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2:
            raise DegenerateCloudError(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[1] not in (1, 2):
            raise DegenerateCloudError(f"supported dimensions are 1 and 2, got {pts.shape[1]}")
        if pts.shape[0] < 2:
            raise DegenerateCloudError(f"need at least 2 points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise DegenerateCloudError("points contain non-finite coordinates")
        if pdist(pts).min() <= 0.0:
            raise DegenerateCloudError("points are not pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_1d(cls, coords) -> "PointCloud":
        return cls(np.asarray(coords, dtype=float).reshape(-1, 1))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def kernel_eval(kernel: KernelSpec, r, eps: float):
    """Evaluate ``phi(r; eps)`` elementwise.

    Parameters
    ----------
    kernel : KernelSpec
    r : scalar or array of nonnegative distances
    eps : positive shape parameter

    Returns
    -------
    Same shape as ``r``; values in (0, 1].
    """
    eps = _check_eps(eps)
    r = np.asarray(r, dtype=float)
    if kernel.family == GAUSSIAN:
        out = np.exp(-((eps * r) ** 2))
    else:
        out = (1.0 + (eps * r) ** 2) ** (-kernel.imq_beta / 2.0)
    return out if out.ndim else float(out)


def kernel_deps(kernel: KernelSpec, r, eps: float):
    """Analytic derivative of the kernel with respect to the shape parameter.

    Gaussian: ``-2*eps*r^2 * exp(-(eps*r)^2)``.
    IMQ:      ``-beta*eps*r^2 * (1 + (eps*r)^2)^(-beta/2 - 1)``.
    """
    eps = _check_eps(eps)
    r = np.asarray(r, dtype=float)
    if kernel.family == GAUSSIAN:
        out = -2.0 * eps * r**2 * np.exp(-((eps * r) ** 2))
    else:
        b = kernel.imq_beta
        out = -b * eps * r**2 * (1.0 + (eps * r) ** 2) ** (-b / 2.0 - 1.0)
    return out if out.ndim else float(out)


def kernel_laplacian(kernel: KernelSpec, r, eps: float, dim: int):
    """Laplacian of ``x -> phi(||x||; eps)`` in ``dim`` dimensions at radius r.

    Uses the radial form ``phi'' + (dim-1)/r * phi'`` combined into an
    expression that is regular at r = 0.
    """
    eps = _check_eps(eps)
    if dim not in (1, 2):
        raise ValueError(f"supported dimensions are 1 and 2, got {dim}")
    r = np.asarray(r, dtype=float)
    e2 = eps * eps
    if kernel.family == GAUSSIAN:
        out = (4.0 * e2 * e2 * r**2 - 2.0 * dim * e2) * np.exp(-((eps * r) ** 2))
    else:
        b = kernel.imq_beta
        s = 1.0 + (eps * r) ** 2
        out = -dim * b * e2 * s ** (-b / 2.0 - 1.0) + b * (b + 2.0) * e2 * e2 * r**2 * s ** (
            -b / 2.0 - 2.0
        )
    return out if out.ndim else float(out)


def distance_matrix(cloud: PointCloud) -> np.ndarray:
    """Symmetric N x N matrix of pairwise Euclidean distances."""
    return squareform(pdist(cloud.points))


def interpolation_matrix(
    cloud: PointCloud, eps: float, kernel: KernelSpec, dist: np.ndarray | None = None
) -> np.ndarray:
    """Symmetric interpolation matrix ``a_ij = phi(||x_i - x_j||; eps)``.

    ``dist`` may carry a precomputed distance matrix so that sweeps over
    ``eps`` reuse it.
    """
    if dist is None:
        dist = distance_matrix(cloud)
    return kernel_eval(kernel, dist, eps)


@dataclass(frozen=True)
class Interpolant:
    """Fitted RBF interpolant: centers, shape parameter, and coefficients.

    ``gamma`` is empty when unaugmented and holds the single constant
    coefficient when constant augmentation is on.
    """

    centers: PointCloud
    eps: float
    kernel: KernelSpec
    lam: np.ndarray
    gamma: np.ndarray = field(default_factory=lambda: np.empty(0))


def _solve_symmetric(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # Symmetric (LDL) factorization first; pivoted LU as the fallback,
    # then iterative refinement with the residual accumulated in extended
    # precision. Near (and above) the condition band the coefficients are
    # large and a plain double residual evaluation floors at
    # eps_mach * ||A|| * ||x||, which can miss the residual contract.
    try:
        x = scipy.linalg.solve(A, rhs, assume_a="sym")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError, ValueError):
        x = np.linalg.solve(A, rhs)
    A_ext = A.astype(np.longdouble)
    rhs_ext = rhs.astype(np.longdouble)
    scale = max(np.abs(rhs).max(), 1e-300)
    best_x, best_r = x, math.inf
    for _ in range(4):
        if not np.all(np.isfinite(x)):
            break
        r = np.asarray(rhs_ext - A_ext @ x.astype(np.longdouble), dtype=float)
        r_norm = float(np.abs(r).max())
        if r_norm < best_r:
            best_x, best_r = x, r_norm
        # Near the representability floor the iterates oscillate; keep the
        # best and stop once safely inside the residual contract.
        if r_norm <= 1e-9 * scale:
            break
        try:
            x = x + scipy.linalg.solve(A, r, assume_a="sym")
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError, ValueError):
            break
    return best_x


def fit_interpolant(
    cloud: PointCloud,
    values,
    eps: float,
    kernel: KernelSpec,
    augment_constant: bool = False,
) -> Interpolant:
    """Solve for the interpolation coefficients at the given shape parameter.

    With ``augment_constant`` the basis gains a constant term and the
    coefficients satisfy the orthogonality condition ``sum(lam) = 0``,
    making the interpolant exact for constant data.

    Raises
    ------
    IllConditionedSolveError
        If the system cannot be solved to a residual of 1e-8 relative to
        the data. The error carries the estimated Frobenius condition.
    """
    eps = _check_eps(eps)
    values = np.asarray(values, dtype=float)
    n = cloud.n
    if values.shape != (n,):
        raise ValueError(f"expected {n} data values, got shape {values.shape}")

    A = interpolation_matrix(cloud, eps, kernel)
    if augment_constant:
        full = np.zeros((n + 1, n + 1))
        full[:n, :n] = A
        full[:n, n] = 1.0
        full[n, :n] = 1.0
        rhs = np.concatenate([values, [0.0]])
    else:
        full = A
        rhs = values

    try:
        coeffs = _solve_symmetric(full, rhs)
    except np.linalg.LinAlgError:
        raise IllConditionedSolveError(
            f"interpolation system is singular at eps={eps:g}",
            estimated_cond=_try_frobenius_cond(full),
        ) from None

    scale = np.abs(rhs).max()
    # Extended-precision evaluation: in doubles the residual of a large
    # coefficient vector cannot even be measured below eps * ||A|| * ||c||.
    residual = float(
        np.abs(full.astype(np.longdouble) @ coeffs.astype(np.longdouble) - rhs).max()
    )
    if not np.all(np.isfinite(coeffs)) or residual > 1e-8 * max(scale, 1e-300):
        raise IllConditionedSolveError(
            f"interpolation solve at eps={eps:g} left residual {residual:.3e} "
            f"(data scale {scale:.3e})",
            estimated_cond=_try_frobenius_cond(full),
        )

    if augment_constant:
        return Interpolant(cloud, eps, kernel, coeffs[:n], coeffs[n:])
    return Interpolant(cloud, eps, kernel, coeffs)


def _try_frobenius_cond(A: np.ndarray) -> float | None:
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return None
    cond = np.linalg.norm(A, "fro") * np.linalg.norm(Ainv, "fro")
    return float(cond) if np.isfinite(cond) else None


def eval_interpolant(s: Interpolant, query):
    """Evaluate the interpolant at one point or an array of points.

    Returns a scalar for a single point, an array for a batch.
    """
    q = np.asarray(query, dtype=float)
    single = q.ndim <= 1
    q = np.atleast_2d(q)
    if q.shape[1] != s.centers.dim:
        # Single 1-d point arrives as shape (1, n); retry as column.
        if s.centers.dim == 1 and q.shape[0] == 1:
            q = q.reshape(-1, 1)
        else:
            raise ValueError(f"query dimension {q.shape[1]} != centers dimension {s.centers.dim}")
    d = np.linalg.norm(q[:, None, :] - s.centers.points[None, :, :], axis=2)
    out = kernel_eval(s.kernel, d, s.eps) @ s.lam
    if s.gamma.size:
        out = out + s.gamma[0]
    return float(out[0]) if single and out.shape[0] == 1 else out


def l2_error(exact_values, approx_values) -> float:
    """Root-mean-square error ``sqrt(mean(|u_e - u_a|^2))`` over Q points."""
    ue = np.asarray(exact_values, dtype=float)
    ua = np.asarray(approx_values, dtype=float)
    if ue.shape != ua.shape or ue.ndim != 1 or ue.size < 1:
        raise ValueError(f"mismatched value vectors: {ue.shape} vs {ua.shape}")
    return float(np.sqrt(np.mean((ue - ua) ** 2)))
