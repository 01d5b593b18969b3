"""Per-iteration regularization parameter selection on the projected problem.

Both the L-curve corner and the GCV minimizer are located by exhaustive
evaluation on a log-spaced grid bounded by the singular-value range of the
projected Hessenberg. The projected problems are tiny, so a grid sweep is
cheap and robust against the multiple local minima GCV tends to exhibit.
All quantities come from Tikhonov filter factors s_i^2 / (s_i^2 + lam^2)
applied to the SVD-transformed right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arnoldi import svd_of_hessenberg

DEFAULT_GRID_COUNT = 200
LAMBDA_FLOOR = 1e-12
CURVATURE_FLOOR = 1e-9


class DegenerateCurveError(RuntimeError):
    """The lambda-selection curve carries no usable information."""


def lambda_grid(singular_values: np.ndarray, count: int = DEFAULT_GRID_COUNT) -> np.ndarray:
    """Log-spaced candidate lambdas spanning the singular-value range."""
    s = np.asarray(singular_values, dtype=np.float64)
    s_max = float(s.max(initial=0.0))
    if s_max <= 0.0:
        raise DegenerateCurveError("all singular values are zero")
    s_min = float(s[s > 0].min())
    lo = max(s_min * 1e-4, LAMBDA_FLOOR)
    return np.geomspace(lo, s_max, count)


@dataclass(frozen=True)
class LCurvePoint:
    lam: float
    log_residual: float
    log_solution: float


def _filtered_norms(s, c, incompat_sq, lam):
    """(||y_lam||^2, ||H y_lam - beta e1||^2) from filter factors."""
    denom = s * s + lam * lam
    sol_sq = float(np.sum((s * c / denom) ** 2))
    res_sq = float(np.sum(((lam * lam / denom) * c) ** 2)) + incompat_sq
    return sol_sq, res_sq


def _decompose_rhs(singular_values, left_factor, beta):
    """Coefficients of beta*e1 in the left singular basis plus the
    incompatible component squared (the part of beta*e1 outside range(H))."""
    u = np.asarray(left_factor, dtype=np.float64)
    c = beta * u[0, :]
    incompat_sq = max(beta * beta - float(c @ c), 0.0)
    return np.asarray(singular_values, dtype=np.float64), c, incompat_sq


def tikhonov_curve_points(singular_values, left_factor, beta,
                          grid: np.ndarray) -> list[LCurvePoint]:
    """Evaluate the projected Tikhonov L-curve on a lambda grid."""
    s, c, incompat_sq = _decompose_rhs(singular_values, left_factor, beta)
    if not np.any(s > 0):
        raise DegenerateCurveError("all singular values are zero")
    points = []
    for lam in grid:
        sol_sq, res_sq = _filtered_norms(s, c, incompat_sq, lam)
        points.append(
            LCurvePoint(
                lam=float(lam),
                log_residual=0.5 * np.log(max(res_sq, 1e-300)),
                log_solution=0.5 * np.log(max(sol_sq, 1e-300)),
            )
        )
    return points


def lcurve_corner(points: list[LCurvePoint]) -> float:
    """Lambda at the corner (maximum signed curvature) of the discrete L-curve.

    Curvature is computed with centered finite differences along the grid
    index; ties break toward larger lambda. A flat or non-finite curve
    raises DegenerateCurveError so callers can fall back.
    """
    if len(points) < 5:
        raise DegenerateCurveError(f"need at least 5 L-curve points, got {len(points)}")
    x = np.array([p.log_residual for p in points])
    y = np.array([p.log_solution for p in points])
    dx, dy = np.gradient(x), np.gradient(y)
    ddx, ddy = np.gradient(dx), np.gradient(dy)
    denom = (dx * dx + dy * dy) ** 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = (dx * ddy - dy * ddx) / denom
    finite = np.isfinite(kappa)
    if not np.any(finite):
        raise DegenerateCurveError("curvature is non-finite everywhere")
    kappa = np.where(finite, kappa, -np.inf)
    best = np.max(kappa)
    if best <= CURVATURE_FLOOR:
        raise DegenerateCurveError("L-curve has no corner (curvature flat)")
    # Ties toward larger lambda: scan from the large-lambda end.
    idx = len(kappa) - 1 - int(np.argmax(kappa[::-1]))
    return points[idx].lam


def gcv_values(singular_values, left_factor, beta, grid: np.ndarray) -> np.ndarray:
    """GCV(lam) = residual^2 / trace(I - H H_lam)^2 on the grid.

    trace(I - H H_lam) = (k+1) - sum_i s_i^2/(s_i^2 + lam^2), which is
    always >= 1 since each filter factor is at most 1.
    """
    s, c, incompat_sq = _decompose_rhs(singular_values, left_factor, beta)
    kp1 = np.asarray(left_factor).shape[0]
    vals = np.empty(len(grid))
    for i, lam in enumerate(grid):
        _, res_sq = _filtered_norms(s, c, incompat_sq, lam)
        trace = kp1 - float(np.sum(s * s / (s * s + lam * lam)))
        if trace <= 0.0:
            raise DegenerateCurveError("GCV trace underflow")
        vals[i] = res_sq / (trace * trace)
    return vals


def gcv_minimize(singular_values, left_factor, beta, grid: np.ndarray) -> float:
    """Grid lambda minimizing the GCV function; ties toward larger lambda."""
    vals = gcv_values(singular_values, left_factor, beta, grid)
    if not np.all(np.isfinite(vals)):
        raise DegenerateCurveError("GCV values are non-finite")
    idx = len(vals) - 1 - int(np.argmin(vals[::-1]))
    return float(grid[idx])


def select_lambda(hess: np.ndarray, beta: float, strategy: str,
                  fixed_value: float | None = None,
                  grid_count: int = DEFAULT_GRID_COUNT) -> float:
    """Dispatch lambda selection for one iteration's projected problem.

    strategy is one of 'none', 'fixed', 'lcurve', 'gcv'. Degenerate-curve
    failures propagate as DegenerateCurveError; the solver driver handles
    the fallback to the previous iteration's value.
    """
    if strategy == "none":
        return 0.0
    if strategy == "fixed":
        if fixed_value is None or fixed_value < 0:
            raise ValueError("fixed lambda strategy requires a nonnegative value")
        return float(fixed_value)
    s, u, _ = svd_of_hessenberg(hess)
    grid = lambda_grid(s, grid_count)
    if strategy == "lcurve":
        return lcurve_corner(tikhonov_curve_points(s, u, beta, grid))
    if strategy == "gcv":
        return gcv_minimize(s, u, beta, grid)
    raise ValueError(f"unknown lambda strategy {strategy!r}")
