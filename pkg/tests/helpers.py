"""Independent oracles used by the test suite.

These deliberately re-derive results through different code paths than the
library (scalar loops, dense factorizations, closed forms) so that each
check is a genuine dual route.
"""

import numpy as np

from ctkrylov.ct import SHEPP_LOGAN_ELLIPSES, ImageGrid, ParallelGeometry


def siddon_oracle_matrix(grid: ImageGrid, geometry: ParallelGeometry) -> np.ndarray:
    """Dense Siddon system matrix via scalar alpha-merging, one ray at a time."""
    xmin, xmax, ymin, ymax = grid.extent
    h = grid.pixel_size
    nx, ny = grid.nx, grid.ny
    A = np.zeros((geometry.m, grid.n))
    offsets = geometry.bin_offsets()
    for ia, theta in enumerate(geometry.angles):
        ct, st = np.cos(theta), np.sin(theta)
        dx, dy = -st, ct
        for j, s in enumerate(offsets):
            px, py = s * ct, s * st
            # entry/exit parameters against each slab
            t0, t1 = -1e30, 1e30
            ok = True
            for p0, d, lo, hi in ((px, dx, xmin, xmax), (py, dy, ymin, ymax)):
                if abs(d) < 1e-14:
                    if p0 < lo or p0 > hi:
                        ok = False
                else:
                    a, b = (lo - p0) / d, (hi - p0) / d
                    t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
            if not ok or t1 <= t0:
                continue
            ts = {t0, t1}
            if abs(dx) >= 1e-14:
                for i in range(nx + 1):
                    t = (xmin + i * h - px) / dx
                    if t0 < t < t1:
                        ts.add(t)
            if abs(dy) >= 1e-14:
                for i in range(ny + 1):
                    t = (ymin + i * h - py) / dy
                    if t0 < t < t1:
                        ts.add(t)
            ts = sorted(ts)
            row = ia * geometry.det_count + j
            for ta, tb in zip(ts[:-1], ts[1:]):
                if tb - ta <= 1e-15:
                    continue
                tm = 0.5 * (ta + tb)
                ix = int(np.floor((px + tm * dx - xmin) / h))
                iy = int(np.floor((ymax - (py + tm * dy)) / h))
                ix = min(max(ix, 0), nx - 1)
                iy = min(max(iy, 0), ny - 1)
                A[row, iy * nx + ix] += tb - ta
    return A


def backprojector_oracle_matrix(grid: ImageGrid, geometry: ParallelGeometry) -> np.ndarray:
    """Dense pixel-driven backprojector via the per-pixel closed form."""
    X, Y = grid.pixel_centers()
    X, Y = X.ravel(), Y.ravel()
    det = geometry.det_count
    center = 0.5 * (det - 1)
    B = np.zeros((grid.n, geometry.m))
    for p in range(grid.n):
        for ia, theta in enumerate(geometry.angles):
            g = (X[p] * np.cos(theta) + Y[p] * np.sin(theta)) / geometry.det_spacing + center
            i0 = int(np.floor(g))
            w = g - i0
            if 0 <= i0 < det:
                B[p, ia * det + i0] += grid.pixel_size * (1.0 - w)
            if 0 <= i0 + 1 < det:
                B[p, ia * det + i0 + 1] += grid.pixel_size * w
    return B


def shepp_logan_oracle(grid: ImageGrid) -> np.ndarray:
    """Per-pixel ellipse-membership evaluation, scalar loops."""
    X, Y = grid.pixel_centers()
    scale = 0.5 * grid.nx * grid.pixel_size
    img = np.zeros(grid.n)
    for p, (x, y) in enumerate(zip(X.ravel() / scale, Y.ravel() / scale)):
        total = 0.0
        for value, a, b, x0, y0, phi_deg in SHEPP_LOGAN_ELLIPSES:
            phi = np.deg2rad(phi_deg)
            u = ((x - x0) * np.cos(phi) + (y - y0) * np.sin(phi)) / a
            v = (-(x - x0) * np.sin(phi) + (y - y0) * np.cos(phi)) / b
            if u * u + v * v <= 1.0:
                total += value
        img[p] = total
    return img


def chord_length(grid: ImageGrid, theta: float, offset: float) -> float:
    """Analytic length of a ray's intersection with the image square."""
    xmin, xmax, ymin, ymax = grid.extent
    ct, st = np.cos(theta), np.sin(theta)
    px, py = offset * ct, offset * st
    dx, dy = -st, ct
    t0, t1 = -1e30, 1e30
    for p0, d, lo, hi in ((px, dx, xmin, xmax), (py, dy, ymin, ymax)):
        if abs(d) < 1e-14:
            if p0 < lo or p0 > hi:
                return 0.0
        else:
            a, b = (lo - p0) / d, (hi - p0) / d
            t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
    return max(t1 - t0, 0.0)


def tikhonov_normal_equations(H: np.ndarray, beta: float, lam: float) -> np.ndarray:
    """Dense regularized normal-equations solve of the projected problem."""
    kp1, k = H.shape
    rhs = np.zeros(kp1)
    rhs[0] = beta
    return np.linalg.solve(H.T @ H + lam * lam * np.eye(k), H.T @ rhs)


def ssim_oracle(a: np.ndarray, b: np.ndarray, shape, dynamic_range=None) -> float:
    """Direct windowed SSIM evaluation, one 8x8 window at a time."""
    a = np.asarray(a, dtype=float).reshape(shape)
    b = np.asarray(b, dtype=float).reshape(shape)
    L = (b.max() - b.min()) if dynamic_range is None else dynamic_range
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    ax = np.arange(8) - 3.5
    g = np.exp(-(ax ** 2) / (2 * 1.5 ** 2))
    w = np.outer(g, g)
    w /= w.sum()
    vals = []
    ny, nx = shape
    for i in range(ny - 7):
        for j in range(nx - 7):
            wa = a[i:i + 8, j:j + 8]
            wb = b[i:i + 8, j:j + 8]
            mu_a = (w * wa).sum()
            mu_b = (w * wb).sum()
            var_a = (w * wa * wa).sum() - mu_a ** 2
            var_b = (w * wb * wb).sum() - mu_b ** 2
            cov = (w * wa * wb).sum() - mu_a * mu_b
            vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                        / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return float(np.mean(vals))
