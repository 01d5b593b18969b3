"""2-D parallel-beam CT simulation layer.

Produces genuinely unmatched projector pairs: the forward operator A is a
ray-driven Siddon projector (exact intersection lengths), while the
backprojector B is pixel-driven with linear detector interpolation. The two
discretizations differ, so B != A^T -- the mismatch that real GPU toolboxes
exhibit. A matched (exact transpose) backprojector is available for
desk-scale verification.

Conventions
-----------
Image square centered at the origin: x in [-nx*h/2, nx*h/2] and likewise in
y, with pixel size h. Images are stored row-major as (ny, nx) with row 0 at
the top (largest y). At angle 0 rays travel along +y and the detector axis
is +x; the ray for detector bin j has perpendicular offset
(j - (det_count-1)/2) * det_spacing along the detector direction
(cos t, sin t), and travels along (-sin t, cos t). Sinograms are stored
angle-major: sample index = angle_index * det_count + bin_index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .linop import LinearOperator, OperatorShapeError, transpose_of

DENSE_ASSEMBLY_GUARD = 10**7


class GeometryError(ValueError):
    """Raised for invalid grid/geometry configuration."""


@dataclass(frozen=True)
class ImageGrid:
    """Centered square-pixel image grid; nx*ny is the unknown count n."""

    nx: int
    ny: int
    pixel_size: float = 1.0

    def __post_init__(self):
        if self.nx <= 0 or self.ny <= 0 or self.pixel_size <= 0:
            raise GeometryError(f"invalid grid: nx={self.nx}, ny={self.ny}, h={self.pixel_size}")

    @property
    def n(self) -> int:
        return self.nx * self.ny

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) of the image square in world units."""
        hx = 0.5 * self.nx * self.pixel_size
        hy = 0.5 * self.ny * self.pixel_size
        return (-hx, hx, -hy, hy)

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World coordinates (X, Y) of pixel centers, each shaped (ny, nx)."""
        xmin, _, _, ymax = self.extent
        h = self.pixel_size
        xc = xmin + (np.arange(self.nx) + 0.5) * h
        yc = ymax - (np.arange(self.ny) + 0.5) * h
        return np.meshgrid(xc, yc)


@dataclass(frozen=True)
class ParallelGeometry:
    """Parallel-beam acquisition: view angles plus a centered linear detector."""

    angles: np.ndarray
    det_count: int
    det_spacing: float

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=np.float64)
        object.__setattr__(self, "angles", a)
        if a.ndim != 1 or a.size == 0:
            raise GeometryError("angles must be a non-empty 1-D array")
        if np.any(np.diff(a) <= 0) or a[0] < 0 or a[-1] >= np.pi:
            raise GeometryError("angles must be strictly increasing within [0, pi)")
        if self.det_count <= 0 or self.det_spacing <= 0:
            raise GeometryError(
                f"invalid detector: count={self.det_count}, spacing={self.det_spacing}"
            )

    @property
    def m(self) -> int:
        return len(self.angles) * self.det_count

    def bin_offsets(self) -> np.ndarray:
        """Perpendicular detector-bin-center offsets, centered on the origin."""
        j = np.arange(self.det_count, dtype=np.float64)
        return (j - 0.5 * (self.det_count - 1)) * self.det_spacing


# Modified Shepp-Logan ellipse stack: (intensity, a, b, x0, y0, phi_degrees)
# on the unit square [-1, 1]^2; intensities stack to values in [0, 1].
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def shepp_logan(grid: ImageGrid) -> np.ndarray:
    """Sample the modified Shepp-Logan phantom at pixel centers.

    The image square is mapped onto [-1, 1]^2 regardless of pixel size.
    Returns the flattened row-major image vector of length grid.n.
    """
    if grid.nx != grid.ny:
        raise GeometryError(f"phantom requires a square grid, got {grid.nx}x{grid.ny}")
    X, Y = grid.pixel_centers()
    scale = 0.5 * grid.nx * grid.pixel_size
    X = X / scale
    Y = Y / scale
    img = np.zeros_like(X)
    for value, a, b, x0, y0, phi_deg in SHEPP_LOGAN_ELLIPSES:
        phi = np.deg2rad(phi_deg)
        c, s = np.cos(phi), np.sin(phi)
        u = ((X - x0) * c + (Y - y0) * s) / a
        v = (-(X - x0) * s + (Y - y0) * c) / b
        img[u * u + v * v <= 1.0] += value
    return img.ravel()


def _siddon_ray(grid: ImageGrid, theta: float, offset: float):
    """Intersection of one ray with the pixel grid.

    Returns (pixel_indices, lengths) for the flattened row-major image.
    The ray is p(t) = offset*(cos t, sin t) + t*(-sin t, cos t).
    """
    xmin, xmax, ymin, ymax = grid.extent
    h = grid.pixel_size
    nx, ny = grid.nx, grid.ny
    ct, st = np.cos(theta), np.sin(theta)
    px, py = offset * ct, offset * st
    dx, dy = -st, ct

    # Clip the ray parameter to the image square.
    t_lo, t_hi = -np.inf, np.inf
    for p0, d, lo, hi in ((px, dx, xmin, xmax), (py, dy, ymin, ymax)):
        if abs(d) < 1e-14:
            if p0 < lo or p0 > hi:
                return np.empty(0, dtype=np.int64), np.empty(0)
        else:
            t0, t1 = (lo - p0) / d, (hi - p0) / d
            if t0 > t1:
                t0, t1 = t1, t0
            t_lo, t_hi = max(t_lo, t0), min(t_hi, t1)
    if t_hi <= t_lo:
        return np.empty(0, dtype=np.int64), np.empty(0)

    crossings = [np.array([t_lo, t_hi])]
    if abs(dx) >= 1e-14:
        tx = (xmin + np.arange(nx + 1) * h - px) / dx
        crossings.append(tx[(tx > t_lo) & (tx < t_hi)])
    if abs(dy) >= 1e-14:
        ty = (ymin + np.arange(ny + 1) * h - py) / dy
        crossings.append(ty[(ty > t_lo) & (ty < t_hi)])
    t = np.unique(np.concatenate(crossings))
    lengths = np.diff(t)
    t_mid = 0.5 * (t[:-1] + t[1:])

    ix = np.clip(np.floor((px + t_mid * dx - xmin) / h).astype(np.int64), 0, nx - 1)
    # Row 0 is the top of the image (largest y).
    iy = np.clip(np.floor((ymax - (py + t_mid * dy)) / h).astype(np.int64), 0, ny - 1)
    keep = lengths > 1e-15
    return (iy[keep] * nx + ix[keep]), lengths[keep]


def forward_ray_driven(grid: ImageGrid, geometry: ParallelGeometry) -> LinearOperator:
    """Ray-driven Siddon forward projector as a matrix-free operator.

    The sparse system matrix is assembled once at construction (exact
    per-pixel intersection lengths); apply() is then a sparse matvec, which
    keeps desk-scale experiments fast while the interface stays matrix-free.
    """
    rows, cols, vals = [], [], []
    offsets = geometry.bin_offsets()
    for i, theta in enumerate(geometry.angles):
        for j, s in enumerate(offsets):
            pix, lengths = _siddon_ray(grid, float(theta), float(s))
            rows.append(np.full(pix.size, i * geometry.det_count + j, dtype=np.int64))
            cols.append(pix)
            vals.append(lengths)
    mat = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(geometry.m, grid.n),
    )
    return LinearOperator(geometry.m, grid.n, lambda v: mat @ v, sparse_matrix=mat)


def back_pixel_driven(grid: ImageGrid, geometry: ParallelGeometry) -> LinearOperator:
    """Pixel-driven backprojector with linear detector interpolation.

    For each pixel and view angle, the pixel center is projected onto the
    detector axis and the sinogram row is linearly interpolated at that
    continuous coordinate; contributions are scaled by the pixel size.
    Projections falling outside the detector extent contribute zero. This
    discretization deliberately differs from the Siddon forward projector.
    """
    X, Y = grid.pixel_centers()
    X, Y = X.ravel(), Y.ravel()
    det_count = geometry.det_count
    n_angles = len(geometry.angles)
    center = 0.5 * (det_count - 1)

    # Per-angle interpolation stencils, precomputed once.
    idx0 = np.empty((n_angles, grid.n), dtype=np.int64)
    w1 = np.empty((n_angles, grid.n))
    m0 = np.empty((n_angles, grid.n), dtype=bool)
    m1 = np.empty((n_angles, grid.n), dtype=bool)
    for i, theta in enumerate(geometry.angles):
        g = (X * np.cos(theta) + Y * np.sin(theta)) / geometry.det_spacing + center
        i0 = np.floor(g).astype(np.int64)
        idx0[i] = np.clip(i0, 0, det_count - 1)
        w1[i] = g - i0
        m0[i] = (i0 >= 0) & (i0 <= det_count - 1)
        m1[i] = (i0 + 1 >= 0) & (i0 + 1 <= det_count - 1)
    idx1 = np.clip(idx0 + 1, 0, det_count - 1)
    h = grid.pixel_size

    def apply(u: np.ndarray) -> np.ndarray:
        sino = u.reshape(n_angles, det_count)
        out = np.zeros(grid.n)
        for i in range(n_angles):  # fixed order: deterministic reduction
            row = sino[i]
            out += h * (
                (1.0 - w1[i]) * np.where(m0[i], row[idx0[i]], 0.0)
                + w1[i] * np.where(m1[i], row[idx1[i]], 0.0)
            )
        return out

    return LinearOperator(grid.n, geometry.m, apply)


def matched_back(forward: LinearOperator) -> LinearOperator:
    """Exact-transpose backprojector for a forward operator.

    Uses the forward projector's assembled sparse matrix when available;
    otherwise assembles densely, which is guarded to desk scale.
    """
    mat = forward.sparse_matrix
    if mat is not None:
        mat_t = mat.T.tocsr()
        return LinearOperator(forward.cols, forward.rows, lambda v: mat_t @ v)
    if forward.rows * forward.cols > DENSE_ASSEMBLY_GUARD:
        raise GeometryError(
            "matched mode requires assembling the forward matrix; "
            f"{forward.rows}x{forward.cols} exceeds the desk-scale guard of "
            f"{DENSE_ASSEMBLY_GUARD} entries"
        )
    return transpose_of(forward.to_dense())


def add_noise(b_clean: np.ndarray, level: float, seed: int) -> tuple[np.ndarray, float]:
    """Add white Gaussian noise scaled to an exact relative level.

    The Gaussian draw is normalized so that ||e||_2 = level * ||b_clean||_2
    holds exactly, making the noise norm usable by the discrepancy principle
    without estimation. Deterministic given the seed.
    """
    if level < 0:
        raise ValueError(f"noise level must be nonnegative, got {level}")
    b_clean = np.asarray(b_clean, dtype=np.float64)
    noise_norm = level * float(np.linalg.norm(b_clean))
    if level == 0.0:
        return b_clean.copy(), 0.0
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(b_clean.size)
    e = noise_norm * g / np.linalg.norm(g)
    return b_clean + e, noise_norm


@dataclass
class CtProblem:
    """A fully populated CT test problem: operators, data, and ground truth."""

    grid: ImageGrid
    geometry: ParallelGeometry
    x_true: np.ndarray
    b_clean: np.ndarray
    b_noisy: np.ndarray
    noise_norm: float
    forward: LinearOperator
    back: LinearOperator
    matched: bool
    name: str = field(default="custom")

    @property
    def m(self) -> int:
        return self.geometry.m

    @property
    def n(self) -> int:
        return self.grid.n


def make_ct_problem(
    nx: int,
    n_angles: int,
    det_count: int | None = None,
    noise_level: float = 0.025,
    seed: int = 0,
    matched: bool = False,
    name: str = "custom",
) -> CtProblem:
    """Build a square Shepp-Logan problem on [-1, 1]^2.

    The detector spans the image diagonal so no projection is truncated.
    """
    if det_count is None:
        det_count = nx
    grid = ImageGrid(nx, nx, pixel_size=2.0 / nx)
    width = nx * grid.pixel_size
    det_spacing = np.sqrt(2.0) * width / det_count  # detector extent == diagonal
    angles = np.arange(n_angles) * np.pi / n_angles
    geometry = ParallelGeometry(angles, det_count, det_spacing)
    x_true = shepp_logan(grid)
    forward = forward_ray_driven(grid, geometry)
    back = matched_back(forward) if matched else back_pixel_driven(grid, geometry)
    b_clean = forward.apply(x_true)
    b_noisy, noise_norm = add_noise(b_clean, noise_level, seed)
    return CtProblem(
        grid, geometry, x_true, b_clean, b_noisy, noise_norm, forward, back, matched, name
    )


BUILTIN_PROBLEMS = ("tp1-like", "tp2", "tp3-desk")


def build_test_problem(name: str, matched: bool = False, seed: int = 0) -> CtProblem:
    """Construct one of the built-in test problems.

    tp1-like: 128x128 phantom, 180 angles x 128 bins, 0.1% noise.
    tp2:      128x128 phantom, 50 angles x 128 bins, 2.5% noise.
    tp3-desk: 256x256 phantom, 50 angles x 256 bins, 1.5% noise.
    """
    if name == "tp1-like":
        return make_ct_problem(128, 180, 128, 0.001, seed, matched, name)
    if name == "tp2":
        return make_ct_problem(128, 50, 128, 0.025, seed, matched, name)
    if name == "tp3-desk":
        return make_ct_problem(256, 50, 256, 0.015, seed, matched, name)
    raise GeometryError(f"unknown test problem {name!r}; choose from {BUILTIN_PROBLEMS}")


def write_pgm(path, image: np.ndarray, shape: tuple[int, int], window=None) -> None:
    """Write a 16-bit grayscale PGM, values linearly mapped from [lo, hi]."""
    img = np.asarray(image, dtype=np.float64).reshape(shape)
    lo, hi = window if window is not None else (img.min(), img.max())
    if hi <= lo:
        scaled = np.zeros_like(img)
    else:
        scaled = np.clip((img - lo) / (hi - lo), 0.0, 1.0)
    data = np.round(scaled * 65535).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{shape[1]} {shape[0]}\n65535\n".encode("ascii"))
        f.write(data.tobytes())


def write_csv_image(path, image: np.ndarray, shape: tuple[int, int]) -> None:
    """Write an image (or sinogram) as raw row-major CSV."""
    img = np.asarray(image, dtype=np.float64).reshape(shape)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in img:
            f.write(",".join(repr(float(v)) for v in row))
            f.write("\n")
