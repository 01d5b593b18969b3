import numpy as np
import pytest

from ctkrylov.arnoldi import solve_projected_tikhonov, svd_of_hessenberg
from ctkrylov.regparam import (DegenerateCurveError, LCurvePoint, gcv_minimize,
                               gcv_values, lambda_grid, lcurve_corner, select_lambda,
                               tikhonov_curve_points)


def random_hessenberg(kp1, k, seed):
    rng = np.random.default_rng(seed)
    return np.triu(rng.standard_normal((kp1, k)), k=-1)


def ill_posed_hessenberg(kp1, k, seed, decay=2.0):
    """Hessenberg-shaped factor whose singular values decay geometrically."""
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((kp1, k)))
    v, _ = np.linalg.qr(rng.standard_normal((k, k)))
    s = decay ** -np.arange(k, dtype=float)
    mat = u @ np.diag(s) @ v.T
    # rotate back into Hessenberg form via QR of the leading structure; the
    # selectors only need the SVD, so shape alone is irrelevant -- keep dense.
    return mat


class TestLambdaGrid:
    def test_span_and_count(self):
        grid = lambda_grid(np.array([2.0, 0.5, 0.01]), count=50)
        assert len(grid) == 50
        assert grid[0] == pytest.approx(0.01 * 1e-4)
        assert grid[-1] == pytest.approx(2.0)
        assert np.all(np.diff(grid) > 0)

    def test_floor_applies(self):
        grid = lambda_grid(np.array([1e-10, 1.0]))
        assert grid[0] == pytest.approx(1e-12)

    def test_all_zero_rejected(self):
        with pytest.raises(DegenerateCurveError):
            lambda_grid(np.zeros(3))


class TestCurvePoints:
    def test_scalar_example(self):
        # H = [[1],[0]], beta = 1, lam = 1: y = 1/2, residual = 1/2.
        s, u, _ = svd_of_hessenberg(np.array([[1.0], [0.0]]))
        pts = tikhonov_curve_points(s, u, 1.0, np.array([1.0]))
        assert pts[0].log_solution == pytest.approx(np.log(0.5))
        assert pts[0].log_residual == pytest.approx(np.log(0.5))

    def test_matches_direct_solves(self):
        H = random_hessenberg(8, 7, 0)
        s, u, _ = svd_of_hessenberg(H)
        grid = lambda_grid(s, 20)
        pts = tikhonov_curve_points(s, u, 1.3, grid)
        for p in pts:
            sol = solve_projected_tikhonov(H, 1.3, p.lam)
            assert p.log_solution == pytest.approx(np.log(np.linalg.norm(sol.y)), abs=1e-10)
            assert p.log_residual == pytest.approx(np.log(sol.proj_residual_norm), abs=1e-10)

    def test_monotone_along_grid(self):
        H = random_hessenberg(9, 8, 1)
        s, u, _ = svd_of_hessenberg(H)
        pts = tikhonov_curve_points(s, u, 1.0, lambda_grid(s, 60))
        res = [p.log_residual for p in pts]
        sol = [p.log_solution for p in pts]
        assert all(a <= b + 1e-12 for a, b in zip(res, res[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(sol, sol[1:]))


class TestLCurveCorner:
    def test_synthetic_right_angle(self):
        # Vertical drop then horizontal run; maximum curvature sits at the
        # junction, whose lambda we plant explicitly.
        pts = []
        lams = np.geomspace(1e-4, 1.0, 21)
        for i, lam in enumerate(lams):
            if i < 10:
                pts.append(LCurvePoint(lam, -1.0, 10.0 - i))
            else:
                pts.append(LCurvePoint(lam, -1.0 + (i - 10), 0.0))
        assert lcurve_corner(pts) == pytest.approx(lams[10])

    def test_straight_line_degenerate(self):
        pts = [LCurvePoint(lam, float(i), -float(i))
               for i, lam in enumerate(np.geomspace(1e-3, 1.0, 30))]
        with pytest.raises(DegenerateCurveError):
            lcurve_corner(pts)

    def test_too_few_points(self):
        pts = [LCurvePoint(0.1 * (i + 1), float(i), -float(i)) for i in range(4)]
        with pytest.raises(DegenerateCurveError, match="at least 5"):
            lcurve_corner(pts)

    def test_refinement_consistency(self):
        # The coarse-grid corner should fall within one coarse cell of the
        # corner found on a 10x finer grid.
        H = ill_posed_hessenberg(15, 14, 2)
        s, u, _ = svd_of_hessenberg(H)
        beta = 1.0
        coarse = lambda_grid(s, 60)
        fine = lambda_grid(s, 600)
        lam_c = lcurve_corner(tikhonov_curve_points(s, u, beta, coarse))
        lam_f = lcurve_corner(tikhonov_curve_points(s, u, beta, fine))
        step = np.log(coarse[1] / coarse[0])
        assert abs(np.log(lam_f / lam_c)) <= 2 * step


class TestGcv:
    def test_scalar_example(self):
        # H = [[1],[0]], beta = 1, lam = 1: residual^2 = 1/4,
        # trace = 2 - 1/2 = 3/2, GCV = (1/4)/(9/4) = 1/9.
        s, u, _ = svd_of_hessenberg(np.array([[1.0], [0.0]]))
        vals = gcv_values(s, u, 1.0, np.array([1.0]))
        assert vals[0] == pytest.approx(1.0 / 9.0)

    def test_matches_direct_formula(self):
        H = random_hessenberg(8, 7, 3)
        s, u, _ = svd_of_hessenberg(H)
        grid = lambda_grid(s, 20)
        vals = gcv_values(s, u, 1.0, grid)
        rhs = np.zeros(8)
        rhs[0] = 1.0
        for lam, v in zip(grid, vals):
            y = np.linalg.solve(H.T @ H + lam * lam * np.eye(7), H.T @ rhs)
            res_sq = np.sum((H @ y - rhs) ** 2)
            trace = 8 - np.trace(H @ np.linalg.solve(H.T @ H + lam * lam * np.eye(7), H.T))
            assert v == pytest.approx(res_sq / trace**2, rel=1e-9)

    def test_trace_at_least_one(self):
        H = random_hessenberg(10, 9, 4)
        s, u, _ = svd_of_hessenberg(H)
        grid = lambda_grid(s, 30)
        for lam in grid:
            trace = 10 - np.sum(s * s / (s * s + lam * lam))
            assert trace >= 1.0 - 1e-12

    def test_refinement_consistency(self):
        H = ill_posed_hessenberg(15, 14, 5)
        s, u, _ = svd_of_hessenberg(H)
        # perturb the rhs off the pure e1 direction is not possible here --
        # the projected rhs is always beta*e1 -- so vary beta only.
        coarse = lambda_grid(s, 60)
        fine = lambda_grid(s, 600)
        lam_c = gcv_minimize(s, u, 1.0, coarse)
        lam_f = gcv_minimize(s, u, 1.0, fine)
        step = np.log(coarse[1] / coarse[0])
        assert abs(np.log(lam_f / lam_c)) <= 2 * step


class TestSelectLambda:
    def test_none(self):
        assert select_lambda(np.ones((2, 1)), 1.0, "none") == 0.0

    def test_fixed(self):
        assert select_lambda(np.ones((2, 1)), 1.0, "fixed", fixed_value=0.3) == 0.3

    def test_fixed_requires_value(self):
        with pytest.raises(ValueError, match="nonnegative"):
            select_lambda(np.ones((2, 1)), 1.0, "fixed")

    def test_unknown_strategy(self):
        with pytest.raises(ValueError, match="unknown lambda strategy"):
            select_lambda(np.ones((2, 1)), 1.0, "oracle")

    def test_lcurve_and_gcv_on_grid(self):
        H = ill_posed_hessenberg(15, 14, 6)
        s, _, _ = svd_of_hessenberg(H)
        grid = lambda_grid(s)
        for strategy in ("lcurve", "gcv"):
            lam = select_lambda(H, 1.0, strategy)
            assert lam > 0
            assert np.any(np.isclose(grid, lam))

    def test_noise_free_gcv_prefers_small_lambda(self):
        # Consistent, well-conditioned projected problem: the residual term
        # vanishes as lam -> 0, so GCV picks the smallest grid value.
        H = np.array([[2.0, 0.3], [0.1, 1.5], [0.0, 0.0]])
        s, u, _ = svd_of_hessenberg(H)
        grid = lambda_grid(s, 100)
        lam = gcv_minimize(s, u, 1.0, grid)
        assert lam == pytest.approx(grid[0])
