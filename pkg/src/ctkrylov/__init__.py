"""Hybrid AB-/BA-GMRES solvers for inverse problems with unmatched
projector pairs, with a 2-D CT simulation layer and experiment tooling."""

from .linop import (LinearOperator, OperatorShapeError, compose, dense_operator,
                    op_norm_estimate, transpose_of)
from .ct import (CtProblem, ImageGrid, ParallelGeometry, add_noise, back_pixel_driven,
                 build_test_problem, forward_ray_driven, make_ct_problem, matched_back,
                 shepp_logan)
from .arnoldi import (ArnoldiState, Breakdown, ProjectedSolution, arnoldi_step,
                      solve_projected_ls, solve_projected_tikhonov, svd_of_hessenberg)
from .gmres import (IterationRecord, SolveResult, SolverConfig, run_ab_gmres,
                    run_ba_gmres, run_gmres)
from .gk import BidiagState, run_lsqr, run_lsmr
from .regparam import (DegenerateCurveError, gcv_minimize, lambda_grid, lcurve_corner,
                       select_lambda, tikhonov_curve_points)
from .stopping import dp_should_stop, ncp_distance, ncp_should_stop, rns_should_stop
from .metrics import rre, ssim

__version__ = "0.1.0"
