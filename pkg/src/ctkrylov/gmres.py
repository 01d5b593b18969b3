"""AB-/BA-GMRES drivers, hybrid variants, restarting, and run records.

AB-GMRES runs Arnoldi on the composite A*B in data space and maps back with
x_k = x_0 + B W_k y_k; BA-GMRES runs on B*A in solution space with
x_k = x_0 + W_k y_k. Hybrid variants replace the projected least-squares
solve with projected Tikhonov, re-selecting lambda from scratch every
iteration as the Krylov subspace grows.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .arnoldi import (ArnoldiState, Breakdown, arnoldi_step, solve_projected_tikhonov)
from .linop import LinearOperator, OperatorShapeError, compose
from .regparam import DegenerateCurveError, select_lambda
from . import stopping as stoprules
from .metrics import rre as rre_metric
from .metrics import ssim as ssim_metric

GMRES_METHODS = ("ab", "ba", "ab-hybrid", "ba-hybrid")
GK_METHODS = ("lsqr", "lsmr", "lsqr-hybrid", "lsmr-hybrid")
ALL_METHODS = GMRES_METHODS + GK_METHODS


class ConfigError(ValueError):
    """Inconsistent solver configuration."""


@dataclass(frozen=True)
class SolverConfig:
    """Everything that determines one solver run.

    restart_period == 0 disables restarting. For 'dp' stopping, noise_norm
    must be supplied (the exact ||e||_2 is known for synthetic problems).
    """

    method: str = "ab"
    max_iter: int = 100
    lambda_strategy: str = "none"  # none | fixed | lcurve | gcv
    lambda_value: float | None = None
    stopping_rule: str = "none"  # none | dp | ncp | rns
    dp_tau: float = stoprules.DEFAULT_DP_TAU
    noise_norm: float | None = None
    ncp_threshold: float = stoprules.DEFAULT_NCP_THRESHOLD
    rns_epsilon: float = stoprules.DEFAULT_RNS_EPSILON
    restart_period: int = 0
    reorthogonalize: bool = True
    x0: np.ndarray | None = None
    snapshot_stride: int = 0  # keep a copy of x_k every this many iterations
    name: str | None = None

    def validate(self) -> None:
        if self.method not in ALL_METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {ALL_METHODS}")
        hybrid = self.method.endswith("-hybrid")
        if hybrid and self.lambda_strategy == "none":
            raise ConfigError(f"{self.method} requires a lambda strategy other than 'none'")
        if not hybrid and self.lambda_strategy != "none":
            raise ConfigError(
                f"plain method {self.method!r} cannot use lambda strategy "
                f"{self.lambda_strategy!r}; use the -hybrid variant"
            )
        if self.lambda_strategy == "fixed" and (
            self.lambda_value is None or self.lambda_value < 0
        ):
            raise ConfigError("fixed lambda strategy requires a nonnegative lambda_value")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be positive, got {self.max_iter}")
        if self.restart_period < 0:
            raise ConfigError(f"restart_period must be nonnegative, got {self.restart_period}")
        if self.stopping_rule == "dp":
            if self.noise_norm is None or self.noise_norm < 0:
                raise ConfigError("dp stopping requires a nonnegative noise_norm")
            if self.dp_tau < 1.0:
                raise ConfigError(f"dp safety factor must be >= 1, got {self.dp_tau}")
        if self.stopping_rule not in ("none", "dp", "ncp", "rns"):
            raise ConfigError(f"unknown stopping rule {self.stopping_rule!r}")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        parts = [self.method]
        if self.lambda_strategy not in ("none",):
            parts.append(self.lambda_strategy)
        if self.restart_period:
            parts.append(f"p{self.restart_period}")
        return "-".join(parts)


@dataclass
class IterationRecord:
    k: int
    lambda_used: float
    residual_norm: float  # the method's own residual (B-space for BA)
    data_residual_norm: float  # ||b - A x_k||_2, always
    proj_residual_norm: float
    solution_norm: float
    rre: float | None = None
    ssim: float | None = None
    elapsed: float = 0.0
    lambda_warning: bool = False


@dataclass
class SolveResult:
    x: np.ndarray
    records: list[IterationRecord]
    stop_reason: str  # maxiter | dp | ncp | rns | breakdown
    cycles: int = 1
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def data_residuals(self) -> np.ndarray:
        return np.array([r.data_residual_norm for r in self.records])

    @property
    def rres(self) -> np.ndarray:
        return np.array([r.rre for r in self.records], dtype=np.float64)


def _check_dims(A: LinearOperator, B: LinearOperator, b: np.ndarray) -> None:
    if A.cols != B.rows or B.cols != A.rows:
        raise OperatorShapeError(
            f"forward {A.rows}x{A.cols} and back {B.rows}x{B.cols} are not a projector pair"
        )
    if b.shape != (A.rows,):
        raise OperatorShapeError(f"data vector has shape {b.shape}, expected ({A.rows},)")


def run_gmres(
    A: LinearOperator,
    B: LinearOperator,
    b: np.ndarray,
    cfg: SolverConfig,
    x_true: np.ndarray | None = None,
    image_shape: tuple[int, int] | None = None,
) -> SolveResult:
    """Run (hybrid) AB-/BA-GMRES with optional restarting.

    With restart_period p > 0, the Krylov basis is discarded every p steps
    and the next cycle starts from the current iterate; stopping rules are
    evaluated at every iteration, across cycle boundaries. Per-iteration
    RRE/SSIM are recorded when x_true is given.
    """
    cfg.validate()
    if cfg.method not in GMRES_METHODS:
        raise ConfigError(f"run_gmres got non-GMRES method {cfg.method!r}")
    b = np.asarray(b, dtype=np.float64)
    _check_dims(A, B, b)
    mode = "ab" if cfg.method.startswith("ab") else "ba"
    n = A.cols
    x = np.zeros(n) if cfg.x0 is None else np.asarray(cfg.x0, dtype=np.float64).copy()
    if x.shape != (n,):
        raise ConfigError(f"x0 has shape {x.shape}, expected ({n},)")
    M = compose(A, B) if mode == "ab" else compose(B, A)

    K = cfg.max_iter
    p = cfg.restart_period if cfg.restart_period > 0 else K
    records: list[IterationRecord] = []
    history: list[float] = []
    snapshots: dict[int, np.ndarray] = {}
    stop_reason = None
    cycles = 0
    prev_lambda = 0.0
    t_start = time.perf_counter()

    while stop_reason is None and len(records) < K:
        # Start a cycle from the current iterate.
        data_res0 = b - A.apply(x)
        r0 = data_res0 if mode == "ab" else B.apply(data_res0)
        if np.linalg.norm(r0) == 0.0:
            stop_reason = "breakdown"  # exact solution already in hand
            if not records:
                records.append(_make_record(0, 0.0, 0.0, float(np.linalg.norm(data_res0)),
                                            0.0, x, x_true, image_shape, t_start))
            break
        cycles += 1
        state = ArnoldiState.start(r0)
        cycle_x0 = x

        for _ in range(min(p, K - len(records))):
            broke = False
            try:
                arnoldi_step(state, M, cfg.reorthogonalize)
            except Breakdown:
                broke = True
            k = state.k
            H = state.hess
            warn = False
            if cfg.method.endswith("-hybrid"):
                try:
                    lam = select_lambda(H, state.beta, cfg.lambda_strategy, cfg.lambda_value)
                except DegenerateCurveError:
                    lam = prev_lambda
                    warn = True
            else:
                lam = 0.0
            prev_lambda = lam
            sol = solve_projected_tikhonov(H, state.beta, lam)
            W = np.column_stack(state.basis[:k])
            update = W @ sol.y
            x_k = cycle_x0 + (B.apply(update) if mode == "ab" else update)

            data_resid = b - A.apply(x_k)
            data_norm = float(np.linalg.norm(data_resid))
            method_norm = data_norm if mode == "ab" else sol.proj_residual_norm
            rec = _make_record(len(records) + 1, lam, method_norm, data_norm,
                               sol.proj_residual_norm, x_k, x_true, image_shape, t_start)
            rec.lambda_warning = warn
            records.append(rec)
            history.append(data_norm)
            x = x_k
            if cfg.snapshot_stride and rec.k % cfg.snapshot_stride == 0:
                snapshots[rec.k] = x_k.copy()

            if cfg.stopping_rule == "dp" and stoprules.dp_should_stop(
                data_norm, cfg.noise_norm, cfg.dp_tau
            ):
                stop_reason = "dp"
            elif cfg.stopping_rule == "ncp" and stoprules.ncp_should_stop(
                data_resid, cfg.ncp_threshold
            ):
                stop_reason = "ncp"
            elif cfg.stopping_rule == "rns" and stoprules.rns_should_stop(
                history, cfg.rns_epsilon
            ):
                stop_reason = "rns"
            if broke and stop_reason is None:
                stop_reason = "breakdown"
            if stop_reason is not None:
                break

    if stop_reason is None:
        stop_reason = "maxiter"
    return SolveResult(x=x, records=records, stop_reason=stop_reason,
                       cycles=max(cycles, 1), snapshots=snapshots)


def _make_record(k, lam, method_norm, data_norm, proj_norm, x_k, x_true, image_shape, t_start):
    rec = IterationRecord(
        k=k,
        lambda_used=float(lam),
        residual_norm=float(method_norm),
        data_residual_norm=float(data_norm),
        proj_residual_norm=float(proj_norm),
        solution_norm=float(np.linalg.norm(x_k)),
        elapsed=time.perf_counter() - t_start,
    )
    if x_true is not None:
        rec.rre = rre_metric(x_k, x_true)
        if image_shape is not None and min(image_shape) >= 8:
            rec.ssim = ssim_metric(x_k, x_true, image_shape)
    return rec


def run_ab_gmres(A, B, b, cfg: SolverConfig, **kwargs) -> SolveResult:
    if not cfg.method.startswith("ab"):
        cfg = replace(cfg, method="ab-hybrid" if cfg.lambda_strategy != "none" else "ab")
    return run_gmres(A, B, b, cfg, **kwargs)


def run_ba_gmres(A, B, b, cfg: SolverConfig, **kwargs) -> SolveResult:
    if not cfg.method.startswith("ba"):
        cfg = replace(cfg, method="ba-hybrid" if cfg.lambda_strategy != "none" else "ba")
    return run_gmres(A, B, b, cfg, **kwargs)
