"""Golub-Kahan bidiagonalization solvers: LSQR, LSMR, and hybrid variants.

These are comparison methods and oracles for the matched-case equivalence
results, so they favor transparency over the classical short recurrences:
both bases are stored with full reorthogonalization and the projected
problem is solved directly at every iteration.

LSQR minimizes ||A x - b||_2 over x in K_k(A^T A, A^T b); its hybrid adds
lambda^2 ||y||^2 to the projected bidiagonal problem. LSMR minimizes the
normal-equations residual ||A^T (A x - b)||_2 over the same subspace; its
hybrid adds lambda^2 ||x||^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import time

from . import stopping as stoprules
from .gmres import ConfigError, SolveResult, SolverConfig, _check_dims, _make_record
from .linop import LinearOperator
from .regparam import DegenerateCurveError, select_lambda


@dataclass
class BidiagState:
    """Golub-Kahan factorization A V_k = U_{k+1} B_k with stored bases."""

    u_basis: list[np.ndarray]
    v_basis: list[np.ndarray]
    alphas: list[float]
    betas: list[float]  # beta_2 .. beta_{k+1}
    beta_init: float
    k: int = 0

    @property
    def bidiag(self) -> np.ndarray:
        """Lower-bidiagonal (k+1) x k projected matrix."""
        B = np.zeros((self.k + 1, self.k))
        for i in range(self.k):
            B[i, i] = self.alphas[i]
            B[i + 1, i] = self.betas[i]
        return B


def _reorth(v: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for _ in range(2):
        for q in basis:
            v = v - (q @ v) * q
    return v


def _bidiag_start(A: LinearOperator, At: LinearOperator, b: np.ndarray) -> BidiagState:
    beta = float(np.linalg.norm(b))
    if beta == 0.0:
        raise ValueError("cannot bidiagonalize a zero right-hand side")
    u1 = b / beta
    return BidiagState(u_basis=[u1], v_basis=[], alphas=[], betas=[], beta_init=beta)


def _bidiag_step(state: BidiagState, A: LinearOperator, At: LinearOperator) -> bool:
    """Advance one step; returns True on breakdown (invariant subspace)."""
    k = state.k
    if k == 0:
        v = At.apply(state.u_basis[0])
    else:
        v = At.apply(state.u_basis[k]) - state.betas[k - 1] * state.v_basis[k - 1]
    v = _reorth(v, state.v_basis)
    alpha = float(np.linalg.norm(v))
    if alpha <= 1e-14 * state.beta_init:
        return True
    v /= alpha
    state.v_basis.append(v)
    state.alphas.append(alpha)

    u = A.apply(v) - alpha * state.u_basis[k]
    u = _reorth(u, state.u_basis)
    beta = float(np.linalg.norm(u))
    state.k = k + 1
    if beta <= 1e-14 * state.beta_init:
        state.betas.append(0.0)
        return True
    state.betas.append(beta)
    state.u_basis.append(u / beta)
    return False


def _solve_damped_ls(mat: np.ndarray, rhs: np.ndarray, lam: float) -> np.ndarray:
    """argmin ||mat y - rhs||^2 + lam^2 ||y||^2."""
    k = mat.shape[1]
    if lam > 0.0:
        mat = np.vstack([mat, lam * np.eye(k)])
        rhs = np.concatenate([rhs, np.zeros(k)])
    y, _, _, _ = np.linalg.lstsq(mat, rhs, rcond=None)
    return y


def _run_gk(A: LinearOperator, At: LinearOperator, b: np.ndarray, cfg: SolverConfig,
            flavor: str, x_true=None, image_shape=None) -> SolveResult:
    cfg.validate()
    b = np.asarray(b, dtype=np.float64)
    _check_dims(A, At, b)
    if cfg.x0 is not None and np.any(cfg.x0):
        raise ConfigError("Golub-Kahan solvers support only x0 = 0")
    if cfg.restart_period:
        raise ConfigError("Golub-Kahan solvers do not restart")
    hybrid = cfg.method.endswith("-hybrid")

    state = _bidiag_start(A, At, b)
    At_b = At.apply(b)
    atav_cols: list[np.ndarray] = []  # A^T A v_j, for the LSMR objective
    records = []
    history: list[float] = []
    snapshots: dict[int, np.ndarray] = {}
    stop_reason = None
    x = np.zeros(A.cols)
    prev_lambda = 0.0
    t_start = time.perf_counter()

    for _ in range(cfg.max_iter):
        broke = _bidiag_step(state, A, At)
        if state.k == 0:
            stop_reason = "breakdown"
            break
        k = state.k
        V = np.column_stack(state.v_basis)
        Bk = state.bidiag

        if hybrid:
            try:
                lam = select_lambda(Bk, state.beta_init, cfg.lambda_strategy, cfg.lambda_value)
            except DegenerateCurveError:
                lam = prev_lambda
        else:
            lam = 0.0
        prev_lambda = lam

        if flavor == "lsqr":
            rhs = np.zeros(k + 1)
            rhs[0] = state.beta_init
            y = _solve_damped_ls(Bk, rhs, lam)
        else:  # lsmr: projected normal-equations objective
            if len(atav_cols) < k:
                atav_cols.append(At.apply(A.apply(state.v_basis[k - 1])))
            G = np.column_stack(atav_cols)
            y = _solve_damped_ls(G, At_b, lam)
        x_k = V @ y

        data_resid = b - A.apply(x_k)
        data_norm = float(np.linalg.norm(data_resid))
        if flavor == "lsqr":
            method_norm = data_norm
            proj_norm = float(np.linalg.norm(Bk @ y - np.eye(k + 1, 1).ravel() * state.beta_init))
        else:
            ne_resid = At.apply(data_resid)
            method_norm = float(np.linalg.norm(ne_resid))
            proj_norm = method_norm
        rec = _make_record(len(records) + 1, lam, method_norm, data_norm, proj_norm,
                           x_k, x_true, image_shape, t_start)
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
    return SolveResult(x=x, records=records, stop_reason=stop_reason, cycles=1,
                       snapshots=snapshots)


def run_lsqr(A: LinearOperator, At: LinearOperator, b: np.ndarray, cfg: SolverConfig,
             **kwargs) -> SolveResult:
    """(Hybrid) LSQR; At must be the exact adjoint of A (matched use only)."""
    if cfg.method not in ("lsqr", "lsqr-hybrid"):
        raise ConfigError(f"run_lsqr got method {cfg.method!r}")
    return _run_gk(A, At, b, cfg, "lsqr", **kwargs)


def run_lsmr(A: LinearOperator, At: LinearOperator, b: np.ndarray, cfg: SolverConfig,
             **kwargs) -> SolveResult:
    """(Hybrid) LSMR; At must be the exact adjoint of A (matched use only)."""
    if cfg.method not in ("lsmr", "lsmr-hybrid"):
        raise ConfigError(f"run_lsmr got method {cfg.method!r}")
    return _run_gk(A, At, b, cfg, "lsmr", **kwargs)
