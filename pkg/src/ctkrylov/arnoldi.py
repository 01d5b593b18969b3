"""Arnoldi process and projected least-squares / Tikhonov solves.

The Arnoldi factorization M W_k = W_{k+1} H_k is built with modified
Gram-Schmidt and an optional (default on) full reorthogonalization pass;
ill-posed composites lose orthogonality quickly without it. The projected
problems are tiny, so each solve recomputes from the stored Hessenberg.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linop import LinearOperator

BREAKDOWN_RTOL = 1e-14


class Breakdown(Exception):
    """Happy breakdown: the Krylov subspace became invariant at step k."""

    def __init__(self, k: int):
        super().__init__(f"Arnoldi breakdown at step {k}: Krylov subspace is invariant")
        self.k = k


@dataclass
class ArnoldiState:
    """Growing orthonormal basis and Hessenberg factor for one solver run.

    basis holds w_1 .. w_{k+1}; hess is (k+1) x k; beta = ||r_0||_2.
    """

    basis: list[np.ndarray]
    beta: float
    k: int = 0
    _hess_cols: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def start(cls, r0: np.ndarray) -> "ArnoldiState":
        beta = float(np.linalg.norm(r0))
        if beta == 0.0:
            raise ValueError("Arnoldi cannot start from a zero residual")
        return cls(basis=[r0 / beta], beta=beta)

    @property
    def hess(self) -> np.ndarray:
        """The (k+1) x k upper-Hessenberg matrix assembled from stored columns."""
        h = np.zeros((self.k + 1, self.k))
        for j, col in enumerate(self._hess_cols):
            h[: j + 2, j] = col
        return h


def arnoldi_step(state: ArnoldiState, M: LinearOperator, reorthogonalize: bool = True) -> None:
    """Advance the factorization by one step (in place).

    Raises Breakdown(k) when the new direction vanishes to machine
    precision relative to ||M w_k||; callers treat this as happy
    termination since the exact minimizer over the invariant subspace has
    been reached.
    """
    k = state.k
    w = state.basis[k]
    q = M.apply(w)
    q_norm = np.linalg.norm(q)
    h = np.empty(k + 2)
    for i in range(k + 1):
        h[i] = state.basis[i] @ q
        q = q - h[i] * state.basis[i]
    if reorthogonalize:
        for i in range(k + 1):
            c = state.basis[i] @ q
            h[i] += c
            q = q - c * state.basis[i]
    h[k + 1] = np.linalg.norm(q)
    state._hess_cols.append(h)
    state.k = k + 1
    if h[k + 1] <= BREAKDOWN_RTOL * q_norm:
        raise Breakdown(state.k)
    state.basis.append(q / h[k + 1])


@dataclass(frozen=True)
class ProjectedSolution:
    """Solution of a projected (possibly regularized) problem on H_k."""

    y: np.ndarray
    proj_residual_norm: float
    lambda_used: float
    rank_deficient: bool = False


def solve_projected_ls(hess: np.ndarray, beta: float) -> ProjectedSolution:
    """Minimize ||H_k y - beta e_1||_2 over y.

    Rank-deficient H yields the minimum-norm solution, flagged in the result.
    """
    hess = np.asarray(hess, dtype=np.float64)
    kp1, k = hess.shape
    rhs = np.zeros(kp1)
    rhs[0] = beta
    y, _, rank, _ = np.linalg.lstsq(hess, rhs, rcond=None)
    res = float(np.linalg.norm(hess @ y - rhs))
    return ProjectedSolution(y=y, proj_residual_norm=res, lambda_used=0.0,
                             rank_deficient=rank < k)


def solve_projected_tikhonov(hess: np.ndarray, beta: float, lam: float) -> ProjectedSolution:
    """Minimize ||H_k y - beta e_1||^2 + lam^2 ||y||^2 via the stacked system.

    lam == 0 delegates to the plain least-squares path. proj_residual_norm
    reports the unregularized residual ||H_k y - beta e_1||_2 of the
    regularized solution.
    """
    if lam < 0:
        raise ValueError(f"regularization parameter must be nonnegative, got {lam}")
    if lam == 0.0:
        return solve_projected_ls(hess, beta)
    hess = np.asarray(hess, dtype=np.float64)
    kp1, k = hess.shape
    stacked = np.vstack([hess, lam * np.eye(k)])
    rhs = np.zeros(kp1 + k)
    rhs[0] = beta
    y, _, _, _ = np.linalg.lstsq(stacked, rhs, rcond=None)
    e1 = np.zeros(kp1)
    e1[0] = beta
    res = float(np.linalg.norm(hess @ y - e1))
    return ProjectedSolution(y=y, proj_residual_norm=res, lambda_used=float(lam))


def svd_of_hessenberg(hess: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD H = U diag(s) V^T with s descending.

    Used by the regularization-parameter selectors for filter-factor
    formulas. LAPACK's SVD is accurate to machine precision at these sizes.
    """
    hess = np.asarray(hess, dtype=np.float64)
    u, s, vt = np.linalg.svd(hess, full_matrices=False)
    return s, u, vt.T
