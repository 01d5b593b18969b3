"""Matrix-free linear operator abstraction shared by all solvers.

Every solver in this package touches the forward projector A and the
backprojector B only through :class:`LinearOperator`: an opaque "apply a
vector" capability with declared dimensions. Operators are immutable and
their apply must be pure, so they can be shared freely between solver runs.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


class OperatorShapeError(ValueError):
    """Raised when operator dimensions are inconsistent at configuration time."""


class LinearOperator:
    """A real linear map of shape (rows, cols) exposed only through apply().

    Parameters
    ----------
    rows, cols : int
        Output and input dimensions.
    apply : callable
        Maps a float64 vector of length ``cols`` to one of length ``rows``.
        Must be deterministic and linear.
    """

    __slots__ = ("rows", "cols", "_apply", "sparse_matrix")

    def __init__(self, rows: int, cols: int, apply: Callable[[np.ndarray], np.ndarray],
                 sparse_matrix=None):
        if rows <= 0 or cols <= 0:
            raise OperatorShapeError(f"operator dimensions must be positive, got {rows}x{cols}")
        self.rows = int(rows)
        self.cols = int(cols)
        self._apply = apply
        # Optional assembled backing matrix (scipy CSR); lets matched-mode
        # helpers form an exact transpose without dense assembly.
        self.sparse_matrix = sparse_matrix

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.cols,):
            raise OperatorShapeError(
                f"operator of shape {self.rows}x{self.cols} applied to vector of shape {v.shape}"
            )
        out = np.asarray(self._apply(v), dtype=np.float64)
        if out.shape != (self.rows,):
            raise OperatorShapeError(
                f"operator apply returned shape {out.shape}, expected ({self.rows},)"
            )
        return out

    def __matmul__(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v)

    def to_dense(self) -> np.ndarray:
        """Assemble the full matrix column-by-column (desk scale only)."""
        cols = []
        e = np.zeros(self.cols)
        for j in range(self.cols):
            e[j] = 1.0
            cols.append(self.apply(e))
            e[j] = 0.0
        return np.column_stack(cols)


def dense_operator(matrix: np.ndarray) -> LinearOperator:
    """Wrap a dense row-major matrix as an operator.

    The matrix is copied and frozen so the operator stays immutable.
    """
    m = np.array(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise OperatorShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("dense operator entries must all be finite")
    m.setflags(write=False)
    return LinearOperator(m.shape[0], m.shape[1], lambda v: m @ v)


def transpose_of(matrix: np.ndarray) -> LinearOperator:
    """Operator applying the transpose of a dense matrix (matched backprojector)."""
    m = np.array(matrix, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("dense operator entries must all be finite")
    m.setflags(write=False)
    return LinearOperator(m.shape[1], m.shape[0], lambda v: m.T @ v)


def compose(first: LinearOperator, second: LinearOperator) -> LinearOperator:
    """Return the operator v -> first(second(v)).

    Dimension compatibility is checked here, at composition time, so a bad
    pairing fails at configuration rather than deep inside a solver.
    """
    if first.cols != second.rows:
        raise OperatorShapeError(
            f"cannot compose {first.rows}x{first.cols} with {second.rows}x{second.cols}: "
            f"inner dimensions {first.cols} != {second.rows}"
        )
    return LinearOperator(first.rows, second.cols, lambda v: first.apply(second.apply(v)))


def op_norm_estimate(op: LinearOperator, iterations: int = 100, seed: int = 0) -> float:
    """Estimate the dominant singular value of a square operator by power iteration.

    For a rectangular operator, compose with its pair first. Deterministic
    given the seed; returns 0.0 for the zero operator.
    """
    if op.rows != op.cols:
        raise OperatorShapeError(
            f"power iteration needs a square operator, got {op.rows}x{op.cols}"
        )
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.cols)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v /= nv
    sigma = 0.0
    for _ in range(iterations):
        w = op.apply(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        sigma = nw
        v = w / nw
    return float(sigma)
