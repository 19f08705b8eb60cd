"""Linear operators with matvec accounting.

Every operator counts its own applications so that solvers running on
several grids are charged per grid.
"""
from __future__ import annotations

import threading
from typing import Callable, Optional

import numpy as np
import scipy.io
import scipy.sparse as sp

from .exceptions import DimensionMismatchError, EstimatorUnavailableError


class LinearOperator:
    """Square real operator ``x -> A x`` of dimension ``dim``.

    Subclasses implement :meth:`_matvec`; :meth:`apply` validates the input
    and increments ``matvec_count``.
    """

    kind = "abstract"

    def __init__(self, dim: int, symmetric: bool = False, omega_hint: Optional[float] = None):
        if omega_hint is not None and omega_hint < 0:
            raise ValueError("omega_hint must be nonnegative")
        self.dim = int(dim)
        self.symmetric = bool(symmetric)
        self.omega_hint = omega_hint
        self._count = 0
        self._lock = threading.Lock()

    @property
    def matvec_count(self) -> int:
        return self._count

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatchError(
                f"operator of dimension {self.dim} applied to vector of shape {x.shape}"
            )
        with self._lock:
            self._count += 1
        return self._matvec(x)

    __matmul__ = apply

    def reset_and_read_matvec_count(self, reset: bool = True) -> int:
        with self._lock:
            n = self._count
            if reset:
                self._count = 0
        return n

    def one_norm(self) -> float:
        raise EstimatorUnavailableError(f"{type(self).__name__} has no column-sum estimator")

    def to_dense(self) -> np.ndarray:
        """Materialize column by column; does not touch the matvec counter."""
        out = np.empty((self.dim, self.dim))
        e = np.zeros(self.dim)
        for j in range(self.dim):
            e[j] = 1.0
            out[:, j] = self._matvec(e)
            e[j] = 0.0
        return out

    def _matvec(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, symmetric={self.symmetric})"


class CsrOperator(LinearOperator):
    """Operator backed by a canonical CSR matrix."""

    kind = "csr"

    def __init__(self, matrix, symmetric: Optional[bool] = None, omega_hint: Optional[float] = None):
        m = sp.csr_matrix(matrix, dtype=float)
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"operator matrix must be square, got {m.shape}")
        m.sum_duplicates()
        m.sort_indices()
        if symmetric is None:
            symmetric = abs(m - m.T).max() == 0 if m.nnz else True
        super().__init__(m.shape[0], symmetric=symmetric, omega_hint=omega_hint)
        self.matrix = m

    @property
    def row_offsets(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def values(self) -> np.ndarray:
        return self.matrix.data

    def _matvec(self, x):
        return self.matrix @ x

    def one_norm(self) -> float:
        if self.matrix.nnz == 0:
            return 0.0
        return float(abs(self.matrix).sum(axis=0).max())

    def to_dense(self):
        return self.matrix.toarray()


class MatrixFreeOperator(LinearOperator):
    """Operator given by a callable, e.g. a stencil application.

    ``one_norm_fn`` may be supplied when the column sums are known in closed
    form; otherwise :meth:`one_norm` raises.
    """

    kind = "matrix-free"

    def __init__(
        self,
        dim: int,
        matvec: Callable[[np.ndarray], np.ndarray],
        symmetric: bool = False,
        omega_hint: Optional[float] = None,
        one_norm_fn: Optional[Callable[[], float]] = None,
    ):
        super().__init__(dim, symmetric=symmetric, omega_hint=omega_hint)
        self._fn = matvec
        self._one_norm_fn = one_norm_fn

    def _matvec(self, x):
        return self._fn(x)

    def one_norm(self) -> float:
        if self._one_norm_fn is None:
            return super().one_norm()
        return float(self._one_norm_fn())


class DenseOperator(CsrOperator):
    """Convenience wrapper for small dense matrices (tests, oracles)."""

    def __init__(self, matrix, symmetric=None, omega_hint=None):
        a = np.asarray(matrix, dtype=float)
        super().__init__(a, symmetric=symmetric, omega_hint=omega_hint)
        self.dense = a

    def _matvec(self, x):
        return self.dense @ x

    def to_dense(self):
        return self.dense.copy()


class ComposedOperator(LinearOperator):
    """Product ``left @ inner @ right`` for e.g. Galerkin coarse operators.

    ``left`` and ``right`` are plain callables (restriction and prolongation);
    only the inner operator's counter is charged for the wrapped product.
    """

    kind = "composed"

    def __init__(self, dim, left, inner: LinearOperator, right, symmetric=False, omega_hint=None):
        super().__init__(dim, symmetric=symmetric, omega_hint=omega_hint)
        self._left = left
        self._inner = inner
        self._right = right

    def _matvec(self, x):
        return self._left(self._inner.apply(self._right(x)))


class ZeroOperator(LinearOperator):
    kind = "matrix-free"

    def __init__(self, dim):
        super().__init__(dim, symmetric=True, omega_hint=0.0)

    def _matvec(self, x):
        return np.zeros_like(x)

    def one_norm(self):
        return 0.0


def identity(dim: int) -> CsrOperator:
    return CsrOperator(sp.identity(dim, format="csr"), symmetric=True, omega_hint=1.0)


def apply(op: LinearOperator, x) -> np.ndarray:
    return op.apply(x)


def one_norm(op: LinearOperator) -> float:
    return op.one_norm()


def write_matrix_market(path, op: LinearOperator) -> None:
    if isinstance(op, CsrOperator):
        m = op.matrix
    else:
        m = sp.csr_matrix(op.to_dense())
    scipy.io.mmwrite(str(path), m.tocoo())


def read_matrix_market(path, omega_hint=None) -> CsrOperator:
    return CsrOperator(scipy.io.mmread(str(path)), omega_hint=omega_hint)
