"""Grid transfer between nested uniform tensor grids.

Grids carry ``n`` unknowns per axis at ``x_i = i/(n+1)``, ``i = 1..n``.
Coarsening halves every extent, so coarse and fine node sets interleave
without being nested. Prolongation interpolates coarse values onto fine
nodes; restriction either interpolates fine values onto coarse nodes (the
default) or applies the exact transpose of the prolongation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline, make_interp_spline

from .exceptions import DimensionMismatchError, GridMismatchError, UnsupportedBoundaryError

METHODS = ("linear", "cubic-spline")
RESTRICTIONS = ("interpolation", "transpose")
BOUNDARIES = ("periodic", "dirichlet")


@dataclass(frozen=True)
class GridSpec:
    dims: tuple
    boundary: str = "dirichlet"

    def __post_init__(self):
        dims = tuple(int(n) for n in np.atleast_1d(self.dims))
        if len(dims) not in (1, 3):
            raise GridMismatchError(f"grids are 1D or 3D, got {len(dims)} extents")
        if any(n < 2 for n in dims):
            raise GridMismatchError(f"extents must be at least 2, got {dims}")
        if self.boundary not in BOUNDARIES:
            raise UnsupportedBoundaryError(f"unknown boundary type {self.boundary!r}")
        object.__setattr__(self, "dims", dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def shape(self) -> tuple:
        """Array shape of a grid function; the x index varies fastest."""
        return tuple(reversed(self.dims))

    def nodes(self, axis: int = 0) -> np.ndarray:
        n = self.dims[axis]
        return np.arange(1, n + 1) / (n + 1)

    def spacing(self, axis: int = 0) -> float:
        return 1.0 / (self.dims[axis] + 1)

    def coarsen(self) -> "GridSpec":
        if any(n % 2 for n in self.dims):
            raise GridMismatchError(f"extents {self.dims} are not divisible by 2")
        return GridSpec(tuple(n // 2 for n in self.dims), self.boundary)


def _interp_matrix(src_n: int, dst_n: int, method: str, boundary: str):
    """Matrix mapping values on ``src_n`` nodes to values on ``dst_n`` nodes."""
    xs = np.arange(1, src_n + 1) / (src_n + 1)
    xd = np.arange(1, dst_n + 1) / (dst_n + 1)
    eye = np.eye(src_n)
    if boundary == "periodic":
        # close the data over the unit period; the wrap interval is 2/(n+1) wide
        knots = np.append(xs, xs[0] + 1.0)
        data = np.vstack([eye, eye[:1]])
        query = np.where(xd < xs[0], xd + 1.0, xd)
        if method == "linear":
            mat = make_interp_spline(knots, data, k=1)(query)
        else:
            mat = CubicSpline(knots, data, bc_type="periodic")(query)
    elif boundary == "dirichlet":
        knots = np.concatenate([[0.0], xs, [1.0]])
        zero = np.zeros((1, src_n))
        data = np.vstack([zero, eye, zero])
        if method == "linear":
            mat = make_interp_spline(knots, data, k=1)(xd)
        else:
            mat = CubicSpline(knots, data, bc_type="not-a-knot")(xd)
    else:
        raise UnsupportedBoundaryError(f"unknown boundary type {boundary!r}")
    if method == "linear":
        mat = sp.csr_matrix(np.where(np.abs(mat) < 1e-15, 0.0, mat))
    return mat


def _apply_axes(mats, arr: np.ndarray, in_shape, out_shape) -> np.ndarray:
    if len(mats) == 1:
        return np.asarray(mats[0] @ arr)
    cur = arr.reshape(in_shape)
    nd = cur.ndim
    for axis, m in enumerate(mats):
        ax = nd - 1 - axis
        moved = np.moveaxis(cur, ax, 0)
        rest = moved.shape[1:]
        res = np.asarray(m @ moved.reshape(moved.shape[0], -1))
        cur = np.moveaxis(res.reshape((res.shape[0],) + rest), 0, ax)
    return np.ascontiguousarray(cur).reshape(-1)


def _power_norm(mat, rtol: float = 1e-4, maxiter: int = 10_000) -> float:
    """2-norm of ``mat`` by power iteration on ``mat^T mat``."""
    n = mat.shape[1]
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(maxiter):
        z = np.asarray(mat.T @ np.asarray(mat @ x))
        new = float(np.linalg.norm(z))
        if new == 0.0:
            return 0.0
        x = z / new
        if abs(new - lam) <= 0.1 * rtol * new:
            lam = new
            break
        lam = new
    return float(np.sqrt(lam))


@dataclass
class TransferOperator:
    """Prolongation ``Q`` from ``coarse`` to ``fine`` and the matching restriction.

    Per-axis matrices are kept separately; on 3D grids the operator is their
    tensor product and is never formed.
    """

    fine: GridSpec
    coarse: GridSpec
    method: str
    prolong_mats: list
    restrict_mats: list
    restriction: str = "interpolation"
    _norm: Optional[float] = field(default=None, repr=False)

    @property
    def shape(self) -> tuple:
        return (self.fine.size, self.coarse.size)

    def prolong(self, xc) -> np.ndarray:
        xc = np.asarray(xc, dtype=float)
        if xc.shape != (self.coarse.size,):
            raise DimensionMismatchError(
                f"prolongation expects length {self.coarse.size}, got {xc.shape}"
            )
        return _apply_axes(self.prolong_mats, xc, self.coarse.shape, self.fine.shape)

    def restrict(self, xf) -> np.ndarray:
        xf = np.asarray(xf, dtype=float)
        if xf.shape != (self.fine.size,):
            raise DimensionMismatchError(
                f"restriction expects length {self.fine.size}, got {xf.shape}"
            )
        return _apply_axes(self.restrict_mats, xf, self.fine.shape, self.coarse.shape)

    def prolong_transpose(self, xf) -> np.ndarray:
        """Exact adjoint ``Q^T xf``, whatever restriction is configured."""
        xf = np.asarray(xf, dtype=float)
        if xf.shape != (self.fine.size,):
            raise DimensionMismatchError(
                f"adjoint expects length {self.fine.size}, got {xf.shape}"
            )
        return _apply_axes([m.T for m in self.prolong_mats], xf, self.fine.shape, self.coarse.shape)

    def dense(self) -> np.ndarray:
        """Materialized prolongation matrix (small grids only)."""
        out = np.empty(self.shape)
        e = np.zeros(self.coarse.size)
        for j in range(self.coarse.size):
            e[j] = 1.0
            out[:, j] = self.prolong(e)
            e[j] = 0.0
        return out

    def dense_restriction(self) -> np.ndarray:
        out = np.empty(self.shape[::-1])
        e = np.zeros(self.fine.size)
        for j in range(self.fine.size):
            e[j] = 1.0
            out[:, j] = self.restrict(e)
            e[j] = 0.0
        return out

    def norm(self) -> float:
        """Cached estimate of ``||Q||_2`` (product of per-axis norms)."""
        if self._norm is None:
            self._norm = float(np.prod([_power_norm(m) for m in self.prolong_mats]))
        return self._norm

    @classmethod
    def identity(cls, grid: GridSpec) -> "TransferOperator":
        mats = [sp.identity(n, format="csr") for n in grid.dims]
        return cls(grid, grid, "linear", mats, list(mats), "transpose")


def build_prolongation(
    coarse: GridSpec,
    fine: GridSpec,
    method: str = "cubic-spline",
    restriction: str = "interpolation",
) -> TransferOperator:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if restriction not in RESTRICTIONS:
        raise ValueError(f"restriction must be one of {RESTRICTIONS}, got {restriction!r}")
    if coarse.boundary != fine.boundary:
        raise UnsupportedBoundaryError(
            f"boundary types differ: {coarse.boundary} vs {fine.boundary}"
        )
    if coarse.ndim != fine.ndim or any(f != 2 * c for f, c in zip(fine.dims, coarse.dims)):
        raise GridMismatchError(
            f"fine extents {fine.dims} must be twice the coarse extents {coarse.dims}"
        )
    pro = [_interp_matrix(c, f, method, fine.boundary) for c, f in zip(coarse.dims, fine.dims)]
    if restriction == "transpose":
        res = [m.T.tocsr() if sp.issparse(m) else np.ascontiguousarray(m.T) for m in pro]
    else:
        res = [_interp_matrix(f, c, method, fine.boundary) for c, f in zip(coarse.dims, fine.dims)]
    return TransferOperator(fine, coarse, method, pro, res, restriction)


def prolong(q: TransferOperator, xc) -> np.ndarray:
    return q.prolong(xc)


def restrict(q: TransferOperator, xf) -> np.ndarray:
    return q.restrict(xf)


def prolongation_norm_estimate(q: TransferOperator) -> float:
    return q.norm()


class Split(NamedTuple):
    gtilde: np.ndarray
    ghat: np.ndarray
    beta: float
    beta_tilde: float
    beta_hat: float


def split_vector(q: TransferOperator, gbar) -> Split:
    """Split ``gbar = Q gtilde + ghat`` with ``gtilde`` the restriction of ``gbar``."""
    gbar = np.asarray(gbar, dtype=float)
    gtilde = q.restrict(gbar)
    ghat = gbar - q.prolong(gtilde)
    return Split(
        gtilde,
        ghat,
        float(np.linalg.norm(gbar)),
        float(np.linalg.norm(gtilde)),
        float(np.linalg.norm(ghat)),
    )


def telescope(transfers: Sequence[TransferOperator], gbar) -> tuple:
    """Split ``gbar`` down a chain of transfers.

    Returns ``(ghats, gtilde_coarsest)`` with ``ghats[j]`` living on level j.
    """
    ghats = []
    cur = np.asarray(gbar, dtype=float)
    for q in transfers:
        s = split_vector(q, cur)
        ghats.append(s.ghat)
        cur = s.gtilde
    return ghats, cur
