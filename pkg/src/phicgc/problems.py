"""Heat-equation test problems and their grid hierarchies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import GridMismatchError
from .operators import CsrOperator, LinearOperator, MatrixFreeOperator
from .transfer import GridSpec, build_prolongation


@dataclass
class HeatProblem:
    """``y' = -A y + g``, ``y(0) = v`` on ``[0, T]``; ``A`` is minus the discrete Laplacian."""

    operator: LinearOperator
    v: np.ndarray
    g: np.ndarray
    T: float
    rel_tol: float
    grid: GridSpec
    omega: float


def periodic_laplacian_1d(n: int) -> CsrOperator:
    h = 1.0 / (n + 1)
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    a = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    a[0, n - 1] = -1.0
    a[n - 1, 0] = -1.0
    return CsrOperator(a.tocsr() / h**2, symmetric=True, omega_hint=0.0)


def dirichlet_omega_3d(dims) -> float:
    """Smallest eigenvalue of the 7-point Dirichlet operator."""
    return float(sum(4.0 * np.sin(np.pi / (2 * (n + 1))) ** 2 * (n + 1) ** 2 for n in dims))


def dirichlet_laplacian_3d(dims) -> MatrixFreeOperator:
    """Matrix-free 7-point stencil; unknowns ordered x fastest, then y, then z."""
    nx, ny, nz = dims
    cx, cy, cz = ((n + 1) ** 2 for n in dims)
    diag = 2.0 * (cx + cy + cz)
    shape = (nz, ny, nx)

    def matvec(x):
        u = x.reshape(shape)
        out = diag * u
        out[:, :, 1:] -= cx * u[:, :, :-1]
        out[:, :, :-1] -= cx * u[:, :, 1:]
        out[:, 1:, :] -= cy * u[:, :-1, :]
        out[:, :-1, :] -= cy * u[:, 1:, :]
        out[1:, :, :] -= cz * u[:-1, :, :]
        out[:-1, :, :] -= cz * u[1:, :, :]
        return out.reshape(-1)

    def one_norm():
        # interior column: diagonal plus six neighbours
        return 2.0 * diag

    return MatrixFreeOperator(
        nx * ny * nz, matvec, symmetric=True, omega_hint=dirichlet_omega_3d(dims), one_norm_fn=one_norm
    )


def _operator_for(grid: GridSpec) -> LinearOperator:
    if grid.ndim == 1 and grid.boundary == "periodic":
        return periodic_laplacian_1d(grid.dims[0])
    if grid.ndim == 3 and grid.boundary == "dirichlet":
        return dirichlet_laplacian_3d(grid.dims)
    raise GridMismatchError(f"no discretization for {grid.ndim}D {grid.boundary} grids")


def heat1d(n: int) -> HeatProblem:
    """Periodic 1D heat equation with a Gaussian source and unit initial value."""
    if n < 4 or n % 2:
        raise GridMismatchError(f"N must be even and at least 4, got {n}")
    grid = GridSpec((n,), "periodic")
    x = grid.nodes()
    g = np.exp(-500.0 * (x - 0.5) ** 2)
    return HeatProblem(_operator_for(grid), np.ones(n), g, 0.01, 1e-8, grid, 0.0)


def heat3d(nx: int, ny: int, nz: int) -> HeatProblem:
    """3D heat equation with homogeneous Dirichlet data and zero initial value."""
    dims = (nx, ny, nz)
    if any(n < 4 or n % 2 for n in dims):
        raise GridMismatchError(f"extents must be even and at least 4, got {dims}")
    grid = GridSpec(dims, "dirichlet")
    x, y, z = (grid.nodes(a) for a in range(3))
    g = np.exp(
        -50.0 * (x[None, None, :] - 0.5) ** 2
        - 100.0 * (y[None, :, None] - 0.5) ** 2
        - 50.0 * (z[:, None, None] - 0.5) ** 2
    ).reshape(-1)
    op = _operator_for(grid)
    return HeatProblem(op, np.zeros(grid.size), g, 0.1, 1e-5, grid, op.omega_hint)


def build_hierarchy(p: HeatProblem, num_levels: int, method: str = "cubic-spline",
                    restriction: str = "interpolation"):
    """Rediscretize ``p`` on ``num_levels`` grids, each half as fine as the previous."""
    from .cgc import GridHierarchy, Level

    if num_levels < 1:
        raise ValueError("num_levels must be at least 1")
    div = 2 ** (num_levels - 1)
    if any(n % div for n in p.grid.dims):
        raise GridMismatchError(
            f"extents {p.grid.dims} are not divisible by {div} for {num_levels} levels"
        )
    levels = [Level(p.operator, p.grid, None, p.omega)]
    grid = p.grid
    for _ in range(num_levels - 1):
        coarse = grid.coarsen()
        op = _operator_for(coarse)
        q = build_prolongation(coarse, grid, method, restriction)
        levels.append(Level(op, coarse, q, op.omega_hint))
        grid = coarse
    return GridHierarchy(levels)
