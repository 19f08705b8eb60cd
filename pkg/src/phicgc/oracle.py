"""Reference solutions used to measure errors."""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .krylov import phi_rt_solve
from .operators import LinearOperator

DENSE_CAP = 512
REFERENCE_REL_TOL = 1e-13
REFERENCE_MAX_DIM = 100


def _dense(a):
    if isinstance(a, LinearOperator):
        return a.to_dense()
    return np.asarray(a, dtype=float)


def dense_phi_reference(A, v, g, t: float) -> np.ndarray:
    """Exact ``v + t phi(-tA)(g - Av)`` via one dense exponential of a bordered matrix."""
    a = _dense(A)
    n = a.shape[0]
    if n > DENSE_CAP:
        raise ValueError(f"dense reference limited to dimension {DENSE_CAP}, got {n}")
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    if t == 0.0:
        return v.copy()
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = -t * a
    aug[:n, n] = t * (g - a @ v)
    return v + scipy.linalg.expm(aug)[:n, n]


def dense_phi_reference_eig(A, v, g, t: float) -> np.ndarray:
    """Same quantity through the eigendecomposition of a symmetric ``A``."""
    a = _dense(A)
    lam, u = np.linalg.eigh(0.5 * (a + a.T))
    gbar = np.asarray(g, dtype=float) - a @ np.asarray(v, dtype=float)
    z = -t * lam
    small = np.abs(z) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(small, 1.0 + z / 2.0, np.expm1(z) / np.where(small, 1.0, z))
    return np.asarray(v, dtype=float) + u @ (t * f * (u.T @ gbar))


def dense_phi_apply(A, x, t: float) -> np.ndarray:
    """``t phi(-tA) x``."""
    x = np.asarray(x, dtype=float)
    return dense_phi_reference(A, np.zeros_like(x), x, t)


def reference_solution(p, t: float | None = None, max_dim: int = REFERENCE_MAX_DIM,
                       rel_tol: float = REFERENCE_REL_TOL) -> np.ndarray:
    """Tight-tolerance Krylov solve on the problem's own grid.

    Charges the problem operator's matvec counter; callers that report
    matvecs should reset it afterwards.
    """
    t = p.T if t is None else t
    if t == 0.0:
        return np.asarray(p.v, dtype=float).copy()
    return phi_rt_solve(p.operator, p.v, p.g, t, rel_tol, max_dim).y


def relative_error(y, y_ref) -> float:
    y_ref = np.asarray(y_ref, dtype=float)
    nref = float(np.linalg.norm(y_ref))
    if nref == 0.0:
        raise ZeroDivisionError("reference vector is zero")
    return float(np.linalg.norm(np.asarray(y, dtype=float) - y_ref)) / nref
