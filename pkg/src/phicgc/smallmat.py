"""Dense kernels for the projected problem: exp and the phi action."""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .exceptions import NumericalRangeError

SMALL_MATRIX_CAP = 256
_TAYLOR_CUTOFF = 1e-4


def expm(m: np.ndarray, cap: int = SMALL_MATRIX_CAP) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a degree-13 Pade approximant."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {m.shape}")
    if m.shape[0] > cap:
        raise ValueError(f"matrix of order {m.shape[0]} exceeds small-matrix cap {cap}")
    if not np.all(np.isfinite(m)):
        raise NumericalRangeError("non-finite entries in expm argument")
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(m)
    if not np.all(np.isfinite(out)):
        raise NumericalRangeError("matrix exponential overflowed")
    return out


def phi_scalar(z: float) -> float:
    """phi(z) = (exp(z) - 1) / z with phi(0) = 1."""
    if abs(z) < _TAYLOR_CUTOFF:
        return 1.0 + z / 2.0 + z * z / 6.0 + z ** 3 / 24.0
    return math.expm1(z) / z


def phi_action(h: np.ndarray, t: float, beta: float, cap: int = SMALL_MATRIX_CAP) -> np.ndarray:
    """Return ``t * phi(-t H) * beta * e_1``.

    Uses the exponential of the bordered matrix ``[[-tH, t*beta*e1], [0, 0]]``,
    whose last column holds the wanted vector above the diagonal.
    """
    h = np.asarray(h, dtype=float)
    k = h.shape[0]
    if t == 0.0 or beta == 0.0:
        return np.zeros(k)
    aug = np.zeros((k + 1, k + 1))
    aug[:k, :k] = -t * h
    aug[0, k] = t * beta
    return expm(aug, cap=cap + 1)[:k, k]
