"""Coarse grid correction (CGC) for phi-function actions.

The source ``gbar = g - A v`` is split into a part represented on a coarser
grid and a remainder. The coarse part is propagated by the coarse operator
(recursively, on a hierarchy) and prolonged back; the remainder is propagated
on the current grid. Both solves run with tolerances rescaled so that every
solver's absolute residual threshold equals ``||gbar|| * rel_tol`` of the
root problem; a small remainder therefore buys a very loose fine-grid solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .exceptions import DimensionMismatchError, GridMismatchError, LevelSolveError, PhiCGCError
from .krylov import DEFAULT_MAX_DIM, PhiSolveResult, phi_rt_solve, residual_restart_solve
from .operators import ComposedOperator, LinearOperator
from .smallmat import phi_scalar
from .transfer import GridSpec, TransferOperator, split_vector

COARSE_SOLVERS = ("phiRT", "residual-restart")
OMEGA_SOURCES = ("ritz", "zero", "hierarchy")


@dataclass
class Level:
    operator: LinearOperator
    grid: GridSpec
    transfer_to_finer: Optional[TransferOperator] = None
    omega: float = 0.0


@dataclass
class GridHierarchy:
    """Levels ordered finest (index 0) to coarsest."""

    levels: List[Level]

    def __post_init__(self):
        if not self.levels:
            raise ValueError("a hierarchy needs at least one level")
        for j, lev in enumerate(self.levels):
            if lev.operator.dim != lev.grid.size:
                raise DimensionMismatchError(
                    f"level {j + 1}: operator dimension {lev.operator.dim} "
                    f"!= grid size {lev.grid.size}"
                )
            if lev.omega < 0:
                raise ValueError(f"level {j + 1}: omega must be nonnegative")
            if j == 0:
                if lev.transfer_to_finer is not None:
                    raise GridMismatchError("the finest level has no finer grid")
                continue
            q = lev.transfer_to_finer
            if q is None:
                raise GridMismatchError(f"level {j + 1} lacks a transfer operator")
            if q.fine.size != self.levels[j - 1].grid.size or q.coarse.size != lev.grid.size:
                raise GridMismatchError(f"level {j + 1}: transfer does not connect the grids")

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def omega_bar(self) -> float:
        return min(lev.omega for lev in self.levels)

    def truncated(self, num_levels: int) -> "GridHierarchy":
        return GridHierarchy(self.levels[:num_levels])


@dataclass
class CgcConfig:
    rel_tol: float
    num_levels: int = 2
    krylov_max_dim: int = DEFAULT_MAX_DIM
    coarse_solver: str = "phiRT"
    estimate_enabled: bool = True
    omega_source: str = "hierarchy"
    # test hook: multiplies every coarse-branch tolerance; 1.0 in real runs
    tolerance_fault: float = 1.0

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.num_levels < 1:
            raise ValueError("num_levels must be at least 1")
        if self.coarse_solver not in COARSE_SOLVERS:
            raise ValueError(f"coarse_solver must be one of {COARSE_SOLVERS}")
        if self.omega_source not in OMEGA_SOURCES:
            raise ValueError(f"omega_source must be one of {OMEGA_SOURCES}")


@dataclass
class LevelReport:
    level: int
    matvecs: int = 0
    beta: float = 0.0
    effective_rel_tol: Optional[float] = None
    residual_bound: float = 0.0
    coarse_error_estimate: Optional[float] = None
    omega_used: Optional[float] = None
    beta_tilde: Optional[float] = None
    beta_hat: Optional[float] = None
    estimate_matvecs: int = 0
    solved: bool = False


@dataclass
class CgcReport:
    levels: List[LevelReport]
    root_beta: float
    root_rel_tol: float
    total_estimate: float = 0.0

    @property
    def matvecs(self) -> List[int]:
        return [lev.matvecs for lev in self.levels]

    @property
    def tolerances(self) -> List[Optional[float]]:
        return [lev.effective_rel_tol for lev in self.levels]

    @property
    def achieved_residual_bounds(self) -> List[float]:
        return [lev.residual_bound for lev in self.levels]

    @property
    def total_matvecs(self) -> int:
        return sum(self.matvecs)

    def tolerance_identity_defect(self) -> float:
        """Largest relative deviation of ``beta * tol`` from the root threshold."""
        target = self.root_beta * self.root_rel_tol
        if target == 0.0:
            return 0.0
        worst = 0.0
        for lev in self.levels:
            if lev.solved:
                worst = max(worst, abs(lev.beta * lev.effective_rel_tol - target) / target)
        return worst


def _solve(cfg: CgcConfig, op, v, g, t, tol, level, branch) -> PhiSolveResult:
    solver = phi_rt_solve if cfg.coarse_solver == "phiRT" else residual_restart_solve
    try:
        return solver(op, v, g, t, tol, cfg.krylov_max_dim)
    except PhiCGCError as exc:
        raise LevelSolveError(level, branch, exc) from exc


def coarse_error_estimate(A: LinearOperator, Atilde: LinearOperator, Q: TransferOperator,
                          ytilde, t: float, omega: float = 0.0) -> float:
    """Computable estimate ``t phi(-t omega) ||(Q Atilde - A Q) ytilde||`` of the CGC error."""
    ytilde = np.asarray(ytilde, dtype=float)
    if ytilde.shape != (Atilde.dim,):
        raise DimensionMismatchError(f"coarse vector must have length {Atilde.dim}")
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    if not ytilde.any():
        return 0.0
    r = Q.prolong(Atilde.apply(ytilde)) - A.apply(Q.prolong(ytilde))
    return t * phi_scalar(-t * omega) * float(np.linalg.norm(r))


def _adjoint_apply(op: LinearOperator, x):
    if op.symmetric:
        return op._matvec(x)
    return op.to_dense().T @ x


def commutator_norm_estimate(A: LinearOperator, Atilde: LinearOperator, Q: TransferOperator,
                             rtol: float = 1e-3, maxiter: int = 5000, seed: int = 0) -> float:
    """``||Q Atilde - A Q||_2`` by power iteration; diagnostics only, matvecs are not charged."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(Atilde.dim)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(maxiter):
        cx = Q.prolong(Atilde._matvec(x)) - A._matvec(Q.prolong(x))
        z = _adjoint_apply(Atilde, Q.prolong_transpose(cx)) - Q.prolong_transpose(_adjoint_apply(A, cx))
        new = float(np.linalg.norm(z))
        if new == 0.0:
            return 0.0
        x = z / new
        if abs(new - lam) <= 0.1 * rtol * new:
            lam = new
            break
        lam = new
    return float(np.sqrt(lam))


def galerkin_operator(A: LinearOperator, Q: TransferOperator) -> ComposedOperator:
    """``Q^T A Q`` for operators without a coarse rediscretization (extension)."""
    return ComposedOperator(Q.coarse.size, Q.prolong_transpose, A, Q.prolong,
                            symmetric=A.symmetric, omega_hint=None)


def _omega_for(cfg, level: Level, fine_solve: Optional[PhiSolveResult]) -> float:
    if cfg.omega_source == "hierarchy":
        return level.omega
    if cfg.omega_source == "ritz" and fine_solve is not None:
        return fine_solve.omega_ritz
    return 0.0


def _descend(h: GridHierarchy, j: int, v, g, t, tol, cfg, reports) -> np.ndarray:
    lev = h.levels[j]
    op = lev.operator
    rep = reports[j]
    last = j == cfg.num_levels - 1
    if last:
        res = _solve(cfg, op, v, g, t, tol, j + 1, "coarse" if j else "single")
        rep.beta, rep.effective_rel_tol = res.beta, tol
        rep.residual_bound, rep.solved = res.residual_bound, res.beta > 0
        return res.y

    gbar = g - op.apply(v) if v.any() else g
    q = h.levels[j + 1].transfer_to_finer
    s = split_vector(q, gbar)
    rep.beta_tilde, rep.beta_hat = s.beta_tilde, s.beta_hat

    # step 1: smooth part on the coarser grid
    ytilde = np.zeros(q.coarse.size)
    if s.beta_tilde > 0:
        tol_c = (s.beta / s.beta_tilde) * tol * cfg.tolerance_fault
        ytilde = _descend(h, j + 1, np.zeros(q.coarse.size), s.gtilde, t, tol_c, cfg, reports)

    # step 2: remainder on this grid
    yhat = np.zeros(op.dim)
    fine = None
    if s.beta_hat > 0:
        tol_f = (s.beta / s.beta_hat) * tol
        fine = _solve(cfg, op, np.zeros(op.dim), s.ghat, t, tol_f, j + 1, "fine")
        yhat = fine.y
        rep.beta, rep.effective_rel_tol = fine.beta, tol_f
        rep.residual_bound, rep.solved = fine.residual_bound, True

    if cfg.estimate_enabled:
        omega = _omega_for(cfg, lev, fine)
        coarse_op = h.levels[j + 1].operator
        before = (op.matvec_count, coarse_op.matvec_count)
        rep.coarse_error_estimate = coarse_error_estimate(op, coarse_op, q, ytilde, t, omega)
        rep.omega_used = omega
        # estimate products are bookkept apart from the solves
        rep.estimate_matvecs += op.matvec_count - before[0]
        reports[j + 1].estimate_matvecs += coarse_op.matvec_count - before[1]

    # step 3
    return v + yhat + q.prolong(ytilde)


def cgc_multigrid(h: GridHierarchy, v, g, t: float, cfg: CgcConfig):
    """Multigrid CGC on the first ``cfg.num_levels`` levels of ``h``.

    Returns ``(y, report)``. With one level this is a plain Krylov solve.
    """
    if cfg.num_levels > h.depth:
        raise ValueError(f"num_levels={cfg.num_levels} exceeds hierarchy depth {h.depth}")
    if not t > 0:
        raise ValueError("t must be positive")
    root = h.levels[0].operator
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    if v.shape != (root.dim,) or g.shape != (root.dim,):
        raise DimensionMismatchError(f"v and g must have length {root.dim}")
    ops = [lev.operator for lev in h.levels[: cfg.num_levels]]
    counts = [op.matvec_count for op in ops]
    reports = [LevelReport(level=j + 1) for j in range(cfg.num_levels)]

    root_beta = None
    if cfg.num_levels > 1:
        # evaluate the root source once here so a vanishing source short-circuits
        gbar = g - root.apply(v) if v.any() else g
        root_beta = float(np.linalg.norm(gbar))
        if root_beta == 0.0:
            rep = CgcReport(reports, 0.0, cfg.rel_tol)
            rep.levels[0].matvecs = root.matvec_count - counts[0]
            return v.copy(), rep
        y = v + _descend(h, 0, np.zeros_like(v), gbar, t, cfg.rel_tol, cfg, reports)
    else:
        y = _descend(h, 0, v, g, t, cfg.rel_tol, cfg, reports)
        root_beta = reports[0].beta

    for j, op in enumerate(ops):
        reports[j].matvecs = op.matvec_count - counts[j] - reports[j].estimate_matvecs
    report = CgcReport(reports, root_beta, cfg.rel_tol)
    report.total_estimate = float(sum(r.coarse_error_estimate or 0.0 for r in reports))
    return y, report


def cgc_two_grid(A: LinearOperator, Atilde: LinearOperator, Q: TransferOperator, v, g,
                 t: float, rel_tol: float, krylov_max_dim: int = DEFAULT_MAX_DIM,
                 omega: float = 0.0, **kwargs):
    """Two-grid CGC; a thin wrapper over :func:`cgc_multigrid`."""
    h = GridHierarchy([
        Level(A, Q.fine, None, omega),
        Level(Atilde, Q.coarse, Q, Atilde.omega_hint or 0.0),
    ])
    cfg = CgcConfig(rel_tol=rel_tol, num_levels=2, krylov_max_dim=krylov_max_dim, **kwargs)
    return cgc_multigrid(h, v, g, t, cfg)
