"""Numerical verification of the error bounds and structural identities.

Each check returns a :class:`CheckResult`; :func:`run_suite` runs a named
collection and is what ``phicgc verify`` drives.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .cgc import CgcConfig, cgc_multigrid
from .krylov import ArnoldiDecomposition, arnoldi_extend, evaluate_iterate, phi_rt_solve, residual_norm
from .operators import DenseOperator
from .oracle import dense_phi_apply, dense_phi_reference
from .problems import build_hierarchy, heat1d
from .smallmat import phi_action, phi_scalar
from .transfer import GridSpec, build_prolongation, split_vector, telescope


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def random_tridiagonal(rng, k):
    d = rng.uniform(0.0, 10.0, k)
    e = rng.uniform(0.1, 5.0, k - 1)
    return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def random_psd_operator(rng, n, omega, skew=0.0):
    """Dense operator whose symmetric part has smallest eigenvalue exactly ``omega``."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.concatenate([[omega], omega + rng.uniform(0.0, 20.0, n - 1)])
    a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    if skew:
        s = rng.standard_normal((n, n))
        a = a + skew * (s - s.T)
    return a


def check_phi_kernels(n_matrices=200, kmax=30, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_matrices):
        k = int(rng.integers(1, kmax + 1))
        h = random_tridiagonal(rng, k) if k > 1 else rng.uniform(0, 10, (1, 1))
        t = float(rng.uniform(0.01, 2.0))
        beta = float(rng.uniform(0.5, 5.0))
        lam, u = np.linalg.eigh(h)
        z = -t * lam
        ref = u @ (t * np.array([phi_scalar(x) for x in z]) * u[0] * beta)
        got = phi_action(h, t, beta)
        worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    zs = np.concatenate([-np.logspace(-6, math.log10(50), 200), np.logspace(-6, math.log10(50), 200)])
    scal = max(abs(z * phi_scalar(z) - math.expm1(z)) / abs(math.expm1(z)) for z in zs)
    ok = worst <= 1e-10 and scal <= 1e-13
    return ok, f"phi_action rel err {worst:.2e} (<=1e-10), z*phi(z) rel err {scal:.2e} (<=1e-13)"


def check_residual_identity(n_instances=20, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(20, 101))
        a = random_psd_operator(rng, n, float(rng.uniform(0.1, 1.0)))
        op = DenseOperator(a, symmetric=True)
        v = rng.standard_normal(n)
        g = rng.standard_normal(n)
        T = 1.0
        d = ArnoldiDecomposition.start(g - a @ v, 30, True)
        for _ in range(5):
            arnoldi_extend(op, d)
        s = float(rng.uniform(0.1, T))
        step = 1e-6 * max(T, 1.0)
        dy = (evaluate_iterate(d, s + step, v) - evaluate_iterate(d, s - step, v)) / (2 * step)
        direct = np.linalg.norm(-a @ evaluate_iterate(d, s, v) - dy + g)
        worst = max(worst, abs(residual_norm(d, s) - direct) / direct)
    return worst <= 1e-6, f"max rel mismatch {worst:.2e} (<=1e-6)"


def check_solver_error_bound(n_instances=50, seed=2):
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for i in range(n_instances):
        n = int(rng.integers(40, 101))
        omega = float(rng.choice([0.0, rng.uniform(0.01, 2.0)]))
        skew = 0.0 if i % 2 == 0 else float(rng.uniform(0.1, 2.0))
        a = random_psd_operator(rng, n, omega, skew)
        op = DenseOperator(a, symmetric=skew == 0.0)
        v = rng.standard_normal(n)
        g = rng.standard_normal(n)
        t = float(rng.uniform(0.1, 2.0))
        tol = float(rng.choice([1e-6, 1e-8, 1e-10]))
        res = phi_rt_solve(op, v, g, t, tol, max_dim=int(rng.integers(8, 21)))
        err = np.linalg.norm(dense_phi_reference(a, v, g, t) - res.y)
        bound = t * phi_scalar(-t * omega) * res.residual_bound
        worst = max(worst, err / bound if bound else np.inf if err else 0.0)
        if err > bound * (1 + 1e-6):
            violations += 1
    return violations == 0, f"{violations} violations in {n_instances} solves, max err/bound {worst:.2e}"


def cgc_bound_terms(p, levels, tol):
    """Left and right sides of the multigrid CGC error bound, all dense."""
    h = build_hierarchy(p, levels)
    t = p.T
    dense = [lev.operator.to_dense() for lev in h.levels]
    qs = [lev.transfer_to_finer for lev in h.levels[1:]]
    y, rep = cgc_multigrid(h, p.v, p.g, t, CgcConfig(tol, levels))
    y_ex = dense_phi_reference(dense[0], p.v, p.g, t)
    gbar = p.g - dense[0] @ p.v
    beta = np.linalg.norm(gbar)
    gts = []
    cur = gbar
    for q in qs:
        cur = q.restrict(cur)
        gts.append(cur)
    qnorms = [np.linalg.norm(q.dense(), 2) for q in qs]
    prods = np.concatenate([[1.0], np.cumprod(qnorms)])
    coarse_terms = 0.0
    for j, q in enumerate(qs):
        gt = gts[j]
        diff = dense_phi_apply(dense[j], q.prolong(gt), t) - q.prolong(dense_phi_apply(dense[j + 1], gt, t))
        coarse_terms += prods[j] * np.linalg.norm(diff)
    omega_bar = h.omega_bar
    rhs = coarse_terms + t * phi_scalar(-t * omega_bar) * beta * tol * prods[:levels].sum()
    return float(np.linalg.norm(y_ex - y)), float(rhs), rep


def check_two_grid_bound(sizes=(64, 128), tols=(1e-4, 1e-8)):
    bad = []
    ratios = []
    for n in sizes:
        for tol in tols:
            lhs, rhs, _ = cgc_bound_terms(heat1d(n), 2, tol)
            ratios.append(lhs / rhs)
            if lhs > rhs:
                bad.append((n, tol))
    return not bad, f"two-grid err/bound max {max(ratios):.6f}; violations {bad}"


def check_multigrid_bound(sizes=(128,), tols=(1e-4, 1e-8)):
    bad = []
    ratios = []
    for n in sizes:
        for tol in tols:
            lhs, rhs, _ = cgc_bound_terms(heat1d(n), 3, tol)
            ratios.append(lhs / rhs)
            if lhs > rhs:
                bad.append((n, tol))
    return not bad, f"three-level err/bound max {max(ratios):.6f}; violations {bad}"


def two_grid_dt_errors(n=256, dts=(1e-6, 2e-6, 4e-6, 8e-6), inner_tol=1e-12):
    p = heat1d(n)
    h = build_hierarchy(p, 2)
    a = p.operator.to_dense()
    errs = []
    for dt in dts:
        y, _ = cgc_multigrid(h, p.v, p.g, dt, CgcConfig(inner_tol, 2))
        errs.append(float(np.linalg.norm(y - dense_phi_reference(a, p.v, p.g, dt))))
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return slope, errs


def check_second_order(dts=(1e-6, 2e-6, 4e-6, 8e-6)):
    slope, errs = two_grid_dt_errors(dts=dts)
    return 1.7 <= slope <= 2.3, f"log-log slope {slope:.3f} in [1.7, 2.3] over dt={list(dts)}"


def check_reconstruction(seed=3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for grid in (GridSpec((64,), "periodic"), GridSpec((16, 12, 8), "dirichlet")):
        grids = [grid, grid.coarsen(), grid.coarsen().coarsen()]
        qs = [build_prolongation(c, f) for f, c in zip(grids, grids[1:])]
        for _ in range(20):
            g = rng.standard_normal(grid.size)
            s = split_vector(qs[0], g)
            worst = max(worst, np.linalg.norm(qs[0].prolong(s.gtilde) + s.ghat - g) / np.linalg.norm(g))
            ghats, gm = telescope(qs, g)
            acc = gm
            for q, gh in zip(reversed(qs), reversed(ghats)):
                acc = q.prolong(acc) + gh
            worst = max(worst, np.linalg.norm(acc - g) / np.linalg.norm(g))
    return worst <= 1e-12, f"max relative reconstruction defect {worst:.2e}"


def check_adjointness(seed=4, pairs=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for grid in (GridSpec((32,), "periodic"), GridSpec((8, 12, 16), "dirichlet")):
        for method in ("linear", "cubic-spline"):
            q = build_prolongation(grid.coarsen(), grid, method, restriction="transpose")
            for _ in range(pairs):
                xc = rng.standard_normal(q.coarse.size)
                yf = rng.standard_normal(q.fine.size)
                lhs = q.prolong(xc) @ yf
                rhs = xc @ q.restrict(yf)
                worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return worst <= 1e-13, f"max adjoint defect {worst:.2e}"


def check_tolerance_identity(tolerance_fault=1.0):
    worst = 0.0
    excess = 0
    for levels in (2, 3, 4):
        p = heat1d(256)
        h = build_hierarchy(p, levels)
        cfg = CgcConfig(1e-8, levels, tolerance_fault=tolerance_fault)
        _, rep = cgc_multigrid(h, p.v, p.g, p.T, cfg)
        worst = max(worst, rep.tolerance_identity_defect())
        target = rep.root_beta * rep.root_rel_tol
        excess += sum(lev.solved and lev.residual_bound > target * (1 + 1e-12) for lev in rep.levels)
    ok = worst <= 1e-13 and excess == 0
    return ok, (f"max relative defect of beta*tol vs root threshold {worst:.2e}; "
                f"{excess} solves above the root threshold")


SUITES = {
    "fast": [
        ("kernels", lambda **kw: check_phi_kernels(50)),
        ("residual identity", lambda **kw: check_residual_identity(5)),
        ("solver error bound", lambda **kw: check_solver_error_bound(10)),
        ("two-grid bound", lambda **kw: check_two_grid_bound(sizes=(64,))),
        ("multigrid bound", lambda **kw: check_multigrid_bound(sizes=(64,))),
        ("reconstruction", lambda **kw: check_reconstruction()),
        ("adjointness", lambda **kw: check_adjointness(pairs=20)),
        ("tolerance identity", lambda **kw: check_tolerance_identity(**kw)),
    ],
    "full": [
        ("kernels", lambda **kw: check_phi_kernels()),
        ("residual identity", lambda **kw: check_residual_identity()),
        ("solver error bound", lambda **kw: check_solver_error_bound()),
        ("two-grid bound", lambda **kw: check_two_grid_bound()),
        ("multigrid bound", lambda **kw: check_multigrid_bound()),
        ("second order in dt", lambda **kw: check_second_order()),
        ("reconstruction", lambda **kw: check_reconstruction()),
        ("adjointness", lambda **kw: check_adjointness()),
        ("tolerance identity", lambda **kw: check_tolerance_identity(**kw)),
    ],
}


def run_suite(suite: str = "fast", tolerance_fault: float = 1.0,
              echo: Callable[[str], None] = print) -> List[CheckResult]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    results = []
    for name, fn in SUITES[suite]:
        t0 = time.perf_counter()
        kw = {"tolerance_fault": tolerance_fault} if name == "tolerance identity" else {}
        try:
            ok, detail = fn(**kw)
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        res = CheckResult(name, bool(ok), detail, time.perf_counter() - t0)
        echo(res.line())
        results.append(res)
    return results
