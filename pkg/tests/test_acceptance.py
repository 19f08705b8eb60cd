"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line; they are printed together in the
"acceptance criteria" section of the pytest summary.
"""
import time

import numpy as np
import pytest

from phicgc.cgc import CgcConfig, cgc_multigrid
from phicgc.krylov import phi_rt_solve
from phicgc.oracle import reference_solution, relative_error
from phicgc.problems import build_hierarchy, heat1d, heat3d
from phicgc.transfer import split_vector
from phicgc.verify import (
    check_solver_error_bound,
    check_phi_kernels,
    check_two_grid_bound,
    check_multigrid_bound,
    check_residual_identity,
    two_grid_dt_errors,
)

pytestmark = pytest.mark.acceptance


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def solve_rows(p, levels, with_reference=True):
    """One-grid baseline plus CGC runs; errors against the tight reference."""
    out = {}
    y_ref = reference_solution(p) if with_reference else None
    p.operator.reset_and_read_matvec_count()
    base = phi_rt_solve(p.operator, p.v, p.g, p.T, p.rel_tol)
    out[1] = {"y": base.y, "matvecs": [base.matvecs], "report": None}
    h = build_hierarchy(p, max(levels))
    for m in levels:
        y, rep = cgc_multigrid(h, p.v, p.g, p.T, CgcConfig(p.rel_tol, m))
        out[m] = {"y": y, "matvecs": rep.matvecs, "report": rep}
    if with_reference:
        for row in out.values():
            row["error"] = relative_error(row["y"], y_ref)
    return out


@pytest.fixture(scope="module")
def heat1d_1024():
    return solve_rows(heat1d(1024), [2])


@pytest.fixture(scope="module")
def heat3d_80x88x96():
    return solve_rows(heat3d(80, 88, 96), [2])


def test_criterion_01_phi_kernels(record_criterion):
    (ok, detail), secs = timed(check_phi_kernels, 200, 30)
    ok = ok and secs < 10
    assert record_criterion(1, ok, f"{detail}; {secs:.1f}s (<10s)"), detail


def test_criterion_02_residual_identity(record_criterion):
    (ok, detail), secs = timed(check_residual_identity, 20)
    ok = ok and secs < 30
    assert record_criterion(2, ok, f"{detail}; {secs:.1f}s (<30s)"), detail


def test_criterion_03_solver_error_bound(record_criterion):
    (ok, detail), secs = timed(check_solver_error_bound, 50)
    ok = ok and secs < 60
    assert record_criterion(3, ok, f"{detail}; {secs:.1f}s (<60s)"), detail


def test_criterion_04_two_grid_bound(record_criterion):
    (ok, detail), secs = timed(check_two_grid_bound, (64, 128), (1e-4, 1e-8))
    ok = ok and secs < 120
    assert record_criterion(4, ok, f"{detail}; {secs:.1f}s (<120s)"), detail


def test_criterion_05_three_level_bound(record_criterion):
    (ok, detail), secs = timed(check_multigrid_bound, (128,), (1e-4, 1e-8))
    ok = ok and secs < 120
    assert record_criterion(5, ok, f"{detail}; {secs:.1f}s (<120s)"), detail


def test_criterion_06_periodic_1d_reproduction(heat1d_1024, record_criterion):
    rows = heat1d_1024
    one, two = rows[1], rows[2]
    p = heat1d(1024)
    q = build_hierarchy(p, 2).levels[1].transfer_to_finer
    s = split_vector(q, p.g - p.operator.apply(p.v))
    expect_tol = s.beta / s.beta_hat * 1e-8
    got_tol = two["report"].tolerances[0]
    checks = {
        "1-grid error <= 1e-10": one["error"] <= 1e-10,
        "2-grid error in [1e-9, 1e-6]": 1e-9 <= two["error"] <= 1e-6,
        "2-grid matvecs <= half": sum(two["matvecs"]) <= 0.5 * one["matvecs"][0],
        "fine tol = (beta/beta_hat)*1e-8": abs(got_tol - expect_tol) <= 1e-14 * expect_tol,
    }
    ok = all(checks.values())
    detail = (f"1-grid err {one['error']:.2e} ({one['matvecs'][0]} mv); 2-grid err {two['error']:.2e}, "
              f"matvecs {two['matvecs']} ({one['matvecs'][0] / sum(two['matvecs']):.1f}x fewer), "
              f"fine tol {got_tol:.3e}; failed: {[k for k, v in checks.items() if not v]}")
    assert record_criterion(6, ok, detail), detail


def test_criterion_07_dirichlet_3d_reproduction(heat3d_80x88x96, record_criterion):
    desk = solve_rows(heat3d(40, 44, 48), [2])
    full = heat3d_80x88x96
    ratio = full[1]["matvecs"][0] / sum(full[2]["matvecs"])
    checks = {
        "40x44x48 2-grid error <= 3e-2": desk[2]["error"] <= 3e-2,
        "80x88x96 2-grid error in [1e-5, 1e-2]": 1e-5 <= full[2]["error"] <= 1e-2,
        "80x88x96 reduction >= 2x": ratio >= 2.0,
    }
    ok = all(checks.values())
    detail = (f"40x44x48 err {desk[2]['error']:.2e}; 80x88x96 err {full[2]['error']:.2e}, "
              f"matvecs {full[2]['matvecs']} vs {full[1]['matvecs'][0]} ({ratio:.1f}x); "
              f"failed: {[k for k, v in checks.items() if not v]}")
    assert record_criterion(7, ok, detail), detail


def test_criterion_08_long_interval(heat3d_80x88x96, record_criterion):
    p = heat3d(80, 88, 96)
    p.T = 1.0
    long_run = solve_rows(p, [2], with_reference=False)[2]["matvecs"]
    short_run = heat3d_80x88x96[2]["matvecs"]
    growth = [abs(a - b) / b for a, b in zip(long_run, short_run)]
    ok = all(g <= 0.2 for g in growth)
    detail = f"T=1 matvecs {long_run} vs T=0.1 {short_run}; max change {max(growth):.1%} (<=20%)"
    assert record_criterion(8, ok, detail), detail


def test_criterion_09_second_order(record_criterion):
    # steps small enough that dt*||A|| < 1 on N=256
    (slope, errs), secs = timed(two_grid_dt_errors, 256, (1e-6, 2e-6, 4e-6, 8e-6), 1e-12)
    ok = 1.7 <= slope <= 2.3 and secs < 120
    detail = f"slope {slope:.3f} in [1.7, 2.3] over dt=1e-6*(1,2,4,8); errors {[f'{e:.2e}' for e in errs]}"
    assert record_criterion(9, ok, detail), detail


def test_criterion_10_estimate(heat1d_1024, record_criterion):
    two = heat1d_1024[2]
    est = two["report"].total_estimate / np.linalg.norm(two["y"])
    ok = two["error"] < est <= 1.0
    detail = f"relative estimate {est:.2e} vs error {two['error']:.2e} (need error < estimate <= 1)"
    assert record_criterion(10, ok, detail), detail
