import numpy as np
import pytest
import scipy.sparse as sp

from phicgc.exceptions import GridMismatchError
from phicgc.krylov import ArnoldiDecomposition, arnoldi_extend, omega_ritz_estimate
from phicgc.problems import (
    build_hierarchy,
    dirichlet_laplacian_3d,
    dirichlet_omega_3d,
    heat1d,
    heat3d,
    periodic_laplacian_1d,
)


class TestHeat1d:
    def test_stencil(self):
        p = heat1d(16)
        a = p.operator.to_dense()
        h2 = (1 / 17) ** 2
        np.testing.assert_allclose(a[5, 4:7] * h2, [-1, 2, -1])
        assert a[0, 15] * h2 == pytest.approx(-1) and a[15, 0] * h2 == pytest.approx(-1)
        assert p.T == 0.01 and p.rel_tol == 1e-8 and p.omega == 0.0
        np.testing.assert_array_equal(p.v, np.ones(16))

    def test_constant_null_space(self):
        op = periodic_laplacian_1d(32)
        assert np.abs(op.apply(np.ones(32))).max() <= 1e-9

    def test_stiffness(self):
        p = heat1d(1024)
        assert p.T * p.operator.one_norm() > 42_000
        assert p.T * p.operator.one_norm() == pytest.approx(0.04 * 1025**2)

    def test_source(self):
        p = heat1d(64)
        x = np.arange(1, 65) / 65
        np.testing.assert_allclose(p.g, np.exp(-500 * (x - 0.5) ** 2))

    def test_second_order_accuracy(self):
        # the wrap row spaces nodes N and 1 by h, so test with data periodic on the grid itself
        errs, hs = [], []
        for n in (32, 64, 128, 256):
            h = 1 / (n + 1)
            k = 2 * np.pi / (n * h)
            u = np.sin(k * h * np.arange(1, n + 1))
            lap = periodic_laplacian_1d(n).apply(u)
            errs.append(np.abs(lap - k**2 * u).max())
            hs.append(h)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert 1.8 <= slope <= 2.2

    @pytest.mark.parametrize("n", [2, 7])
    def test_bad_sizes(self, n):
        with pytest.raises(GridMismatchError):
            heat1d(n)


class TestHeat3d:
    def test_matches_kronecker_assembly(self):
        dims = (4, 6, 8)
        op = dirichlet_laplacian_3d(dims)
        ts = [sp.diags([-1, 2, -1], [-1, 0, 1], shape=(n, n)) * (n + 1) ** 2 for n in dims]
        ix, iy, iz = (sp.identity(n) for n in dims)
        a = sp.kron(iz, sp.kron(iy, ts[0])) + sp.kron(iz, sp.kron(ts[1], ix)) + sp.kron(ts[2], sp.kron(iy, ix))
        np.testing.assert_allclose(op.to_dense(), a.toarray(), atol=1e-9)

    def test_diagonal_and_omega(self):
        dims = (4, 6, 8)
        a = dirichlet_laplacian_3d(dims).to_dense()
        assert a[0, 0] == pytest.approx(sum(2 * (n + 1) ** 2 for n in dims))
        assert dirichlet_omega_3d(dims) == pytest.approx(np.linalg.eigvalsh(a)[0], rel=1e-10)

    def test_problem_data(self):
        p = heat3d(8, 10, 12)
        assert p.T == 0.1 and p.rel_tol == 1e-5 and not p.v.any()
        assert p.omega == pytest.approx(dirichlet_omega_3d((8, 10, 12)))
        iz, iy, ix = np.unravel_index(np.argmax(p.g), p.grid.shape)
        # even extents: the peak sits at one of the two nodes flanking one half
        assert ix in (3, 4) and iy in (4, 5) and iz in (5, 6)

    def test_peak_near_one(self):
        assert 0.99 < heat3d(80, 88, 96).g.max() <= 1.0

    def test_x_fastest_ordering(self):
        p = heat3d(4, 6, 8)
        g = p.g.reshape(8, 6, 4)
        x = np.arange(1, 5) / 5
        np.testing.assert_allclose(g[0, 0, :] / g[0, 0, 0], np.exp(-50 * ((x - 0.5) ** 2 - (x[0] - 0.5) ** 2)))

    def test_positive_definite(self, rng):
        op = dirichlet_laplacian_3d((8, 10, 12))
        d = ArnoldiDecomposition.start(rng.standard_normal(op.dim), 30, True)
        for _ in range(30):
            arnoldi_extend(op, d)
        assert omega_ritz_estimate(d) > 0

    def test_one_norm(self):
        op = dirichlet_laplacian_3d((4, 6, 8))
        assert op.one_norm() == pytest.approx(np.abs(op.to_dense()).sum(axis=0).max())


def test_symmetry(rng):
    for op in (periodic_laplacian_1d(64), dirichlet_laplacian_3d((6, 8, 10))):
        for _ in range(10):
            x, y = rng.standard_normal(op.dim), rng.standard_normal(op.dim)
            assert abs(op.apply(x) @ y - x @ op.apply(y)) <= 1e-10 * np.linalg.norm(op.apply(x)) * np.linalg.norm(y)
        assert op.symmetric


class TestHierarchy:
    def test_single_level(self):
        p = heat1d(64)
        h = build_hierarchy(p, 1)
        assert h.depth == 1 and h.levels[0].operator is p.operator

    def test_1d_three_levels(self):
        h = build_hierarchy(heat1d(1024), 3)
        assert [lev.grid.dims[0] for lev in h.levels] == [1024, 512, 256]
        assert all(lev.omega == 0.0 for lev in h.levels)

    def test_3d_two_levels(self):
        h = build_hierarchy(heat3d(80, 88, 96), 2)
        assert [lev.operator.dim for lev in h.levels] == [675_840, 84_480]
        assert h.levels[1].grid.dims == (40, 44, 48)
        assert h.levels[1].omega == pytest.approx(dirichlet_omega_3d((40, 44, 48)))

    def test_divisibility(self):
        with pytest.raises(GridMismatchError):
            build_hierarchy(heat1d(12), 4)
        with pytest.raises(ValueError):
            build_hierarchy(heat1d(12), 0)
