import threading

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from phicgc.exceptions import DimensionMismatchError, EstimatorUnavailableError
from phicgc.operators import (
    CsrOperator,
    MatrixFreeOperator,
    ZeroOperator,
    identity,
    read_matrix_market,
    write_matrix_market,
)
from phicgc.problems import heat1d, periodic_laplacian_1d


def test_zero_operator_maps_to_zero(rng):
    op = ZeroOperator(7)
    assert np.all(op.apply(rng.standard_normal(7)) == 0)


def test_identity_csr():
    op = identity(3)
    np.testing.assert_array_equal(op.apply([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_periodic_laplacian_annihilates_constants():
    op = periodic_laplacian_1d(64)
    assert np.max(np.abs(op.apply(np.ones(64)))) < 1e-9


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionMismatchError):
        identity(3).apply(np.ones(4))


def test_csr_layout_invariants():
    a = sp.random(30, 30, density=0.2, random_state=1, format="coo")
    # duplicate an entry to make sure duplicates are summed
    a = sp.coo_matrix((np.r_[a.data, 1.0], (np.r_[a.row, 0], np.r_[a.col, 0])), shape=(30, 30))
    op = CsrOperator(a)
    ro = op.row_offsets
    assert ro[0] == 0 and ro[-1] == op.values.size
    assert np.all(np.diff(ro) >= 0)
    for i in range(30):
        cols = op.col_indices[ro[i]:ro[i + 1]]
        assert np.all(np.diff(cols) > 0) and np.all(cols < 30)


def test_one_norm():
    assert identity(5).one_norm() == 1.0
    T = 0.01
    assert T * heat1d(1024).operator.one_norm() > 42_000
    assert T * heat1d(2048).operator.one_norm() > 165_000


def test_one_norm_unavailable_for_opaque_operator():
    op = MatrixFreeOperator(4, lambda x: 2 * x)
    with pytest.raises(EstimatorUnavailableError):
        op.one_norm()


def test_matvec_counting():
    op = identity(4)
    assert op.reset_and_read_matvec_count() == 0
    for _ in range(3):
        op.apply(np.ones(4))
    assert op.reset_and_read_matvec_count() == 3
    op.apply(np.ones(4))
    assert op.reset_and_read_matvec_count() == 1


def test_matvec_counter_is_thread_safe():
    op = MatrixFreeOperator(8, lambda x: x)
    x = np.ones(8)

    def work():
        for _ in range(500):
            op.apply(x)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert op.matvec_count == 4000


def test_csr_matches_dense(rng):
    a = rng.standard_normal((25, 25))
    a[np.abs(a) < 0.8] = 0.0
    op = CsrOperator(a)
    x = rng.standard_normal(25)
    np.testing.assert_allclose(op.apply(x), a @ x, rtol=1e-14, atol=1e-14 * np.abs(a).sum())


@settings(max_examples=50, deadline=None)
@given(
    alpha=st.floats(-10, 10),
    beta=st.floats(-10, 10),
    seed=st.integers(0, 2**32 - 1),
)
def test_apply_is_linear(alpha, beta, seed):
    r = np.random.default_rng(seed)
    op = heat1d(32).operator
    x, y = r.standard_normal(32), r.standard_normal(32)
    ax, ay = op.apply(x), op.apply(y)
    lhs = op.apply(alpha * x + beta * y) - alpha * ax - beta * ay
    scale = abs(alpha) * np.linalg.norm(ax) + abs(beta) * np.linalg.norm(ay)
    assert np.linalg.norm(lhs) <= 1e-12 * scale + 1e-300


def test_matrix_market_roundtrip(tmp_path):
    op = heat1d(16).operator
    path = tmp_path / "a.mtx"
    write_matrix_market(path, op)
    back = read_matrix_market(path)
    np.testing.assert_allclose(back.to_dense(), op.to_dense())
    assert back.symmetric
