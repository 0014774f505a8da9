import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridinject import ybus as yb
from gridinject.errors import ConstructionError, DomainError
from gridinject.sparse import (
    CscMatrix,
    TripletList,
    concat4,
    csc_from_triplets,
    pattern_clone_with_values,
    spmv_complex,
)

small_ints = st.integers(min_value=-5, max_value=5).map(float)


def dense_matrices(max_dim=6):
    shapes = st.tuples(st.integers(0, max_dim), st.integers(0, max_dim))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=small_ints))


def test_duplicates_sum():
    m = csc_from_triplets(TripletList([0, 0], [0, 0], [1.0, 2.0], 1, 1))
    assert list(m.nzval) == [3.0]


def test_empty():
    m = csc_from_triplets(TripletList([], [], [], 3, 3))
    assert list(m.col_start) == [0, 0, 0, 0]
    assert m.nnz == 0


def test_column_major_order():
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    m = csc_from_triplets(TripletList([0, 0, 1, 1], [0, 1, 0, 1], [a, b, c, d], 2, 2))
    assert list(m.nzval) == [a, c, b, d]
    assert list(m.row_idx) == [0, 1, 0, 1]
    m.check()


def test_out_of_range_triplet():
    with pytest.raises(ConstructionError):
        csc_from_triplets(TripletList([2], [0], [1.0], 2, 2))
    with pytest.raises(ConstructionError):
        csc_from_triplets(TripletList([0], [-1], [1.0], 2, 2))


def test_explicit_zero_from_triplets_is_kept():
    m = csc_from_triplets(TripletList([1, 0], [0, 0], [0.0, 5.0], 2, 1))
    assert list(m.row_idx) == [0, 1]
    assert list(m.nzval) == [5.0, 0.0]


@settings(max_examples=60, deadline=None)
@given(dense_matrices(), st.randoms(use_true_random=False))
def test_triplets_reproduce_dense(dense, rnd):
    rows, cols = np.nonzero(dense)
    order = list(range(len(rows)))
    rnd.shuffle(order)
    # split each value in two duplicates to exercise summation
    r = np.concatenate([rows[order], rows[order]])
    c = np.concatenate([cols[order], cols[order]])
    v = np.concatenate([dense[rows, cols][order] - 1.0, np.ones(len(order))])
    m = csc_from_triplets(TripletList(r, c, v, *dense.shape))
    m.check()
    np.testing.assert_array_equal(m.to_dense(), dense)


def test_spmv_identity_and_zero():
    x = np.array([1 + 2j, -3j, 0.5])
    eye = CscMatrix.from_dense(np.eye(3, dtype=complex))
    np.testing.assert_array_equal(spmv_complex(eye, x), x)
    zero = CscMatrix.from_dense(np.zeros((3, 3), dtype=complex))
    np.testing.assert_array_equal(spmv_complex(zero, x), np.zeros(3))


def test_spmv_two_bus():
    y = np.array([[-10j, 10j], [10j, -10j]])
    x = np.array([np.exp(0.1j), 1.0])
    np.testing.assert_allclose(spmv_complex(CscMatrix.from_dense(y), x), y @ x, rtol=1e-15)


def test_spmv_dimension_mismatch():
    with pytest.raises(DomainError):
        spmv_complex(CscMatrix.from_dense(np.eye(3, dtype=complex)), np.ones(2))


@pytest.mark.parametrize("seed", range(5))
def test_spmv_random_against_dense(seed):
    rng = np.random.default_rng(seed)
    dense = (rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20)))
    dense[rng.random((20, 20)) < 0.7] = 0
    x = rng.normal(size=20) + 1j * rng.normal(size=20)
    got = spmv_complex(CscMatrix.from_dense(dense), x)
    ref = dense @ x
    assert np.abs(got - ref).max() <= 1e-13 * np.abs(ref).max()


def test_concat4_scalars():
    blocks = [CscMatrix.from_dense([[v]]) for v in (1.0, 2.0, 3.0, 4.0)]
    m = concat4(*blocks)
    assert list(m.nzval) == [1.0, 3.0, 2.0, 4.0]
    m.check()


def test_concat4_keeps_empty_columns():
    z = CscMatrix.from_dense(np.zeros((2, 2)))
    eye = CscMatrix.from_dense(np.eye(2))
    m = concat4(z, z, z, eye)
    assert list(m.col_start) == [0, 0, 0, 1, 2]
    assert m.shape == (4, 4)


def test_concat4_non_conformable():
    a = CscMatrix.from_dense(np.ones((2, 2)))
    b = CscMatrix.from_dense(np.ones((3, 2)))
    with pytest.raises(DomainError):
        concat4(a, b, a, a)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4), st.data())
def test_concat4_matches_dense_blocks(r1, r2, c1, c2, data):
    def block(r, c):
        return data.draw(arrays(np.float64, (r, c), elements=small_ints))

    a11, a12, a21, a22 = block(r1, c1), block(r1, c2), block(r2, c1), block(r2, c2)
    m = concat4(*(CscMatrix.from_dense(b) for b in (a11, a12, a21, a22)))
    m.check()
    np.testing.assert_array_equal(m.to_dense(), np.block([[a11, a12], [a21, a22]]))


def test_pattern_clone_identity_zero():
    eye = CscMatrix.from_dense(np.eye(3))
    c = pattern_clone_with_values(eye, 0.0)
    assert c.nnz == 3
    assert list(c.nzval) == [0.0, 0.0, 0.0]
    assert c.col_start is eye.col_start and c.row_idx is eye.row_idx
    assert eye.nzval[0] == 1.0


def test_pattern_clone_array_fill_and_bad_length():
    eye = CscMatrix.from_dense(np.eye(2))
    c = pattern_clone_with_values(eye, np.array([5.0, 6.0]))
    assert list(c.nzval) == [5.0, 6.0]
    with pytest.raises(DomainError):
        pattern_clone_with_values(eye, np.array([1.0]))


def test_pattern_clone_of_case14_ybus(case14):
    y = yb.build_ybus(case14)
    c = pattern_clone_with_values(y, 0.0)
    coords = {(i, i) for i in range(case14.n_b)}
    for f, t in zip(case14.from_idx, case14.to_idx):
        coords |= {(f, t), (t, f)}
    assert c.nnz == y.nnz == len(coords)
    assert c.same_pattern(y)


def test_check_rejects_unsorted_rows():
    m = CscMatrix(2, 1, np.array([0, 2]), np.array([1, 0]), np.array([1.0, 2.0]))
    with pytest.raises(ConstructionError):
        m.check()
