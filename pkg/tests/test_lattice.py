import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmode import (DomainError, LatticeSpec, adjacency, build_hopping_matrix, build_index_set,
                   ground_state_vector, hypercube, spectrum_dense, spectrum_recursive)


def test_index_set_is_lexicographic():
    assert build_index_set(hypercube(2)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert len(build_index_set(hypercube(3))) == 8


def test_box_bounds_validated():
    with pytest.raises(DomainError):
        LatticeSpec(((1, 0),))
    with pytest.raises(DomainError):
        LatticeSpec(())


def test_adjacency_is_manhattan_one():
    assert adjacency((0, 1), (1, 1))
    assert not adjacency((0, 0), (1, 1))
    assert not adjacency((0, 0), (0, 0))


def test_hopping_matrix_d2():
    T = build_hopping_matrix(hypercube(2), lambda_D=0.5, beta=2.0)
    expected = np.array([[0.5, -2, -2, 0], [-2, 0.5, 0, -2], [-2, 0, 0.5, -2], [0, -2, -2, 0.5]])
    np.testing.assert_array_equal(T.entries, expected)
    indptr, cols, data = T.csr()
    assert indptr[-1] == 4 + 8


def test_spectrum_d1_and_d3():
    s1 = spectrum_recursive(1)
    assert s1.pairs() == [(-1.0, 1), (1.0, 1)]
    s3 = spectrum_recursive(3)
    assert s3.pairs() == [(-3.0, 1), (-1.0, 3), (1.0, 3), (3.0, 1)]


@pytest.mark.parametrize("d", range(1, 7))
def test_recursive_matches_dense(d):
    rec = spectrum_recursive(d, lambda_D=0.3, beta=1.7)
    dense = spectrum_dense(build_hopping_matrix(hypercube(d), 0.3, 1.7))
    assert rec.matches(dense, atol=1e-10)
    assert rec.size == 2 ** d


def test_spectrum_runtime():
    t0 = time.perf_counter()
    for d in range(1, 7):
        spectrum_dense(build_hopping_matrix(hypercube(d)))
        spectrum_recursive(d)
    assert time.perf_counter() - t0 < 1.0


def test_ground_vector_is_lowest_mode():
    for d in (1, 2, 3):
        T = build_hopping_matrix(hypercube(d))
        v = ground_state_vector(d)
        np.testing.assert_allclose(T.entries @ v, -d * v, atol=1e-14)
        assert abs(v @ v - 1) < 1e-14


def test_dense_vectors_returned():
    T = build_hopping_matrix(hypercube(2))
    _, w, v = spectrum_dense(T, return_vectors=True)
    np.testing.assert_allclose(T.entries @ v, v * w, atol=1e-12)


def test_general_box():
    spec = LatticeSpec(((0, 2), (-1, 0)))
    assert spec.size == 6
    T = build_hopping_matrix(spec)
    assert np.all(T.entries == T.entries.T)
    assert int(np.sum(T.entries != 0)) == 2 * 7


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.floats(-5, 5), st.floats(0.1, 5))
def test_spectrum_shift_and_scale(d, lam, beta):
    base = spectrum_recursive(d)
    s = spectrum_recursive(d, lambda_D=lam, beta=beta)
    np.testing.assert_allclose(s.values, lam + beta * np.asarray(base.values), atol=1e-12)
    assert s.multiplicities == base.multiplicities
