#!/usr/bin/env python3
"""
Tests for Smith/Howell forms and solution counting over Z/p^k, checked
against brute-force enumeration on small instances.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import itertools

import numpy as np
import pytest

from src.errors import DimensionMismatch
from src.linalg import (
    MatrixZpk, count_solutions, eval_poly_at_matrix, howell_form, is_invertible,
    smith_normal_form, span_log_size,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def _image_size(M: MatrixZpk) -> int:
    """Brute force |{xM}| over all row vectors x."""
    mod = M.modulus
    seen = set()
    for x in itertools.product(range(mod), repeat=M.rows):
        seen.add(tuple(int(v) for v in np.mod(np.array(x, dtype=object).dot(M.entries.astype(object)), mod)))
    return len(seen)


def test_snf_identity():
    snf = smith_normal_form(MatrixZpk.identity(3, 2, 4))
    assert snf.valuations == (0, 0, 0, 0)
    assert snf.partition == ()


def test_snf_zero_matrix():
    snf = smith_normal_form(MatrixZpk.zeros(2, 2, 2, 2))
    assert snf.valuations == (2, 2)
    assert snf.partition == (2, 2)
    assert snf.order == 16


def test_snf_example_over_z4():
    snf = smith_normal_form(MatrixZpk.from_rows(2, 2, [[2, 1], [0, 2]]))
    assert snf.valuations == (0, 2)
    assert snf.partition == (2,)


def test_snf_transforms(rng):
    for _ in range(20):
        M = MatrixZpk(3, 2, rng.integers(0, 9, size=(4, 3)))
        snf = smith_normal_form(M, transforms=True)
        U = MatrixZpk(3, 2, snf.U)
        V = MatrixZpk(3, 2, snf.V)
        D = (U @ M @ V).entries
        for i in range(D.shape[0]):
            for j in range(D.shape[1]):
                if i != j:
                    assert D[i, j] == 0
        assert (MatrixZpk(3, 2, snf.U_inv) @ U) == MatrixZpk.identity(3, 2, 4)


def test_snf_order_matches_brute_force(rng):
    for _ in range(15):
        M = MatrixZpk(2, 2, rng.integers(0, 4, size=(2, 2)))
        assert smith_normal_form(M).order * _image_size(M) == 4 ** 2


def test_howell_identity_and_kernel():
    H = howell_form(MatrixZpk.identity(5, 1, 3))
    assert H.rows.tolist() == np.eye(3, dtype=np.int64).tolist()
    assert H.kernel.shape[0] == 0


def test_howell_of_two_mod_four():
    H = howell_form(MatrixZpk.from_rows(2, 2, [[2]]))
    assert H.rows.tolist() == [[2]]
    assert H.kernel.tolist() == [[2]]


def test_kernel_times_image_random(rng):
    for _ in range(10):
        M = MatrixZpk(2, 3, rng.integers(0, 8, size=(3, 3)))
        H = howell_form(M)
        kernel_log = span_log_size(H.kernel, 2, 3)
        assert H.span_log_size + kernel_log == 9
        for row in H.kernel:
            assert not np.any(np.mod(np.array(row, dtype=object).dot(M.entries.astype(object)), 8))


def test_count_solutions_basic():
    assert count_solutions(MatrixZpk.zeros(2, 2, 1, 0)) == 4
    assert count_solutions(MatrixZpk.zeros(2, 2, 1, 1)) == 4
    assert count_solutions(MatrixZpk.from_rows(2, 2, [[2]])) == 2


def test_count_solutions_against_enumeration(rng):
    for _ in range(20):
        A = MatrixZpk(2, 2, rng.integers(0, 4, size=(3, 2)))
        B = np.array([[2, 0]], dtype=object)
        brute = 0
        for x in itertools.product(range(4), repeat=3):
            y = np.mod(np.array(x, dtype=object).dot(A.entries.astype(object)), 4)
            if y[1] == 0 and y[0] % 2 == 0:
                brute += 1
        assert count_solutions(A, relations=B) == brute


def test_count_solutions_checks_shapes():
    with pytest.raises(DimensionMismatch):
        count_solutions(MatrixZpk.zeros(2, 2, 2, 2), relations=np.zeros((1, 3), dtype=object))


def test_eval_poly_at_matrix():
    X = MatrixZpk.from_rows(2, 2, [[1, 3], [2, 0]])
    assert eval_poly_at_matrix((0, 1), X) == X
    N = MatrixZpk.from_rows(2, 1, [[0, 1], [0, 0]])
    assert not np.any(eval_poly_at_matrix((0, 0, 1), N).entries)
    I = MatrixZpk.identity(2, 2, 3)
    assert eval_poly_at_matrix((2, 3, 1), I).entries.tolist() == (2 * np.eye(3, dtype=np.int64)).tolist()


def test_is_invertible():
    assert is_invertible(MatrixZpk.from_rows(2, 3, [[1, 2], [0, 3]]))
    assert not is_invertible(MatrixZpk.from_rows(2, 3, [[2, 0], [0, 1]]))


def _random_invertible(rng, p, k, n):
    while True:
        U = MatrixZpk(p, k, rng.integers(0, p ** k, size=(n, n)))
        if is_invertible(U):
            return U


def test_snf_diagonal_and_invertible_transforms(rng):
    for p, k, shape in [(2, 3, (3, 3)), (3, 2, (4, 2)), (5, 1, (2, 4))]:
        for _ in range(10):
            M = MatrixZpk(p, k, rng.integers(0, p ** k, size=shape))
            snf = smith_normal_form(M, transforms=True)
            U = MatrixZpk(p, k, snf.U)
            V = MatrixZpk(p, k, snf.V)
            assert U @ M @ V == MatrixZpk(p, k, snf.diagonal(M.cols))
            assert is_invertible(U)
            assert is_invertible(V)


@pytest.mark.parametrize("p,k", [(2, 3), (3, 2)])
def test_howell_form_is_canonical(rng, p, k):
    for _ in range(15):
        M = MatrixZpk(p, k, rng.integers(0, p ** k, size=(3, 4)))
        H = howell_form(M, with_kernel=False)
        U = _random_invertible(rng, p, k, 3)
        G = howell_form(U @ M, with_kernel=False)
        assert G.rows.tolist() == H.rows.tolist()
        assert G.pivots == H.pivots
        # a redundant extra row spans the same module
        extra = np.mod(M.entries[0].astype(object) + p * M.entries[1].astype(object), p ** k)
        stacked = MatrixZpk(p, k, np.vstack([M.entries.astype(object), extra]))
        assert howell_form(stacked, with_kernel=False).rows.tolist() == H.rows.tolist()
