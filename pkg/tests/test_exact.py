from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from vacua_lab.exact import QMatrix, det, fstr, inertia, inverse, nullspace, rank, solve_left

small = st.integers(min_value=-4, max_value=4)


def matrices(rows, cols):
    return st.lists(st.lists(small, min_size=cols, max_size=cols), min_size=rows, max_size=rows)


def test_fstr_is_lossless():
    assert fstr(Fraction(-3, 4)) == "-3/4"
    assert fstr(Fraction(6, 3)) == "2"
    assert Fraction(fstr(Fraction(22, 7))) == Fraction(22, 7)


@given(matrices(3, 5))
def test_nullspace_vectors_are_annihilated_and_rank_nullity(rows):
    m = QMatrix.from_dense(rows)
    ns = nullspace(m)
    for v in ns:
        assert not m.apply(v)
    assert rank(m) + len(ns) == 5


@given(matrices(4, 4))
def test_inverse_round_trip(rows):
    m = QMatrix.from_dense(rows)
    if det(rows) == 0:
        with pytest.raises(Exception):
            inverse(m)
        return
    assert m @ inverse(m) == QMatrix.identity(4)


@given(matrices(3, 4), st.lists(small, min_size=3, max_size=3))
def test_solve_left_recovers_a_combination(rows, coeffs):
    basis = [{j: Fraction(x) for j, x in enumerate(r) if x} for r in rows]
    target = {}
    for c, r in zip(coeffs, basis):
        for j, x in r.items():
            target[j] = target.get(j, 0) + c * x
    target = {j: x for j, x in target.items() if x}
    sol = solve_left(basis, target)
    rebuilt = {}
    for c, r in zip(sol, basis):
        for j, x in r.items():
            rebuilt[j] = rebuilt.get(j, 0) + c * x
    assert {j: x for j, x in rebuilt.items() if x} == target


def test_inertia_of_a_hyperbolic_plane():
    assert inertia([[0, 1], [1, 0]]) == (1, 1, 0)
    assert inertia([[2, 0, 0], [0, 0, 0], [0, 0, -1]]) == (1, 1, 1)


@given(matrices(3, 3))
def test_inertia_counts_add_up_and_match_rank(rows):
    sym = [[rows[i][j] + rows[j][i] for j in range(3)] for i in range(3)]
    p, n, z = inertia(sym)
    assert p + n + z == 3
    assert p + n == rank(QMatrix.from_dense(sym))


def test_inertia_rejects_nonsymmetric():
    with pytest.raises(Exception):
        inertia([[0, 1], [0, 0]])
