from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, strategies as st

from vacua_lab.exact import QMatrix, det
from vacua_lab.lie_core import (
    UnsupportedAlgebra,
    build_lie_data,
    casimir,
    conformal_weight,
    dagger,
    invariant_pairing,
    irrep,
    label_set,
    parse_algebra,
    weyl_dimension,
)
from oracles import sl2_conformal_weight

A1 = build_lie_data("A", 1)
A2 = build_lie_data("A", 2)


def test_sl2_data():
    assert A1.dim == 3
    assert A1.dual_coxeter == 2
    assert A1.highest_root == (1,)  # theta = alpha_1 in simple-root coordinates
    assert A1.theta_weight() == (2,)
    assert A1.weight_form(A1.theta_weight(), A1.theta_weight()) == 2


def test_sl3_data():
    assert A2.dim == 8 and A2.dual_coxeter == 3
    assert A2.weight_form(A2.theta_weight(), A2.theta_weight()) == 2


def test_unsupported_algebra():
    with pytest.raises(UnsupportedAlgebra):
        build_lie_data("E", 8)
    with pytest.raises(UnsupportedAlgebra):
        parse_algebra("sl2")


@pytest.mark.parametrize("lie", [A1, A2], ids=["A1", "A2"])
def test_structure_constants_antisymmetric_and_jacobi(lie):
    n = lie.dim

    def br(x, y):
        out = {}
        for a, u in x.items():
            for b, v in y.items():
                for c, w in lie.bracket(a, b).items():
                    out[c] = out.get(c, 0) + u * v * w
        return {k: v for k, v in out.items() if v}

    for a, b in product(range(n), repeat=2):
        ab = lie.bracket(a, b)
        ba = lie.bracket(b, a)
        assert {k: -v for k, v in ba.items()} == {k: v for k, v in ab.items() if v}
    for a, b, c in product(range(n), repeat=3):
        x, y, z = {a: 1}, {b: 1}, {c: 1}
        tot = {}
        for t in (br(x, br(y, z)), br(y, br(z, x)), br(z, br(x, y))):
            for k, v in t.items():
                tot[k] = tot.get(k, 0) + v
        assert not any(tot.values())


def test_label_sets():
    assert label_set(A1, 1) == [(0,), (1,)]
    assert len(label_set(A1, 3)) == 4
    assert (0,) in label_set(A1, 1)
    assert label_set(A2, 1) == [(0, 0), (0, 1), (1, 0)]


def test_dagger():
    assert all(dagger(A1, (n,)) == (n,) for n in range(5))
    assert dagger(A2, (1, 0)) == (0, 1)
    assert dagger(A2, (0, 0)) == (0, 0)
    with pytest.raises(ValueError):
        dagger(A1, (-1,))


@pytest.mark.parametrize("lie,level", [(A1, 3), (A2, 2)], ids=["A1", "A2"])
def test_dagger_is_an_involution_of_the_label_set(lie, level):
    labs = label_set(lie, level)
    assert sorted(dagger(lie, l) for l in labs) == sorted(labs)
    assert all(dagger(lie, dagger(lie, l)) == l for l in labs)
    assert all(conformal_weight(lie, level, l) == conformal_weight(lie, level, dagger(lie, l)) for l in labs)


def test_conformal_weights():
    assert conformal_weight(A1, 1, (1,)) == Fraction(1, 4)
    assert conformal_weight(A1, 2, (1,)) == Fraction(3, 16)
    assert conformal_weight(A1, 2, (2,)) == Fraction(1, 2)
    assert conformal_weight(A2, 1, (0, 0)) == 0


@given(st.integers(1, 6), st.data())
def test_conformal_weight_matches_closed_form(level, data):
    n = data.draw(st.integers(0, level))
    assert conformal_weight(A1, level, (n,)) == sl2_conformal_weight(level, n)


@pytest.mark.parametrize("lie,lam", [(A1, (0,)), (A1, (1,)), (A1, (2,)), (A1, (3,)), (A2, (1, 0)), (A2, (1, 1))])
def test_irrep_represents_the_bracket(lie, lam):
    mod = irrep(lie, lam)
    assert mod.dim == weyl_dimension(lie, lam)
    for a, b in product(range(lie.dim), repeat=2):
        lhs = mod.matrices[a].commutator(mod.matrices[b])
        rhs = QMatrix(mod.dim, mod.dim)
        for c, v in lie.bracket(a, b).items():
            rhs = rhs + mod.matrices[c].scale(v)
        assert lhs == rhs


def test_sl2_irrep_dims_and_trivial_module():
    assert [irrep(A1, (n,)).dim for n in range(5)] == [1, 2, 3, 4, 5]
    assert all(m.is_zero() for m in irrep(A1, (0,)).matrices)


def test_casimir_eigenvalue_on_adjoint():
    c = casimir(irrep(A1, (2,)))
    assert c == QMatrix.identity(3, 4)


@pytest.mark.parametrize("lie,lam", [(A1, (0,)), (A1, (1,)), (A1, (2,)), (A2, (1, 0)), (A2, (1, 1))])
def test_invariant_pairing(lie, lam):
    pr = invariant_pairing(lie, lam)
    left, right = pr.left, pr.right
    dense = pr.matrix.to_dense()
    assert det(dense) != 0
    # (Xu, v) + (u, Xv) = 0 on basis vectors
    for a in range(lie.dim):
        lhs = left.matrices[a].T @ pr.matrix + pr.matrix @ right.matrices[a]
        assert lhs.is_zero()
    # normalized to 1 on the invariant vector
    tot = sum(c * pr.matrix[i, j] for (i, j), c in pr.vector.items())
    assert tot == 1


def test_trivial_pairing_and_spin_half_antisymmetry():
    assert invariant_pairing(A1, (0,)).matrix.to_dense() == [[1]]
    m = invariant_pairing(A1, (1,)).matrix.to_dense()
    assert m[0][0] == m[1][1] == 0 and m[0][1] == -m[1][0] != 0


def test_spin_half_has_one_invariant():
    from vacua_lab.exact import nullspace

    mod = irrep(A1, (1,))
    # g acting on V (x) V, stacked over the basis of g
    rows = QMatrix(3 * 4, 4)
    for a in range(3):
        m = mod.matrices[a]
        for i, j in product(range(2), repeat=2):
            for k in range(2):
                x = m[k, i]
                if x:
                    rows.add_entry(4 * a + 2 * k + j, 2 * i + j, x)
                y = m[k, j]
                if y:
                    rows.add_entry(4 * a + 2 * i + k, 2 * i + j, y)
    assert len(nullspace(rows)) == 1


def test_lie_data_serializes():
    js = A1.to_json()
    assert js["algebra"] == "A1" and js["highest_root"] == [1]
    assert all(isinstance(x, str) for row in js["gram"] for x in row)
