"""Lagrangian bookkeeping in H_1 of a closed surface and the extended mapping class group.

Coordinates are taken in a symplectic basis (alpha_1..alpha_g, beta_1..beta_g)
with (alpha_i, beta_j) = delta_ij.  Homology classes are integer row vectors;
a Lagrangian is given by g spanning rows.  A homology map M acts on rows as
v -> v M, so it is symplectic when M J M^T = J.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import List, Optional, Sequence, Tuple

from .exact import ZERO, QMatrix, det, inertia, nullspace, rank, rref_rows, solve_left

Matrix = List[List[int]]


class SymplecticError(ValueError):
    pass


def form(g: int) -> Matrix:
    """J with J[i][g+i] = 1 and J[g+i][i] = -1."""
    n = 2 * g
    j = [[0] * n for _ in range(n)]
    for i in range(g):
        j[i][g + i] = 1
        j[g + i][i] = -1
    return j


def intersection(x: Sequence, y: Sequence) -> Fraction:
    g = len(x) // 2
    return sum((Fraction(x[i]) * y[g + i] - Fraction(x[g + i]) * y[i] for i in range(g)), ZERO)


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> List[List]:
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))] for i in range(len(a))]


def transpose(a: Sequence[Sequence]) -> List[List]:
    return [list(r) for r in zip(*a)]


def identity(n: int) -> Matrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def is_symplectic(m: Sequence[Sequence]) -> bool:
    n = len(m)
    if n % 2 or any(len(r) != n for r in m):
        return False
    j = form(n // 2)
    return matmul(matmul(m, j), transpose(m)) == j


def _qmatrix(rows: Sequence[Sequence]) -> QMatrix:
    return QMatrix.from_dense([[Fraction(x) for x in r] for r in rows]) if rows else QMatrix(0, 0)


@dataclass(frozen=True)
class Lagrangian:
    rows: Tuple[Tuple[int, ...], ...]
    genus: int

    @classmethod
    def of(cls, rows: Sequence[Sequence[int]], genus: Optional[int] = None) -> "Lagrangian":
        rows = tuple(tuple(int(x) for x in r) for r in rows)
        g = genus if genus is not None else (len(rows[0]) // 2 if rows else 0)
        lag = cls(rows, g)
        lag.validate()
        return lag

    @classmethod
    def standard(cls, g: int) -> "Lagrangian":
        """The span of beta_1..beta_g."""
        return cls.of([[0] * g + [int(i == j) for j in range(g)] for i in range(g)], g)

    @classmethod
    def alpha(cls, g: int) -> "Lagrangian":
        return cls.of([[int(i == j) for j in range(g)] + [0] * g for i in range(g)], g)

    def validate(self) -> None:
        g = self.genus
        if len(self.rows) != g or any(len(r) != 2 * g for r in self.rows):
            raise SymplecticError("a Lagrangian in genus %d needs %d rows of length %d" % (g, g, 2 * g))
        if g and rank(_qmatrix(self.rows)) != g:
            raise SymplecticError("rows are not independent")
        for x, y in combinations(self.rows, 2):
            if intersection(x, y):
                raise SymplecticError("rows are not isotropic")
        if g and not self.primitive():
            raise SymplecticError("sublattice is not primitive")

    def primitive(self) -> bool:
        """gcd of the maximal minors is 1."""
        g = self.genus
        acc = 0
        for cols in combinations(range(2 * g), g):
            m = det([[self.rows[i][c] for c in cols] for i in range(g)])
            acc = gcd(acc, int(m))
            if acc == 1:
                return True
        return acc == 1

    def push(self, m: Sequence[Sequence[int]]) -> "Lagrangian":
        """f_* L for the homology map m (rows v -> v m)."""
        return Lagrangian.of(matmul(self.rows, m), self.genus) if self.genus else self

    def same_span(self, other: "Lagrangian") -> bool:
        return rank(_qmatrix(list(self.rows) + list(other.rows))) == self.genus

    def contains(self, v: Sequence[int]) -> bool:
        return rank(_qmatrix(list(self.rows) + [list(v)])) == self.genus


def _span_basis(rows: Sequence[Sequence]) -> List[dict]:
    _, red = rref_rows([{j: Fraction(x) for j, x in enumerate(r) if x} for r in rows])
    return red


def _dense(v: dict, n: int) -> List[Fraction]:
    return [v.get(j, ZERO) for j in range(n)]


def wall_form(l1: Lagrangian, l2: Lagrangian, l3: Lagrangian) -> List[List[Fraction]]:
    """Gram matrix of q(x, y) = (x_2, y) on W = (L1 + L2) cap L3, where x = x_1 + x_2, x_i in L_i."""
    g = l1.genus
    if not (l1.genus == l2.genus == l3.genus):
        raise SymplecticError("Lagrangians live in different genera")
    n = 2 * g
    if g == 0:
        return []
    s = _span_basis(list(l1.rows) + list(l2.rows))
    k = len(s)
    # relations a.S + b.L3 = 0 give the intersection as b.L3
    stack = QMatrix(k + g, n)
    for i, r in enumerate(s):
        stack.rows[i] = dict(r)
    for i, r in enumerate(l3.rows):
        stack.rows[k + i] = {j: Fraction(x) for j, x in enumerate(r) if x}
    rel = nullspace(stack.T)
    ws = []
    for v in rel:
        w = [sum((v.get(k + i, ZERO) * l3.rows[i][j] for i in range(g)), ZERO) for j in range(n)]
        if any(w):
            ws.append(w)
    wb = [_dense(r, n) for r in _span_basis(ws)] if ws else []
    gens = [{j: Fraction(x) for j, x in enumerate(r) if x} for r in list(l1.rows) + list(l2.rows)]
    x2s = []
    for w in wb:
        c = solve_left(gens, {j: x for j, x in enumerate(w) if x})
        x2 = [sum((c[g + i] * l2.rows[i][j] for i in range(g)), ZERO) for j in range(n)]
        x2s.append(x2)
    q = [[intersection(x2s[a], wb[b]) for b in range(len(wb))] for a in range(len(wb))]
    for a in range(len(q)):
        for b in range(a):
            if q[a][b] != q[b][a]:
                raise AssertionError("Wall form is not symmetric")
    return q


def wall_sigma(l1: Lagrangian, l2: Lagrangian, l3: Lagrangian) -> int:
    q = wall_form(l1, l2, l3)
    if not q:
        return 0
    pos, neg, _ = inertia(q)
    return pos - neg


# -- extended morphisms ------------------------------------------------------------------


@dataclass(frozen=True)
class ExtendedMorphism:
    matrix: Tuple[Tuple[int, ...], ...]
    s: int = 0

    @classmethod
    def of(cls, m: Sequence[Sequence[int]], s: int = 0) -> "ExtendedMorphism":
        if not is_symplectic(m):
            raise SymplecticError("homology action is not symplectic")
        return cls(tuple(tuple(int(x) for x in r) for r in m), int(s))

    @classmethod
    def central(cls, g: int, s: int = 1) -> "ExtendedMorphism":
        return cls.of(identity(2 * g), s)

    @property
    def genus(self) -> int:
        return len(self.matrix) // 2

    def to_json(self) -> dict:
        return {"matrix": [list(r) for r in self.matrix], "s": self.s}


def compose(first: ExtendedMorphism, second: ExtendedMorphism,
            l1: Lagrangian, l2: Lagrangian, l3: Lagrangian) -> ExtendedMorphism:
    """second o first for first: (S1, L1) -> (S2, L2) and second: (S2, L2) -> (S3, L3).

    (f2, s2)(f1, s1) = (f2 f1, s2 + s1 - sigma((f2 f1)_* L1, f2_* L2, L3)).
    With rows acting as v -> v M, the product f2 f1 is the matrix M1 M2.
    """
    if first.genus != second.genus or not (l1.genus == l2.genus == l3.genus == first.genus):
        raise SymplecticError("dimension mismatch")
    m = matmul(first.matrix, second.matrix)
    sig = wall_sigma(l1.push(m), l2.push(second.matrix), l3)
    return ExtendedMorphism.of(m, second.s + first.s - sig)


# -- random symplectic data ----------------------------------------------------------------


def random_symplectic(g: int, rng: random.Random, steps: int = 6, size: int = 2) -> Matrix:
    """A product of random elementary symplectic generators (shears and unimodular blocks)."""
    m = identity(2 * g)
    for _ in range(steps):
        kind = rng.randrange(3)
        e = identity(2 * g)
        if kind < 2:
            sym = [[0] * g for _ in range(g)]
            for i in range(g):
                for j in range(i, g):
                    sym[i][j] = sym[j][i] = rng.randint(-size, size)
            for i in range(g):
                for j in range(g):
                    if kind == 0:
                        e[i][g + j] = sym[i][j]
                    else:
                        e[g + i][j] = sym[i][j]
        else:
            a = identity(g)
            if g > 1:
                i, j = rng.sample(range(g), 2)
                a[i][j] = rng.randint(-size, size)
            else:
                a[0][0] = rng.choice((1, -1))
            ainv_t = transpose(_int_inverse(a))
            for i in range(g):
                for j in range(g):
                    e[i][j] = a[i][j]
                    e[g + i][g + j] = ainv_t[i][j]
        m = matmul(m, e)
    assert is_symplectic(m)
    return m


def _int_inverse(a: Matrix) -> Matrix:
    from .exact import inverse

    inv = inverse(_qmatrix(a)).to_dense()
    out = [[int(x) for x in r] for r in inv]
    if any(Fraction(x) != y for r, s in zip(out, inv) for x, y in zip(r, s)):
        raise SymplecticError("matrix is not unimodular")
    return out


def random_lagrangian(g: int, rng: random.Random) -> Lagrangian:
    return Lagrangian.standard(g).push(random_symplectic(g, rng))


# -- symplectic bases ----------------------------------------------------------------------


def transform_basis(lam: Sequence[Sequence[int]], basis: Optional[Sequence[Sequence[int]]] = None) -> Matrix:
    """The new basis Lambda (alpha, beta): rows of Lambda times the old basis rows."""
    if not is_symplectic(lam):
        raise SymplecticError("Lambda is not symplectic")
    basis = identity(len(lam)) if basis is None else basis
    return matmul(lam, basis)


def intersection_matrix(basis: Sequence[Sequence[int]]) -> List[List[Fraction]]:
    return [[intersection(x, y) for y in basis] for x in basis]


def det_u_factor(lam: Sequence[Sequence[int]], basis: Optional[Sequence[Sequence[int]]] = None) -> int:
    """det U where the new betas are U times the old ones; requires the beta span to be preserved."""
    if not is_symplectic(lam):
        raise SymplecticError("Lambda is not symplectic")
    g = len(lam) // 2
    if any(lam[g + i][j] for i in range(g) for j in range(g)):
        raise SymplecticError("Lambda does not preserve the span of the betas")
    u = [[lam[g + i][g + j] for j in range(g)] for i in range(g)]
    d = det(u)
    if d not in (1, -1):
        raise SymplecticError("U is not unimodular")
    return int(d)


# -- glueing ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class HandleModel:
    """Closed-surface homology of one component: its genus and a Lagrangian."""

    genus: int
    lagrangian: Lagrangian


def _embed(rows, g_old, offset, g_new):
    """Place a genus-g_old vector into genus g_new with the alphas/betas starting at ``offset``."""
    out = []
    for r in rows:
        v = [0] * (2 * g_new)
        for i in range(g_old):
            v[offset + i] = r[i]
            v[g_new + offset + i] = r[g_old + i]
        out.append(v)
    return out


def lagrangian_of_glueing(first: HandleModel, second: Optional[HandleModel] = None) -> Tuple[HandleModel, Optional[List[int]]]:
    """Lagrangian after glueing, and the vanishing cycle class (None when it is null-homologous).

    Self-glueing adds a handle whose new beta is the circle around the glued
    point, so L_c = L + <beta_new>.  Glueing two components adds no homology
    and L_c = L_1 + L_2.
    """
    if second is None:
        g = first.genus + 1
        rows = _embed(first.lagrangian.rows, first.genus, 0, g)
        vanishing = [0] * (2 * g)
        vanishing[2 * g - 1] = 1
        return HandleModel(g, Lagrangian.of(rows + [vanishing], g)), vanishing
    g = first.genus + second.genus
    rows = _embed(first.lagrangian.rows, first.genus, 0, g) + _embed(second.lagrangian.rows, second.genus,
                                                                      first.genus, g)
    return HandleModel(g, Lagrangian.of(rows, g)), None


def sphere_model() -> HandleModel:
    return HandleModel(0, Lagrangian((), 0))
