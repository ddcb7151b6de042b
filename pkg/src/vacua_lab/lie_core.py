"""Simple Lie algebra data for the A series, its irreducible modules and invariant pairings.

Elements of sl(n+1) are realised as traceless matrices.  The basis is ordered
as: positive root vectors E_ij (i<j, lexicographic), Cartan elements
H_i = E_ii - E_{i+1,i+1}, negative root vectors E_ji (i<j, lexicographic).
The invariant form is (x, y) = tr(xy), which gives the highest root length 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Dict, List, Sequence, Tuple

from .exact import ONE, ZERO, DegenerateError, QMatrix, inverse, nullspace, rref_rows

Weight = Tuple[int, ...]


class UnsupportedAlgebra(ValueError):
    pass


def _mat_mul(a, b):
    n = len(a)
    return [[sum((a[i][k] * b[k][j] for k in range(n)), ZERO) for j in range(n)] for i in range(n)]


def _elementary(n: int, i: int, j: int):
    m = [[ZERO] * n for _ in range(n)]
    m[i][j] = ONE
    return m


@dataclass(frozen=True)
class LieAlgebraData:
    series: str
    rank: int
    names: Tuple[str, ...]
    matrices: Tuple[Tuple[Tuple[Fraction, ...], ...], ...]  # defining-rep matrices of the basis
    cartan_matrix: Tuple[Tuple[int, ...], ...]
    positive_roots: Tuple[Tuple[int, ...], ...]  # simple-root coordinates
    structure: Dict[Tuple[int, int], Dict[int, Fraction]] = field(repr=False, compare=False)
    gram: Tuple[Tuple[Fraction, ...], ...] = field(repr=False, compare=False)
    dual_gram: Tuple[Tuple[Fraction, ...], ...] = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def dual_coxeter(self) -> int:
        return self.rank + 1

    @property
    def highest_root(self) -> Tuple[int, ...]:
        return self.positive_roots[-1] if self.rank else ()

    @property
    def theta_index(self) -> int:
        """Basis index of the highest root vector X_theta = E_{1,n+1}."""
        return self.names.index("E_0_%d" % self.rank)

    @property
    def cartan_indices(self) -> List[int]:
        return [self.names.index("H_%d" % i) for i in range(self.rank)]

    def bracket(self, a: int, b: int) -> Dict[int, Fraction]:
        return self.structure.get((a, b), {})

    def form(self, a: int, b: int) -> Fraction:
        return self.gram[a][b]

    def coords(self, m) -> Dict[int, Fraction]:
        """Coordinates of a traceless (n+1)x(n+1) matrix in the basis."""
        return _coords(self.rank, self.names, m)

    def quadratic_form(self) -> List[List[Fraction]]:
        """Matrix of (omega_i, omega_j): the inverse Cartan matrix (simply laced, roots of length 2)."""
        return inverse(QMatrix.from_dense(self.cartan_matrix)).to_dense()

    def weight_form(self, lam: Sequence[int], mu: Sequence[int]) -> Fraction:
        f = _inv_cartan(self.rank)
        return sum((f[i][j] * lam[i] * mu[j] for i in range(self.rank) for j in range(self.rank)), ZERO)

    def theta_weight(self) -> Weight:
        """Highest root in fundamental-weight coordinates."""
        th = self.highest_root
        return tuple(sum(self.cartan_matrix[j][i] * th[j] for j in range(self.rank)) for i in range(self.rank))

    def rho(self) -> Weight:
        return (1,) * self.rank

    def to_json(self) -> dict:
        from .exact import fstr

        return {
            "algebra": "%s%d" % (self.series, self.rank),
            "dim": self.dim,
            "dual_coxeter": self.dual_coxeter,
            "basis": list(self.names),
            "cartan_matrix": [list(r) for r in self.cartan_matrix],
            "highest_root": list(self.highest_root),
            "gram": [[fstr(x) for x in r] for r in self.gram],
        }


@lru_cache(maxsize=None)
def _inv_cartan(rank: int):
    c = [[2 if i == j else (-1 if abs(i - j) == 1 else 0) for j in range(rank)] for i in range(rank)]
    return inverse(QMatrix.from_dense(c)).to_dense()


def _coords(rank: int, names, m) -> Dict[int, Fraction]:
    n = rank + 1
    out: Dict[int, Fraction] = {}
    idx = {nm: k for k, nm in enumerate(names)}
    for i in range(n):
        for j in range(n):
            if i != j and m[i][j]:
                out[idx["E_%d_%d" % (i, j)]] = Fraction(m[i][j])
    # diagonal d = sum_i c_i H_i  ->  c_i = d_0 + ... + d_i
    run = ZERO
    for i in range(rank):
        run += m[i][i]
        if run:
            out[idx["H_%d" % i]] = run
    return out


@lru_cache(maxsize=None)
def build_lie_data(series: str, rank: int) -> LieAlgebraData:
    if series.upper() != "A" or rank < 1:
        raise UnsupportedAlgebra("unsupported algebra %s%s" % (series, rank))
    n = rank + 1
    pos = [(i, j) for i in range(n) for j in range(i + 1, n)]
    names: List[str] = ["E_%d_%d" % p for p in pos]
    mats = [_elementary(n, i, j) for i, j in pos]
    for i in range(rank):
        h = [[ZERO] * n for _ in range(n)]
        h[i][i] = ONE
        h[i + 1][i + 1] = -ONE
        names.append("H_%d" % i)
        mats.append(h)
    for i, j in pos:
        names.append("E_%d_%d" % (j, i))
        mats.append(_elementary(n, j, i))

    structure: Dict[Tuple[int, int], Dict[int, Fraction]] = {}
    for a, b in product(range(len(mats)), repeat=2):
        ab = _mat_mul(mats[a], mats[b])
        ba = _mat_mul(mats[b], mats[a])
        c = [[ab[i][j] - ba[i][j] for j in range(n)] for i in range(n)]
        co = _coords(rank, names, c)
        if co:
            structure[(a, b)] = co
    gram = tuple(
        tuple(sum((_mat_mul(mats[a], mats[b])[i][i] for i in range(n)), ZERO) for b in range(len(mats)))
        for a in range(len(mats))
    )
    dual = inverse(QMatrix.from_dense(gram)).to_dense()
    cartan = tuple(tuple(2 if i == j else (-1 if abs(i - j) == 1 else 0) for j in range(rank)) for i in range(rank))
    # positive root e_i - e_j in simple-root coordinates, ordered by height then lexicographically
    roots = sorted(
        (tuple(1 if i <= k < j else 0 for k in range(rank)) for i, j in pos),
        key=lambda r: (sum(r), tuple(-x for x in r)),
    )
    return LieAlgebraData(
        series="A",
        rank=rank,
        names=tuple(names),
        matrices=tuple(tuple(tuple(r) for r in m) for m in mats),
        cartan_matrix=cartan,
        positive_roots=tuple(roots),
        structure=structure,
        gram=gram,
        dual_gram=tuple(tuple(r) for r in dual),
    )


def parse_algebra(text: str) -> LieAlgebraData:
    """'A1', 'A2', ... -> algebra data."""
    t = text.strip().upper()
    if len(t) < 2 or not t[1:].isdigit():
        raise UnsupportedAlgebra("unsupported algebra %r" % text)
    return build_lie_data(t[0], int(t[1:]))


# -- labels -----------------------------------------------------------------


def theta_pairing(lie: LieAlgebraData, lam: Sequence[int]) -> int:
    """(theta, lambda) for a weight in fundamental coordinates."""
    return int(lie.weight_form(lie.theta_weight(), lam))


def label_set(lie: LieAlgebraData, level: int) -> List[Weight]:
    if level < 1:
        raise ValueError("level must be positive")
    out = []
    for lam in product(range(level + 1), repeat=lie.rank):
        if 0 <= theta_pairing(lie, lam) <= level:
            out.append(tuple(lam))
    return sorted(out)


def check_dominant(lam: Sequence[int]) -> None:
    if any(x < 0 for x in lam):
        raise ValueError("weight %r is not dominant" % (tuple(lam),))


def dagger(lie: LieAlgebraData, lam: Sequence[int]) -> Weight:
    # minus the longest Weyl element acts on A_n weights as the diagram flip
    check_dominant(lam)
    if len(lam) != lie.rank:
        raise ValueError("weight has wrong length")
    return tuple(reversed(tuple(lam)))


def conformal_weight(lie: LieAlgebraData, level: int, lam: Sequence[int]) -> Fraction:
    num = lie.weight_form(lam, lam) + 2 * lie.weight_form(lam, lie.rho())
    return num / (2 * (lie.dual_coxeter + level))


def weyl_dimension(lie: LieAlgebraData, lam: Sequence[int]) -> int:
    """Dimension of V_lambda from the Weyl product formula (used as a cross-check)."""
    num = ONE
    rho = lie.rho()
    lr = [l + r for l, r in zip(lam, rho)]
    for root in lie.positive_roots:
        # (mu, alpha) for a positive root equals the sum of the fundamental coordinates it covers
        num *= Fraction(sum(x * c for x, c in zip(lr, root)), sum(root))
    return int(num)


# -- irreducible modules ----------------------------------------------------


def _wedge_act(i: int, j: int, s: Tuple[int, ...]):
    """E_ij applied to e_s (a sorted wedge); returns (sign, new tuple) or None."""
    if j not in s:
        return None
    if i == j:
        return 1, s
    if i in s:
        return None
    lo, hi = min(i, j), max(i, j)
    between = sum(1 for x in s if lo < x < hi)
    new = tuple(sorted((i if x == j else x) for x in s))
    return (-1) ** between, new


@dataclass(frozen=True)
class FiniteModule:
    """Irreducible module V_lambda with one action matrix per basis element of the algebra.

    Basis vector 0 is the highest-weight vector; ``weights[k]`` is the weight of
    basis vector k in fundamental coordinates.
    """

    lie: LieAlgebraData
    highest: Weight
    matrices: Tuple[QMatrix, ...]
    weights: Tuple[Weight, ...]

    @property
    def dim(self) -> int:
        return len(self.weights)

    highest_index = 0

    def lowest_index(self) -> int:
        low = tuple(-x for x in dagger(self.lie, self.highest))
        return self.weights.index(low)

    def act(self, a: int, vec: Dict[int, Fraction]) -> Dict[int, Fraction]:
        return self.matrices[a].apply(vec)


@lru_cache(maxsize=None)
def irrep(lie: LieAlgebraData, lam: Weight) -> FiniteModule:
    lam = tuple(lam)
    check_dominant(lam)
    if len(lam) != lie.rank:
        raise ValueError("weight has wrong length")
    n = lie.rank + 1
    # tensor factors: lam[k-1] copies of the k-th exterior power
    factors = [k for k in range(1, n) for _ in range(lam[k - 1])]
    top = tuple(tuple(range(k)) for k in factors)

    def apply_matrix(m, vec):
        out: Dict[tuple, Fraction] = {}
        nz = [(i, j, m[i][j]) for i in range(n) for j in range(n) if m[i][j]]
        for key, c in vec.items():
            for pos, s in enumerate(key):
                for i, j, x in nz:
                    r = _wedge_act(i, j, s)
                    if r is None:
                        continue
                    sign, t = r
                    nk = key[:pos] + (t,) + key[pos + 1:]
                    out[nk] = out.get(nk, ZERO) + sign * x * c
        return {k: v for k, v in out.items() if v}

    lowering = [lie.names.index("E_%d_%d" % (i + 1, i)) for i in range(lie.rank)]
    cart = lie.cartan_matrix

    # weight spaces, generated breadth-first from the top by simple lowering operators
    spaces: Dict[Weight, List[Dict[tuple, Fraction]]] = {lam: [{top: ONE}]}
    pivot_keys: Dict[Weight, List[tuple]] = {lam: [top]}
    order: List[Weight] = [lam]
    frontier = [lam]
    while frontier:
        cand: Dict[Weight, List[Dict[tuple, Fraction]]] = {}
        for w in frontier:
            for i, a in enumerate(lowering):
                nw = tuple(w[k] - cart[i][k] for k in range(lie.rank))
                for v in spaces[w]:
                    img = apply_matrix(lie.matrices[a], v)
                    if img:
                        cand.setdefault(nw, []).append(img)
        frontier = []
        for nw in sorted(cand, reverse=True):
            keys = sorted({k for v in cand[nw] for k in v})
            kidx = {k: t for t, k in enumerate(keys)}
            piv, red = rref_rows([{kidx[k]: c for k, c in v.items()} for v in cand[nw]])
            spaces[nw] = [{keys[j]: c for j, c in r.items()} for r in red]
            pivot_keys[nw] = [keys[j] for j in piv]
            order.append(nw)
            frontier.append(nw)

    basis: List[Dict[tuple, Fraction]] = []
    weights: List[Weight] = []
    pivots: Dict[int, tuple] = {}
    for w in order:
        for v, key in zip(spaces[w], pivot_keys[w]):
            pivots[len(basis)] = key
            basis.append(v)
            weights.append(w)
    mats = []
    for m in lie.matrices:
        q = QMatrix(len(basis), len(basis))
        for k, v in enumerate(basis):
            img = apply_matrix(m, v)
            for t, key in pivots.items():
                c = img.get(key)
                if c:
                    q.add_entry(t, k, c)
        mats.append(q)
    return FiniteModule(lie=lie, highest=lam, matrices=tuple(mats), weights=tuple(weights))


def casimir(mod: FiniteModule) -> QMatrix:
    """sum_ab G^{ab} X_a X_b on the module (G the Gram matrix of the form)."""
    lie = mod.lie
    out = QMatrix(mod.dim, mod.dim)
    for a in range(lie.dim):
        for b in range(lie.dim):
            g = lie.dual_gram[a][b]
            if g:
                out = out + (mod.matrices[a] @ mod.matrices[b]).scale(g)
    return out


# -- invariant pairing ------------------------------------------------------


@dataclass(frozen=True)
class InvariantPairing:
    """Invariant bilinear form on V_lambda x V_lambda-dagger and the invariant vector.

    ``vector`` is |0_{lambda,lambda-dagger}> as {(i, j): coeff}; it has coefficient 1 on
    (highest, lowest), and ``matrix`` is scaled to evaluate to 1 on it.
    """

    left: FiniteModule
    right: FiniteModule
    matrix: QMatrix
    vector: Dict[Tuple[int, int], Fraction]

    def value(self, u: Dict[int, Fraction], v: Dict[int, Fraction]) -> Fraction:
        s = ZERO
        for i, a in u.items():
            r = self.matrix.rows.get(i)
            if not r:
                continue
            for j, b in v.items():
                c = r.get(j)
                if c:
                    s += a * c * b
        return s


def _invariant_solutions(m1: FiniteModule, m2: FiniteModule, transpose_left: bool):
    """Null space of the invariance system on dim1*dim2 unknowns.

    transpose_left=True solves X^T B + B X' = 0 (bilinear forms),
    otherwise (X (x) 1 + 1 (x) X') T = 0 (invariant tensors).
    """
    d1, d2 = m1.dim, m2.dim
    rows = []
    for a in range(m1.lie.dim):
        x1, x2 = m1.matrices[a], m2.matrices[a]
        eqs: Dict[Tuple[int, int], Dict[int, Fraction]] = {}
        if transpose_left:
            # (X^T B)_{ij} = sum_k X_{ki} B_{kj};  (B X')_{ij} = sum_k B_{ik} X'_{kj}
            for k, r in x1.rows.items():
                for i, c in r.items():
                    for j in range(d2):
                        e = eqs.setdefault((i, j), {})
                        e[k * d2 + j] = e.get(k * d2 + j, ZERO) + c
            for k, r in x2.rows.items():
                for j, c in r.items():
                    for i in range(d1):
                        e = eqs.setdefault((i, j), {})
                        e[i * d2 + k] = e.get(i * d2 + k, ZERO) + c
        else:
            # (X T)_{ij} = sum_k X_{ik} T_{kj}; (T X'^T)_{ij} = sum_k T_{ik} X'_{jk}
            for i, r in x1.rows.items():
                for k, c in r.items():
                    for j in range(d2):
                        e = eqs.setdefault((i, j), {})
                        e[k * d2 + j] = e.get(k * d2 + j, ZERO) + c
            for j, r in x2.rows.items():
                for k, c in r.items():
                    for i in range(d1):
                        e = eqs.setdefault((i, j), {})
                        e[i * d2 + k] = e.get(i * d2 + k, ZERO) + c
        rows.extend(e for e in eqs.values())
    q = QMatrix(len(rows), d1 * d2, {k: r for k, r in enumerate(rows)})
    return nullspace(q)


@lru_cache(maxsize=None)
def invariant_pairing(lie: LieAlgebraData, lam: Weight) -> InvariantPairing:
    lam = tuple(lam)
    m1 = irrep(lie, lam)
    m2 = irrep(lie, dagger(lie, lam))
    d2 = m2.dim
    tens = _invariant_solutions(m1, m2, transpose_left=False)
    forms = _invariant_solutions(m1, m2, transpose_left=True)
    if len(tens) != 1 or len(forms) != 1:
        raise DegenerateError("invariant subspace is not one-dimensional")
    t = tens[0]
    key = 0 * d2 + m2.lowest_index()
    lead = t.get(key)
    if not lead:
        raise DegenerateError("invariant vector misses highest (x) lowest")
    vector = {(k // d2, k % d2): c / lead for k, c in t.items()}
    b = forms[0]
    val = sum((c * b.get(i * d2 + j, ZERO) for (i, j), c in vector.items()), ZERO)
    if not val:
        raise DegenerateError("pairing vanishes on the invariant vector")
    mat = QMatrix(m1.dim, d2)
    for k, c in b.items():
        mat.add_entry(k // d2, k % d2, c / val)
    return InvariantPairing(left=m1, right=m2, matrix=mat, vector=vector)
