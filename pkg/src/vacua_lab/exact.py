"""Sparse exact rational matrices and the elimination routines built on them."""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

Row = Dict[int, Fraction]

ZERO = Fraction(0)
ONE = Fraction(1)


class DegenerateError(ArithmeticError):
    """Raised when a matrix that must be invertible is singular."""


def frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def fstr(x: Fraction) -> str:
    """Lossless "p/q" text form (integers without denominator)."""
    x = frac(x)
    if x.denominator == 1:
        return str(x.numerator)
    return "%d/%d" % (x.numerator, x.denominator)


class QMatrix:
    """Sparse matrix over the rationals, stored as a dict of nonzero rows."""

    __slots__ = ("nrows", "ncols", "rows")

    def __init__(self, nrows: int, ncols: int, rows: Mapping[int, Mapping[int, Fraction]] | None = None):
        self.nrows = nrows
        self.ncols = ncols
        self.rows: Dict[int, Row] = {}
        if rows:
            for i, r in rows.items():
                clean = {j: frac(v) for j, v in r.items() if v}
                if clean:
                    self.rows[i] = clean

    # -- construction -------------------------------------------------
    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "QMatrix":
        return cls(nrows, ncols)

    @classmethod
    def identity(cls, n: int, scale=1) -> "QMatrix":
        s = frac(scale)
        m = cls(n, n)
        if s:
            m.rows = {i: {i: s} for i in range(n)}
        return m

    @classmethod
    def from_dense(cls, data: Sequence[Sequence]) -> "QMatrix":
        nrows = len(data)
        ncols = len(data[0]) if nrows else 0
        return cls(nrows, ncols, {i: {j: v for j, v in enumerate(r) if v} for i, r in enumerate(data)})

    @classmethod
    def from_triples(cls, nrows: int, ncols: int, triples: Iterable[Tuple[int, int, object]]) -> "QMatrix":
        m = cls(nrows, ncols)
        for i, j, v in triples:
            m.add_entry(i, j, frac(v))
        return m

    def add_entry(self, i: int, j: int, v: Fraction) -> None:
        if not v:
            return
        r = self.rows.setdefault(i, {})
        w = r.get(j, ZERO) + v
        if w:
            r[j] = w
        else:
            del r[j]
            if not r:
                del self.rows[i]

    def copy(self) -> "QMatrix":
        m = QMatrix(self.nrows, self.ncols)
        m.rows = {i: dict(r) for i, r in self.rows.items()}
        return m

    # -- access -------------------------------------------------------
    def __getitem__(self, ij: Tuple[int, int]) -> Fraction:
        i, j = ij
        return self.rows.get(i, {}).get(j, ZERO)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nrows, self.ncols)

    def nnz(self) -> int:
        return sum(len(r) for r in self.rows.values())

    def is_zero(self) -> bool:
        return not self.rows

    def to_dense(self) -> List[List[Fraction]]:
        out = [[ZERO] * self.ncols for _ in range(self.nrows)]
        for i, r in self.rows.items():
            for j, v in r.items():
                out[i][j] = v
        return out

    def triples(self) -> List[Tuple[int, int, Fraction]]:
        return [(i, j, v) for i in sorted(self.rows) for j, v in sorted(self.rows[i].items())]

    def column(self, j: int) -> Row:
        return {i: r[j] for i, r in self.rows.items() if j in r}

    def columns(self) -> Dict[int, Row]:
        cols: Dict[int, Row] = {}
        for i, r in self.rows.items():
            for j, v in r.items():
                cols.setdefault(j, {})[i] = v
        return cols

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "QMatrix":
        cpos = {c: k for k, c in enumerate(cols)}
        out = QMatrix(len(rows), len(cols))
        for k, i in enumerate(rows):
            r = self.rows.get(i)
            if not r:
                continue
            nr = {cpos[j]: v for j, v in r.items() if j in cpos}
            if nr:
                out.rows[k] = nr
        return out

    # -- arithmetic ---------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, QMatrix):
            return NotImplemented
        return self.shape == other.shape and self.rows == other.rows

    def __add__(self, other: "QMatrix") -> "QMatrix":
        assert self.shape == other.shape, (self.shape, other.shape)
        out = self.copy()
        for i, r in other.rows.items():
            for j, v in r.items():
                out.add_entry(i, j, v)
        return out

    def __neg__(self) -> "QMatrix":
        out = QMatrix(self.nrows, self.ncols)
        out.rows = {i: {j: -v for j, v in r.items()} for i, r in self.rows.items()}
        return out

    def __sub__(self, other: "QMatrix") -> "QMatrix":
        return self + (-other)

    def scale(self, s) -> "QMatrix":
        s = frac(s)
        if not s:
            return QMatrix(self.nrows, self.ncols)
        out = QMatrix(self.nrows, self.ncols)
        out.rows = {i: {j: s * v for j, v in r.items()} for i, r in self.rows.items()}
        return out

    __rmul__ = scale

    def __matmul__(self, other: "QMatrix") -> "QMatrix":
        assert self.ncols == other.nrows, (self.shape, other.shape)
        out = QMatrix(self.nrows, other.ncols)
        orows = other.rows
        for i, r in self.rows.items():
            acc: Row = {}
            for k, v in r.items():
                ok = orows.get(k)
                if not ok:
                    continue
                for j, w in ok.items():
                    acc[j] = acc.get(j, ZERO) + v * w
            acc = {j: v for j, v in acc.items() if v}
            if acc:
                out.rows[i] = acc
        return out

    def apply(self, vec: Mapping[int, Fraction]) -> Row:
        """Matrix times a sparse column vector."""
        out: Row = {}
        for i, r in self.rows.items():
            s = ZERO
            for j, v in r.items():
                w = vec.get(j)
                if w:
                    s += v * w
            if s:
                out[i] = s
        return out

    def rapply(self, covec: Mapping[int, Fraction]) -> Row:
        """Sparse row vector times the matrix."""
        out: Row = {}
        for i, w in covec.items():
            r = self.rows.get(i)
            if not r or not w:
                continue
            for j, v in r.items():
                out[j] = out.get(j, ZERO) + w * v
        return {j: v for j, v in out.items() if v}

    @property
    def T(self) -> "QMatrix":
        out = QMatrix(self.ncols, self.nrows)
        for i, r in self.rows.items():
            for j, v in r.items():
                out.rows.setdefault(j, {})[i] = v
        return out

    def commutator(self, other: "QMatrix") -> "QMatrix":
        return self @ other - other @ self

    def anticommutator(self, other: "QMatrix") -> "QMatrix":
        return self @ other + other @ self

    def __repr__(self) -> str:
        return "QMatrix(%d x %d, nnz=%d)" % (self.nrows, self.ncols, self.nnz())


# ---------------------------------------------------------------------------
# elimination


def rref_rows(rows: Iterable[Mapping[int, Fraction]], col_order: Sequence[int] | None = None):
    """Reduced row echelon form of a list of sparse rows.

    Returns ``(pivots, reduced)`` where ``reduced[k]`` has a 1 at column
    ``pivots[k]`` and zeros at every other pivot column.  ``col_order`` ranks
    columns for pivot choice (earlier = preferred).
    """
    rank = None
    if col_order is not None:
        rank = {c: k for k, c in enumerate(col_order)}

    def lead(r: Row) -> int:
        if rank is None:
            return min(r)
        return min(r, key=lambda c: rank.get(c, len(rank) + c))

    basis: Dict[int, Row] = {}
    for r0 in rows:
        r = {j: frac(v) for j, v in r0.items() if v}
        # reduce against existing pivots
        for p in [p for p in r if p in basis]:
            c = r.get(p)
            if not c:
                continue
            for j, v in basis[p].items():
                w = r.get(j, ZERO) - c * v
                if w:
                    r[j] = w
                else:
                    r.pop(j, None)
        if not r:
            continue
        # a reduced vector may still touch pivots introduced through fill-in
        while True:
            hit = [p for p in r if p in basis]
            if not hit:
                break
            for p in hit:
                c = r.get(p)
                if not c:
                    continue
                for j, v in basis[p].items():
                    w = r.get(j, ZERO) - c * v
                    if w:
                        r[j] = w
                    else:
                        r.pop(j, None)
        if not r:
            continue
        p = lead(r)
        inv = ONE / r[p]
        r = {j: v * inv for j, v in r.items()}
        # back-substitute into existing rows
        for q, b in basis.items():
            c = b.get(p)
            if c:
                for j, v in r.items():
                    w = b.get(j, ZERO) - c * v
                    if w:
                        b[j] = w
                    else:
                        b.pop(j, None)
        basis[p] = r
    pivots = sorted(basis, key=(lambda c: rank.get(c, len(rank) + c)) if rank else None)
    return pivots, [basis[p] for p in pivots]


def rank(m: QMatrix) -> int:
    return len(rref_rows(m.rows.values())[0])


def nullspace(m: QMatrix) -> List[Row]:
    """Basis of {x : m x = 0}, one sparse vector per free column."""
    pivots, red = rref_rows(m.rows.values())
    pivset = set(pivots)
    out = []
    for f in range(m.ncols):
        if f in pivset:
            continue
        v: Row = {f: ONE}
        for p, r in zip(pivots, red):
            c = r.get(f)
            if c:
                v[p] = -c
        out.append(v)
    return out


def left_nullspace(m: QMatrix) -> List[Row]:
    return nullspace(m.T)


def inverse(m: QMatrix) -> QMatrix:
    """Exact inverse via Gauss-Jordan on the augmented matrix."""
    n = m.nrows
    if m.ncols != n:
        raise ValueError("inverse of non-square matrix")
    aug = []
    for i in range(n):
        r = dict(m.rows.get(i, {}))
        r[n + i] = ONE
        aug.append(r)
    pivots, red = rref_rows(aug, col_order=list(range(2 * n)))
    if len(pivots) < n or pivots[n - 1] >= n:
        raise DegenerateError("matrix is singular")
    out = QMatrix(n, n)
    for p, r in zip(pivots, red):
        out.rows[p] = {j - n: v for j, v in r.items() if j >= n}
    out.rows = {i: r for i, r in out.rows.items() if r}
    return out


def solve_left(basis_rows: Sequence[Mapping[int, Fraction]], target: Mapping[int, Fraction]) -> List[Fraction]:
    """Coefficients c with sum_k c_k basis_rows[k] == target (exact); raises if none."""
    n = len(basis_rows)
    aug = []
    for k, r in enumerate(basis_rows):
        row = {j: frac(v) for j, v in r.items()}
        row[-1 - k] = ONE
        aug.append(row)
    # eliminate the data columns; tag columns record the combination
    data_cols = sorted({j for r in basis_rows for j in r} | set(target))
    pivots, red = rref_rows(aug, col_order=data_cols + [-1 - k for k in range(n)])
    t = {j: frac(v) for j, v in target.items() if v}
    coeffs: Row = {}
    for p, r in zip(pivots, red):
        if p < 0:
            continue
        c = t.get(p)
        if not c:
            continue
        for j, v in r.items():
            if j >= 0:
                w = t.get(j, ZERO) - c * v
                if w:
                    t[j] = w
                else:
                    t.pop(j, None)
            else:
                coeffs[j] = coeffs.get(j, ZERO) + c * v
    if t:
        raise ValueError("target not in span")
    return [coeffs.get(-1 - k, ZERO) for k in range(n)]


def inertia(sym: Sequence[Sequence[Fraction]]) -> Tuple[int, int, int]:
    """(positive, negative, zero) counts of a symmetric rational matrix.

    Symmetric Gaussian elimination (congruence); a 2x2 hyperbolic block is
    split when no nonzero diagonal pivot is available.
    """
    a = [[frac(x) for x in row] for row in sym]
    n = len(a)
    for i in range(n):
        for j in range(n):
            if a[i][j] != a[j][i]:
                raise ValueError("matrix is not symmetric")
    pos = neg = 0
    idx = list(range(n))
    while idx:
        piv = next((i for i in idx if a[i][i]), None)
        if piv is None:
            pair = next(((i, j) for i in idx for j in idx if i < j and a[i][j]), None)
            if pair is None:
                break
            i, j = pair
            # replace row/col i by i + j; the new diagonal is 2 a_ij != 0
            for k in range(n):
                a[i][k] += a[j][k]
            for k in range(n):
                a[k][i] += a[k][j]
            piv = i
        d = a[piv][piv]
        if d > 0:
            pos += 1
        else:
            neg += 1
        idx.remove(piv)
        for i in idx:
            c = a[i][piv] / d
            if c:
                for k in idx:
                    a[i][k] -= c * a[piv][k]
        for i in idx:
            a[i][piv] = a[piv][i] = ZERO
    return pos, neg, n - pos - neg


def signature(sym: Sequence[Sequence[Fraction]]) -> int:
    p, q, _ = inertia(sym)
    return p - q


def det(m: Sequence[Sequence]) -> Fraction:
    a = [[frac(x) for x in row] for row in m]
    n = len(a)
    d = ONE
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c]), None)
        if p is None:
            return ZERO
        if p != c:
            a[c], a[p] = a[p], a[c]
            d = -d
        d *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return d
