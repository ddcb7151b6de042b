"""Degree-truncated integrable highest-weight modules of the affine algebra.

A vector of the generalized Verma module is a sparse dict over keys
``(monomial, v)`` where ``monomial`` is a sorted tuple of ``(m, a)`` factors
standing for X_a(-m), m >= 1, and ``v`` indexes a basis vector of V_lambda.
Factors are ordered by mode number descending (so X(-1) first) and then by basis
index.  The integrable quotient at each degree is obtained by row reducing
the null submodule generated by the singular vector
|J> = X_theta(-1)^(level - (theta, lambda) + 1) |lambda>.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from .exact import ONE, ZERO, DegenerateError, QMatrix, inverse, rref_rows
from .lie_core import (
    FiniteModule,
    LieAlgebraData,
    Weight,
    conformal_weight,
    dagger,
    invariant_pairing,
    irrep,
    label_set,
    theta_pairing,
)

Key = Tuple[Tuple[Tuple[int, int], ...], int]
Vec = Dict[Key, Fraction]

def max_cutoff() -> int:
    """Largest module cutoff allowed; overridable through VACUA_LAB_MAX_CUTOFF."""
    return int(os.environ.get("VACUA_LAB_MAX_CUTOFF", "8"))


class TruncationError(ValueError):
    """An operation needs degrees outside the retained window."""


def _add_into(out: Vec, vec: Vec, c: Fraction) -> None:
    for k, v in vec.items():
        w = out.get(k, ZERO) + c * v
        if w:
            out[k] = w
        else:
            out.pop(k, None)


def degree_of(mono) -> int:
    return sum(m for m, _ in mono)


class VermaAction:
    """Mode action X_c(n) on the generalized Verma module U(g_-) (x) V_lambda at a fixed level."""

    def __init__(self, fin: FiniteModule, level: int):
        self.fin = fin
        self.lie = fin.lie
        self.level = Fraction(level)
        self._memo: Dict[Tuple[int, int, Key], Vec] = {}

    def act(self, c: int, n: int, key: Key) -> Vec:
        k = (c, n, key)
        hit = self._memo.get(k)
        if hit is None:
            hit = self._act(c, n, key)
            self._memo[k] = hit
        return hit

    def act_vec(self, c: int, n: int, vec: Vec) -> Vec:
        out: Vec = {}
        for key, coef in vec.items():
            _add_into(out, self.act(c, n, key), coef)
        return out

    def _act(self, c: int, n: int, key: Key) -> Vec:
        mono, v = key
        lie = self.lie
        if not mono:
            if n > 0:
                return {}
            if n == 0:
                return {((), i): x for i, x in self.fin.matrices[c].apply({v: ONE}).items()}
            return {(((-n, c),), v): ONE}
        f1 = mono[0]
        rest = (mono[1:], v)
        m1, a1 = f1
        if n < 0 and (-n, c) <= f1:
            return {(((-n, c),) + mono, v): ONE}
        out: Vec = {}
        # X_c(n) f1 rest = f1 X_c(n) rest + [X_c(n), X_a1(-m1)] rest
        inner = self.act(c, n, rest)
        for k2, x in inner.items():
            _add_into(out, self.act(a1, -m1, k2), x)
        for e, s in lie.bracket(c, a1).items():
            _add_into(out, self.act(e, n - m1, rest), s)
        if n == m1:
            cen = self.level * n * lie.form(c, a1)
            if cen:
                _add_into(out, {rest: ONE}, cen)
        return out


@dataclass
class DegreePiece:
    verma_keys: List[Key]
    pivots: Dict[Key, Dict[Key, Fraction]]  # reduced null-space rows keyed by pivot
    basis: List[Key]  # quotient basis: non-pivot Verma keys
    index: Dict[Key, int]


def _pbw_monomials(lie_dim: int, degree: int, max_part: Optional[int] = None):
    """Sorted tuples of (m, a) with sum m = degree."""
    if degree == 0:
        yield ()
        return
    if max_part is None:
        max_part = degree
    # generate by choosing the first (smallest in order) factor, then the rest >= it
    def rec(remaining, lo):
        if remaining == 0:
            yield ()
            return
        for m in range(lo[0], remaining + 1):
            start_a = lo[1] if m == lo[0] else 0
            for a in range(start_a, lie_dim):
                for tail in rec(remaining - m, (m, a)):
                    yield ((m, a),) + tail

    yield from rec(degree, (1, 0))


class GradedModule:
    """H_lambda truncated to degrees 0..cutoff, with lazily assembled mode and Virasoro blocks."""

    def __init__(self, lie: LieAlgebraData, level: int, weight: Sequence[int], cutoff: int,
                 null_mode: str = "nonpositive"):
        weight = tuple(weight)
        if weight not in label_set(lie, level):
            raise ValueError("weight %r is not in the label set at level %d" % (weight, level))
        if cutoff < 0:
            raise ValueError("cutoff must be nonnegative")
        if cutoff > max_cutoff():
            raise ValueError("cutoff %d exceeds the configured limit %d" % (cutoff, max_cutoff()))
        self.lie = lie
        self.level = level
        self.weight = weight
        self.cutoff = cutoff
        self.fin = irrep(lie, weight)
        self.verma = VermaAction(self.fin, level)
        self.null_degree = level - theta_pairing(lie, weight) + 1
        self.delta = conformal_weight(lie, level, weight)
        self.null_mode = null_mode
        self.pieces: List[DegreePiece] = []
        self._null_rows: List[List[Vec]] = []
        self._build()
        self.offsets = []
        off = 0
        for p in self.pieces:
            self.offsets.append(off)
            off += len(p.basis)
        self.total_dim = off
        self._blocks: Dict[Tuple[int, int, int], QMatrix] = {}
        self._vir: Dict[Tuple[int, int], QMatrix] = {}

    # -- construction ----------------------------------------------------
    def singular_vector(self) -> Vec:
        vec: Vec = {((), 0): ONE}
        for _ in range(self.null_degree):
            vec = self.verma.act_vec(self.lie.theta_index, -1, vec)
        return vec

    def _build(self) -> None:
        lie = self.lie
        nd = self.null_degree
        for d in range(self.cutoff + 1):
            keys = [(mono, v) for mono in _pbw_monomials(lie.dim, d) for v in range(self.fin.dim)]
            keys.sort()
            gens: List[Vec] = []
            if d == nd:
                gens = self._closure_under_zero_modes([self.singular_vector()])
            elif d > nd:
                for j in range(1, d - nd + 1):
                    for row in self._null_rows[d - j]:
                        for a in range(lie.dim):
                            img = self.verma.act_vec(a, -j, row)
                            if img:
                                gens.append(img)
                if self.null_mode == "full":
                    gens = self._closure_under_zero_modes(gens)
            col = {k: i for i, k in enumerate(keys)}
            piv, red = rref_rows([{col[k]: x for k, x in g.items()} for g in gens])
            rows = [{keys[j]: x for j, x in r.items()} for r in red]
            pivots = {keys[p]: r for p, r in zip(piv, rows)}
            basis = [k for k in keys if k not in pivots]
            self._null_rows.append(rows)
            self.pieces.append(DegreePiece(keys, pivots, basis, {k: i for i, k in enumerate(basis)}))

    def _closure_under_zero_modes(self, gens: List[Vec]) -> List[Vec]:
        keys: Dict[Key, int] = {}

        def enc(v):
            for k in v:
                if k not in keys:
                    keys[k] = len(keys)
            return {keys[k]: x for k, x in v.items()}

        span = list(gens)
        frontier = list(gens)
        piv, red = rref_rows([enc(v) for v in span])
        r = len(piv)
        while frontier:
            new = []
            for v in frontier:
                for a in range(self.lie.dim):
                    img = self.verma.act_vec(a, 0, v)
                    if img:
                        new.append(img)
            cand = span + new
            piv, red = rref_rows([enc(v) for v in cand])
            if len(piv) == r:
                break
            r = len(piv)
            span = cand
            frontier = new
        inv = {i: k for k, i in keys.items()}
        return [{inv[j]: x for j, x in row.items()} for row in red]

    # -- bookkeeping -------------------------------------------------------
    def dims(self) -> List[int]:
        return [len(p.basis) for p in self.pieces]

    def dim(self, d: int) -> int:
        return len(self.pieces[d].basis)

    def verma_dim(self, d: int) -> int:
        return len(self.pieces[d].verma_keys)

    def reduce(self, d: int, vec: Vec) -> Dict[int, Fraction]:
        """Quotient coordinates (local indices in H(d)) of a Verma vector of degree d."""
        if d < 0:
            return {}
        if d > self.cutoff:
            raise TruncationError("degree %d beyond cutoff %d" % (d, self.cutoff))
        piece = self.pieces[d]
        w = dict(vec)
        for p in [k for k in w if k in piece.pivots]:
            c = w.get(p)
            if c:
                _add_into(w, piece.pivots[p], -c)
        out = {}
        for k, x in w.items():
            i = piece.index.get(k)
            if i is None:
                raise DegenerateError("reduction left a pivot key")
            out[i] = x
        return out

    def is_null(self, d: int, vec: Vec) -> bool:
        return not self.reduce(d, vec)

    def basis_vector(self, d: int, i: int) -> Vec:
        return {self.pieces[d].basis[i]: ONE}

    def lift(self, d: int, coords: Dict[int, Fraction]) -> Vec:
        b = self.pieces[d].basis
        return {b[i]: x for i, x in coords.items() if x}

    # -- mode operators ------------------------------------------------------
    def mode_block(self, a: int, n: int, d: int) -> QMatrix:
        """X_a(n) restricted to H(d) -> H(d - n)."""
        t = d - n
        if d < 0 or d > self.cutoff:
            raise TruncationError("source degree %d outside window" % d)
        if t > self.cutoff:
            raise TruncationError("target degree %d outside window" % t)
        key = (a, n, d)
        blk = self._blocks.get(key)
        if blk is not None:
            return blk
        src = self.pieces[d]
        if t < 0:
            blk = QMatrix(0, len(src.basis))
        else:
            blk = QMatrix(len(self.pieces[t].basis), len(src.basis))
            for j, k in enumerate(src.basis):
                for i, x in self.reduce(t, self.verma.act(a, n, k)).items():
                    blk.add_entry(i, j, x)
        self._blocks[key] = blk
        return blk

    def mode_matrix(self, a: int, n: int) -> QMatrix:
        """X_a(n) on the whole window; blocks whose target leaves the window are dropped."""
        out = QMatrix(self.total_dim, self.total_dim)
        for d in range(self.cutoff + 1):
            t = d - n
            if t < 0 or t > self.cutoff:
                continue
            blk = self.mode_block(a, n, d)
            for i, r in blk.rows.items():
                row = out.rows.setdefault(self.offsets[t] + i, {})
                for j, x in r.items():
                    row[self.offsets[d] + j] = x
        return out

    def split(self, vec: Dict[int, Fraction]) -> Dict[int, Dict[int, Fraction]]:
        by: Dict[int, Dict[int, Fraction]] = {}
        for g, x in vec.items():
            d = self._degree_of_index(g)
            by.setdefault(d, {})[g - self.offsets[d]] = x
        return by

    def _degree_of_index(self, g: int) -> int:
        for d in range(self.cutoff, -1, -1):
            if g >= self.offsets[d]:
                return d
        raise IndexError(g)

    def act_mode(self, a: int, n: int, vec: Dict[int, Fraction]) -> Dict[int, Fraction]:
        """X_a(n) on a window vector given in global indices."""
        out: Dict[int, Fraction] = {}
        for d, loc in self.split(vec).items():
            t = d - n
            if t < 0:
                continue
            if t > self.cutoff:
                raise TruncationError("X(%d) sends degree %d outside the window" % (n, d))
            for i, x in self.mode_block(a, n, d).apply(loc).items():
                g = self.offsets[t] + i
                w = out.get(g, ZERO) + x
                if w:
                    out[g] = w
                else:
                    out.pop(g, None)
        return out

    # -- Sugawara ------------------------------------------------------------
    def virasoro_block(self, n: int, d: int) -> QMatrix:
        """L_n restricted to H(d) -> H(d - n), computed exactly from the normal-ordered sum."""
        t = d - n
        if d < 0 or d > self.cutoff or t > self.cutoff:
            raise TruncationError("L_%d on degree %d leaves the window" % (n, d))
        key = (n, d)
        hit = self._vir.get(key)
        if hit is not None:
            return hit
        lie = self.lie
        if t < 0:
            blk = QMatrix(0, self.dim(d))
            self._vir[key] = blk
            return blk
        acc = QMatrix(self.dim(t), self.dim(d))
        pref = Fraction(1, 2 * (lie.dual_coxeter + self.level))
        pairs = [(a, b, lie.dual_gram[a][b]) for a in range(lie.dim) for b in range(lie.dim) if lie.dual_gram[a][b]]
        # right factor mode k = n - m runs over n/2 < k <= d (k = n/2 counted once)
        for k in range(-(self.cutoff), d + 1):
            m = n - k
            if 2 * k < n:
                continue
            weight = 1 if 2 * k == n else 2
            mid = d - k
            if mid < 0 or mid > self.cutoff:
                continue
            for a, b, g in pairs:
                right = self.mode_block(b, k, d)
                left = self.mode_block(a, m, mid)
                acc = acc + (left @ right).scale(g * weight)
        blk = acc.scale(pref)
        self._vir[key] = blk
        return blk

    def virasoro_matrix(self, n: int) -> QMatrix:
        out = QMatrix(self.total_dim, self.total_dim)
        for d in range(self.cutoff + 1):
            t = d - n
            if t < 0 or t > self.cutoff:
                continue
            blk = self.virasoro_block(n, d)
            for i, r in blk.rows.items():
                row = out.rows.setdefault(self.offsets[t] + i, {})
                for j, x in r.items():
                    row[self.offsets[d] + j] = x
        return out

    def central_charge(self) -> Fraction:
        return Fraction(self.level * self.lie.dim, self.lie.dual_coxeter + self.level)

    def to_json(self) -> dict:
        from .exact import fstr

        return {
            "algebra": "%s%d" % (self.lie.series, self.lie.rank),
            "level": self.level,
            "weight": list(self.weight),
            "cutoff": self.cutoff,
            "conformal_weight": fstr(self.delta),
            "dims": self.dims(),
        }


@lru_cache(maxsize=64)
def build_truncated_module(lie: LieAlgebraData, level: int, weight: Weight, cutoff: int) -> GradedModule:
    return GradedModule(lie, level, tuple(weight), cutoff)


def sugawara(module: GradedModule, n: int) -> QMatrix:
    if abs(n) > module.cutoff:
        raise TruncationError("|n| exceeds the cutoff")
    return module.virasoro_matrix(n)


def act_mode(module: GradedModule, a: int, n: int, vec: Dict[int, Fraction]) -> Dict[int, Fraction]:
    return module.act_mode(a, n, vec)


# -- window algebra -----------------------------------------------------------


def block_compose(module: GradedModule, ops: Sequence[Tuple[str, int, int]], d: int) -> Optional[QMatrix]:
    """Product of mode/Virasoro operators (rightmost first) on source degree d.

    ``ops`` items are ("X", a, n) or ("L", 0, n).  Returns None if an intermediate
    degree leaves the window, and a 0-row matrix once a degree goes negative.
    """
    cur = QMatrix.identity(module.dim(d))
    deg = d
    final = d - sum(n for _, _, n in ops)
    for kind, a, n in reversed(ops):
        t = deg - n
        if t > module.cutoff:
            return None
        if t < 0:
            return QMatrix(module.dim(final) if 0 <= final <= module.cutoff else 0, module.dim(d))
        blk = module.mode_block(a, n, deg) if kind == "X" else module.virasoro_block(n, deg)
        cur = blk @ cur
        deg = t
    return cur


def virasoro_defect(module: GradedModule, m: int, n: int, d: int, c) -> Optional[QMatrix]:
    """[L_m, L_n] - (m-n) L_{m+n} - c/12 (m^3-m) delta on source degree d, or None if out of window."""
    ab = block_compose(module, [("L", 0, m), ("L", 0, n)], d)
    ba = block_compose(module, [("L", 0, n), ("L", 0, m)], d)
    if ab is None or ba is None:
        return None
    t = d - m - n
    if t < 0:
        return QMatrix(0, module.dim(d))
    if t > module.cutoff:
        return None
    out = ab - ba - module.virasoro_block(m + n, d).scale(m - n)
    if m + n == 0:
        out = out - QMatrix.identity(module.dim(d), Fraction(c) * Fraction(m ** 3 - m, 12))
    return out


def measure_central_charge(module: GradedModule) -> Fraction:
    """Read c off <[L_2, L_-2] - 4 L_0> on the lowest degree piece."""
    if module.cutoff < 2:
        raise TruncationError("need cutoff >= 2 to measure the central charge")
    ab = block_compose(module, [("L", 0, 2), ("L", 0, -2)], 0)
    ba = block_compose(module, [("L", 0, -2), ("L", 0, 2)], 0)
    defect = ab - ba - module.virasoro_block(0, 0).scale(4)
    val = defect[0, 0]
    # (c/12)(8 - 2) = c/2
    return val * 2


# -- pairing and dual bases ----------------------------------------------------


class ModulePairing:
    """The invariant pairing H_lambda(d) x H_lambda-dagger(d) -> Q, degree by degree."""

    def __init__(self, left: GradedModule, right: GradedModule):
        if right.weight != dagger(left.lie, left.weight) or left.level != right.level:
            raise ValueError("pairing needs H_lambda and H_lambda-dagger at the same level")
        if left.cutoff != right.cutoff:
            raise ValueError("modules must share a cutoff")
        self.left = left
        self.right = right
        self.finite = invariant_pairing(left.lie, left.weight)
        self._rows: Dict[Key, Dict[int, Fraction]] = {}
        self._blocks: Dict[int, QMatrix] = {}

    def _row(self, key: Key) -> Dict[int, Fraction]:
        """(key | e_j) over the right quotient basis of the same degree."""
        hit = self._rows.get(key)
        if hit is not None:
            return hit
        mono, v = key
        if not mono:
            rb = self.right.pieces[0].basis
            fr = self.finite.matrix.rows.get(v, {})
            out = {j: fr.get(k[1], ZERO) for j, k in enumerate(rb)}
            out = {j: x for j, x in out.items() if x}
        else:
            m1, a1 = mono[0]
            rest = (mono[1:], v)
            d = degree_of(mono)
            # (X(-m) u | w) = -(u | X(m) w)
            blk = self.right.mode_block(a1, m1, d)
            inner = self._row(rest)
            out = {j: -x for j, x in blk.rapply(inner).items()}
        self._rows[key] = out
        return out

    def block(self, d: int) -> QMatrix:
        hit = self._blocks.get(d)
        if hit is not None:
            return hit
        lb = self.left.pieces[d].basis
        m = QMatrix(len(lb), self.right.dim(d))
        for i, k in enumerate(lb):
            r = self._row(k)
            if r:
                m.rows[i] = dict(r)
        self._blocks[d] = m
        return m

    def value(self, d: int, u: Dict[int, Fraction], w: Dict[int, Fraction]) -> Fraction:
        b = self.block(d)
        return sum((x * y for j, x in b.rapply(u).items() for jj, y in [(j, w.get(j, ZERO))] if y), ZERO)

    def vacuum_value(self) -> Fraction:
        """Pairing evaluated on |0_{lambda,lambda-dagger}>."""
        b = self.block(0)
        lb = {k[1]: i for i, k in enumerate(self.left.pieces[0].basis)}
        rb = {k[1]: i for i, k in enumerate(self.right.pieces[0].basis)}
        return sum((c * b[lb[i], rb[j]] for (i, j), c in self.finite.vector.items()), ZERO)


def pairing(left: GradedModule, right: GradedModule) -> ModulePairing:
    return ModulePairing(left, right)


def dual_bases(p: ModulePairing, d: int) -> Tuple[QMatrix, QMatrix]:
    """(basis, dual basis) coordinate matrices: columns are vectors of H_lambda(d), H_lambda-dagger(d).

    The basis is the quotient PBW basis; the dual basis C satisfies B C = I for the
    pairing block B, so (v_k | v^j) = delta.
    """
    b = p.block(d)
    n = b.nrows
    if b.ncols != n:
        raise DegenerateError("pairing block is not square")
    try:
        c = inverse(b)
    except DegenerateError as exc:
        raise DegenerateError("pairing block at degree %d is degenerate" % d) from exc
    return QMatrix.identity(n), c


def casimir_tensor(p: ModulePairing, d: int) -> Dict[Tuple[Key, Key], Fraction]:
    """sum_i v_i(d) (x) v^i(d) written over Verma keys (basis independent)."""
    basis, dual = dual_bases(p, d)
    lb = p.left.pieces[d].basis
    rb = p.right.pieces[d].basis
    out: Dict[Tuple[Key, Key], Fraction] = {}
    for i in range(len(lb)):
        for j, x in dual.column(i).items():
            out[(lb[i], rb[j])] = out.get((lb[i], rb[j]), ZERO) + x
    return out


# -- operators on the whole window ----------------------------------------------


class WindowOperator:
    """A degree-block operator {(target, source): block} on a graded window 0..cutoff."""

    def __init__(self, dims: Sequence[int], blocks: Optional[Dict[Tuple[int, int], QMatrix]] = None):
        self.dims = list(dims)
        self.blocks: Dict[Tuple[int, int], QMatrix] = {}
        for k, b in (blocks or {}).items():
            if not b.is_zero():
                self.blocks[k] = b

    @property
    def cutoff(self) -> int:
        return len(self.dims) - 1

    @classmethod
    def identity(cls, dims: Sequence[int], scale=1) -> "WindowOperator":
        return cls(dims, {(d, d): QMatrix.identity(n, scale) for d, n in enumerate(dims)})

    def block(self, t: int, s: int) -> QMatrix:
        b = self.blocks.get((t, s))
        return b if b is not None else QMatrix(self.dims[t], self.dims[s])

    def __add__(self, other: "WindowOperator") -> "WindowOperator":
        out = dict(self.blocks)
        for k, b in other.blocks.items():
            out[k] = out[k] + b if k in out else b
        return WindowOperator(self.dims, out)

    def __sub__(self, other: "WindowOperator") -> "WindowOperator":
        return self + other.scale(-1)

    def scale(self, c) -> "WindowOperator":
        return WindowOperator(self.dims, {k: b.scale(c) for k, b in self.blocks.items()})

    def __matmul__(self, other: "WindowOperator") -> "WindowOperator":
        out: Dict[Tuple[int, int], QMatrix] = {}
        for (t, m), b in self.blocks.items():
            for (m2, s), c in other.blocks.items():
                if m2 != m:
                    continue
                p = b @ c
                out[(t, s)] = out[(t, s)] + p if (t, s) in out else p
        return WindowOperator(self.dims, out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WindowOperator):
            return NotImplemented
        return (self - other).is_zero()

    def is_zero(self) -> bool:
        return all(b.is_zero() for b in self.blocks.values())

    def restrict_sources(self, max_source: int) -> "WindowOperator":
        return WindowOperator(self.dims, {k: b for k, b in self.blocks.items() if k[1] <= max_source})

    def is_scalar(self, max_source: Optional[int] = None):
        """Return c if the operator is c*Id on sources <= max_source, else None."""
        top = self.cutoff if max_source is None else max_source
        val = None
        for (t, s), b in self.blocks.items():
            if s > top:
                continue
            if t != s:
                return None
            for i, r in b.rows.items():
                if set(r) != {i}:
                    return None
                if val is None:
                    val = r[i]
                elif r[i] != val:
                    return None
        for s in range(top + 1):
            if self.dims[s] and (s, s) not in self.blocks and val not in (None, ZERO):
                return None
            if (s, s) in self.blocks and len(self.blocks[(s, s)].rows) != self.dims[s]:
                return None
        return ZERO if val is None else val

    def apply(self, vec_by_degree: Dict[int, Dict[int, Fraction]]) -> Dict[int, Dict[int, Fraction]]:
        out: Dict[int, Dict[int, Fraction]] = {}
        for (t, s), b in self.blocks.items():
            v = vec_by_degree.get(s)
            if not v:
                continue
            img = b.apply(v)
            acc = out.setdefault(t, {})
            for i, x in img.items():
                w = acc.get(i, ZERO) + x
                if w:
                    acc[i] = w
                else:
                    acc.pop(i, None)
        return {t: v for t, v in out.items() if v}

    def rapply(self, covec_by_degree: Dict[int, Dict[int, Fraction]]) -> Dict[int, Dict[int, Fraction]]:
        """Covector times operator (right action on the dual)."""
        out: Dict[int, Dict[int, Fraction]] = {}
        for (t, s), b in self.blocks.items():
            w = covec_by_degree.get(t)
            if not w:
                continue
            img = b.rapply(w)
            acc = out.setdefault(s, {})
            for i, x in img.items():
                y = acc.get(i, ZERO) + x
                if y:
                    acc[i] = y
                else:
                    acc.pop(i, None)
        return {s: v for s, v in out.items() if v}


def virasoro_operator(module: GradedModule, n: int) -> WindowOperator:
    """L_n on the window; blocks whose target leaves the window are omitted."""
    blocks = {}
    for d in range(module.cutoff + 1):
        t = d - n
        if 0 <= t <= module.cutoff:
            blocks[(t, d)] = module.virasoro_block(n, d)
    return WindowOperator(module.dims(), blocks)


def field_operator(module: GradedModule, l) -> WindowOperator:
    """T[l] = sum_k l_k L_k for a vector field l(xi) d/dxi = sum_k l_k xi^(k+1) d/dxi.

    Only modes with |k| <= cutoff contribute on the window; raising modes (k < 0)
    drop blocks whose target leaves the window, so callers restrict sources.
    """
    out = WindowOperator(module.dims())
    for e, c in l.coeffs.items():
        k = e - 1
        if abs(k) > module.cutoff:
            continue
        if k >= 0 and l.order < module.cutoff + 2:
            raise TruncationError("vector field known only to order %d" % l.order)
        out = out + virasoro_operator(module, k).scale(c)
    return out


def _exp_lowering(op: WindowOperator) -> WindowOperator:
    """exp(op) for an operator that strictly lowers degree (finite sum)."""
    out = WindowOperator.identity(op.dims)
    term = WindowOperator.identity(op.dims)
    k = 0
    while True:
        k += 1
        term = (op @ term).scale(Fraction(1, k))
        if term.is_zero():
            return out
        out = out + term


@dataclass
class CoordinateChange:
    """G[h] on the window: prefactor a^(-delta) times a rational block operator."""

    scale: Fraction  # a, the linear coefficient of h
    delta: Fraction
    operator: WindowOperator

    def prefactor(self):
        import sympy

        return sympy.Rational(self.scale.numerator, self.scale.denominator) ** (-sympy.Rational(
            self.delta.numerator, self.delta.denominator))

    def __matmul__(self, other: "CoordinateChange") -> "CoordinateChange":
        return CoordinateChange(self.scale * other.scale, self.delta, self.operator @ other.operator)

    def same_as(self, other: "CoordinateChange") -> bool:
        return self.scale == other.scale and self.delta == other.delta and self.operator == other.operator


def unipotent_part(h):
    """Split h = a xi + ... as h(xi) = a * u(xi) with u = xi + O(xi^2)."""
    from .series import DomainError

    if h.valuation() != 1:
        raise DomainError("not an invertible coordinate change")
    a = h.coeffs[1]
    if not isinstance(a, Fraction) or a <= 0:
        raise DomainError("leading coefficient must be a positive rational")
    return a, h.scale(ONE / a)


def coordinate_change_operator(module: GradedModule, h) -> CoordinateChange:
    """G[h] = exp(-T[l]) with exp(l) = h, exactly on the window.

    Writing h = a*u with u unipotent, exp(l) = h factors as the flow of u followed
    by the scaling, which gives G[h] = G[u] a^(-L_0) (see the composition law in
    the tests).  The unipotent factor is a finite sum since T[log u] lowers degree.
    """
    from .series import formal_log

    D = module.cutoff
    order = D + 2
    if h.order < order:
        raise TruncationError("coordinate change known only to order %d, need %d" % (h.order, order))
    a, u = unipotent_part(h.truncate(order))
    lu = formal_log(u, order)
    unip = _exp_lowering(field_operator(module, lu).scale(-1))
    scal = WindowOperator(module.dims(), {(d, d): QMatrix.identity(n, a ** (-d)) for d, n in enumerate(module.dims())})
    return CoordinateChange(a, module.delta, unip @ scal)


def basis_weights(lie: LieAlgebraData) -> List[Weight]:
    """ad-weight of each basis element in fundamental coordinates (zero on the Cartan part)."""
    out = []
    hs = lie.cartan_indices
    for a in range(lie.dim):
        w = []
        for h in hs:
            br = lie.bracket(h, a)
            w.append(int(br.get(a, ZERO)))
        out.append(tuple(w))
    return out


def state_weights(module: GradedModule) -> List[Weight]:
    """Weight of every window basis vector, in global index order."""
    bw = basis_weights(module.lie)
    out = []
    for piece in module.pieces:
        for mono, v in piece.basis:
            w = list(module.fin.weights[v])
            for _, a in mono:
                w = [x + y for x, y in zip(w, bw[a])]
            out.append(tuple(w))
    return out


def state_degrees(module: GradedModule) -> List[int]:
    return [d for d, p in enumerate(module.pieces) for _ in p.basis]
