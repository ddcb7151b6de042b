"""Spaces of vacua on the pointed projective line as null spaces of truncated gauge conditions.

A covector lives on the span of tensor states u_1 (x) ... (x) u_N with total
degree at most D.  For a basis function f and a basis element X the gauge
condition reads  <Psi| sum_j rho_j(X[t_j f]) |u> = 0, where t_j f is the
Laurent expansion of f in the local coordinate at q_j.  A row is generated
only when every state it touches stays inside the window, i.e.
deg(u) + (pole order of f) <= D.  Since the Cartan rows force the covector to
vanish off total weight zero, only weight-zero states are kept as unknowns.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from .affine_module import (
    CoordinateChange,
    GradedModule,
    TruncationError,
    build_truncated_module,
    coordinate_change_operator,
    state_degrees,
    state_weights,
)
from .exact import ONE, ZERO, QMatrix, nullspace
from .lie_core import LieAlgebraData, build_lie_data, label_set
from .series import FormalSeries

log = logging.getLogger(__name__)

def max_truncation() -> int:
    """Largest truncation tried while stabilizing; overridable through VACUA_LAB_MAX_TRUNCATION."""
    return int(os.environ.get("VACUA_LAB_MAX_TRUNCATION", "4"))


class StabilizationError(RuntimeError):
    def __init__(self, message: str, certificate: dict):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class PointedSphere:
    points: Tuple[Fraction, ...]
    labels: Tuple[Tuple[int, ...], ...]
    coordinates: Optional[Tuple[FormalSeries, ...]] = None  # h_j with eta_j = h_j(z - q_j)

    def __post_init__(self):
        pts = tuple(Fraction(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", tuple(tuple(l) for l in self.labels))
        if len(pts) < 1:
            raise ValueError("need at least one point")
        if len(set(pts)) != len(pts):
            raise ValueError("coincident points")
        if len(self.labels) != len(pts):
            raise ValueError("one label per point")

    @property
    def n(self) -> int:
        return len(self.points)

    @classmethod
    def standard(cls, labels) -> "PointedSphere":
        return cls(tuple(Fraction(i) for i in range(len(labels))), tuple(labels))


# -- functions on the sphere --------------------------------------------------


@dataclass(frozen=True)
class BasisFunction:
    """1 (pole_at is None) or (z - q_j)^(-k)."""

    pole_at: Optional[int]
    k: int = 0

    def pole_order(self, i: int) -> int:
        return self.k if self.pole_at == i else 0

    def expansion(self, points: Sequence[Fraction], i: int, order: int) -> FormalSeries:
        """Laurent expansion at q_i in xi_i = z - q_i, known modulo xi^order."""
        if self.pole_at is None:
            return FormalSeries({0: ONE}, order)
        if self.pole_at == i:
            return FormalSeries({-self.k: ONE}, order)
        c = points[i] - points[self.pole_at]
        out = {}
        for m in range(order):
            # binom(-k, m) c^(-k-m)
            out[m] = Fraction((-1) ** m * _binom(self.k + m - 1, m)) / c ** (self.k + m)
        return FormalSeries(out, order)

    def label(self) -> str:
        return "1" if self.pole_at is None else "(z-q%d)^-%d" % (self.pole_at + 1, self.k)


def _binom(n: int, k: int) -> int:
    from math import comb

    return comb(n, k)


def function_basis(points: Sequence, K: int) -> List[BasisFunction]:
    if K < 1:
        raise ValueError("K must be at least 1")
    pts = [Fraction(p) for p in points]
    if len(set(pts)) != len(pts):
        raise ValueError("coincident points")
    return [BasisFunction(None)] + [BasisFunction(j, k) for j in range(len(pts)) for k in range(1, K + 1)]


def local_expansion(sphere: PointedSphere, f: BasisFunction, i: int, order: int) -> FormalSeries:
    """Expansion of f in the chosen coordinate eta_i at q_i."""
    base = f.expansion(sphere.points, i, order + f.k + 2)
    if sphere.coordinates is None or sphere.coordinates[i] is None:
        return base.truncate(order)
    h = sphere.coordinates[i]
    hinv = h.truncate(order + f.k + 2).comp_inverse()
    return base.compose(hinv).truncate(order)


# -- the linear system ----------------------------------------------------------


class TensorWindow:
    """Weight-zero tensor states of total degree <= D."""

    def __init__(self, modules: Sequence[GradedModule], D: int):
        self.modules = list(modules)
        self.D = D
        self.rank = modules[0].lie.rank
        self.deg = [state_degrees(m) for m in modules]
        self.wt = [state_weights(m) for m in modules]
        self.index: Dict[Tuple[int, ...], int] = {}
        self.states: List[Tuple[int, ...]] = []
        zero = (0,) * self.rank
        for st in self._enumerate(D, None):
            w = self.weight(st)
            if w == zero:
                self.index[st] = len(self.states)
                self.states.append(st)

    def weight(self, st) -> Tuple[int, ...]:
        w = [0] * self.rank
        for j, g in enumerate(st):
            for r, x in enumerate(self.wt[j][g]):
                w[r] += x
        return tuple(w)

    def degree(self, st) -> int:
        return sum(self.deg[j][g] for j, g in enumerate(st))

    def _enumerate(self, budget: int, target_weight):
        mods = self.modules

        def rec(j, left):
            if j == len(mods):
                yield ()
                return
            m = mods[j]
            for g in range(m.total_dim):
                dg = self.deg[j][g]
                if dg > left:
                    break
                for tail in rec(j + 1, left - dg):
                    yield (g,) + tail

        for st in rec(0, budget):
            if target_weight is None or self.weight(st) == target_weight:
                yield st

    def states_with(self, budget: int, weight) -> List[Tuple[int, ...]]:
        return list(self._enumerate(budget, weight))


def _mode_column(module: GradedModule, a: int, n: int, g: int, cache: dict) -> Dict[int, Fraction]:
    key = (id(module), a, n, g)
    hit = cache.get(key)
    if hit is None:
        hit = module.act_mode(a, n, {g: ONE})
        cache[key] = hit
    return hit


@dataclass
class GaugeSystem:
    window: TensorWindow
    rows: List[Dict[int, Fraction]]
    row_labels: List[Tuple[int, str, Tuple[int, ...]]]
    max_pole: int

    def matrix(self) -> QMatrix:
        return QMatrix(len(self.rows), len(self.window.states), {i: r for i, r in enumerate(self.rows)})


def gauge_matrix(modules: Sequence[GradedModule], sphere: PointedSphere, K: int, D: int) -> GaugeSystem:
    lie = modules[0].lie
    from .affine_module import basis_weights

    bw = basis_weights(lie)
    win = TensorWindow(modules, D)
    funcs = function_basis(sphere.points, K)
    cache: dict = {}
    rows: List[Dict[int, Fraction]] = []
    labels = []
    for f in funcs:
        pole = f.k
        budget = D - pole
        if budget < 0:
            continue
        # expansions need modes up to the largest degree in the window
        exps = [local_expansion(sphere, f, j, D + 1) for j in range(sphere.n)]
        for a in range(lie.dim):
            target = tuple(-x for x in bw[a])
            for st in win.states_with(budget, target):
                row: Dict[int, Fraction] = {}
                for j, ser in enumerate(exps):
                    for n, c in ser.coeffs.items():
                        if n > win.deg[j][st[j]]:
                            continue
                        col = _mode_column(modules[j], a, n, st[j], cache)
                        for g2, x in col.items():
                            st2 = st[:j] + (g2,) + st[j + 1:]
                            idx = win.index.get(st2)
                            if idx is None:
                                raise TruncationError("gauge row left the window")
                            w = row.get(idx, ZERO) + c * x
                            if w:
                                row[idx] = w
                            else:
                                row.pop(idx)
                if row:
                    rows.append(row)
                    labels.append((a, f.label(), st))
    return GaugeSystem(win, rows, labels, K)


@dataclass
class VacuaElement:
    window: TensorWindow
    coeffs: Dict[int, Fraction]  # over window.states
    prefactor: object = 1  # scalar factor kept outside the rational coefficients

    def value(self, state: Tuple[int, ...]) -> Fraction:
        i = self.window.index.get(state)
        return ZERO if i is None else self.coeffs.get(i, ZERO)

    def degree_zero_part(self) -> Dict[Tuple[int, ...], Fraction]:
        return {self.window.states[i]: x for i, x in self.coeffs.items() if self.window.degree(self.window.states[i]) == 0}

    def residual(self, system: GaugeSystem) -> List[Fraction]:
        out = []
        for r in system.rows:
            s = sum((x * self.coeffs.get(i, ZERO) for i, x in r.items()), ZERO)
            out.append(s)
        return out


@dataclass
class VacuaBasis:
    sphere: PointedSphere
    level: int
    elements: List[VacuaElement]
    D: int
    K: int
    certificate: dict

    @property
    def dim(self) -> int:
        return len(self.elements)


def _solve(modules, sphere, K, D):
    sysm = gauge_matrix(modules, sphere, K, D)
    ns = nullspace(sysm.matrix())
    return sysm, ns


def vacua_at(sphere: PointedSphere, level: int, D: int, K: Optional[int] = None,
             lie: Optional[LieAlgebraData] = None) -> VacuaBasis:
    """Null space at a single truncation (no stabilization)."""
    lie = lie or build_lie_data("A", len(sphere.labels[0]))
    K = D if K is None else K
    modules = [build_truncated_module(lie, level, lab, D) for lab in sphere.labels]
    sysm, ns = _solve(modules, sphere, K, D)
    elems = [VacuaElement(sysm.window, v) for v in ns]
    return VacuaBasis(sphere, level, elems, D, K, {"D": D, "K": K, "dim": len(elems), "rows": len(sysm.rows),
                                                   "unknowns": len(sysm.window.states)})


def fusion_oracle(level: int, a: int, b: int, c: int) -> int:
    """sl2 fusion coefficient from the closed-form rule."""
    if abs(a - b) <= c <= min(a + b, 2 * level - a - b) and (a + b + c) % 2 == 0:
        return 1
    return 0


def vacua_basis(sphere: PointedSphere, level: int, D: Optional[int] = None, K: Optional[int] = None,
                lie: Optional[LieAlgebraData] = None, max_D: Optional[int] = None) -> VacuaBasis:
    """Vacua with a stabilization certificate.

    Starting from D (default 1), increases (D, K) until two successive
    truncations give the same dimension; for three sl2 points the value must also
    match the closed-form fusion rule.  The elements returned are those of the
    larger truncation.
    """
    lie = lie or build_lie_data("A", len(sphere.labels[0]))
    for lab in sphere.labels:
        if tuple(lab) not in label_set(lie, level):
            raise ValueError("label %r not in the label set at level %d" % (lab, level))
    D0 = 1 if D is None else D
    cap = max_truncation() if max_D is None else max_D
    history = []
    prev = None
    d = D0
    while d <= cap:
        k = d if K is None else max(K, d)
        vb = vacua_at(sphere, level, d, k, lie)
        history.append({"D": d, "K": k, "dim": vb.dim})
        log.debug("truncation D=%d K=%d dim=%d", d, k, vb.dim)
        if prev is not None and prev.dim == vb.dim:
            cert = {"history": history, "stable_dim": vb.dim, "D": d, "K": k}
            if sphere.n == 3 and lie.rank == 1:
                o = fusion_oracle(level, *(lab[0] for lab in sphere.labels))
                cert["oracle"] = o
                if o != vb.dim:
                    prev = vb
                    d += 1
                    continue
            vb.certificate = cert
            return vb
        prev = vb
        d += 1
    raise StabilizationError("dimension did not stabilize up to D=%d" % cap, {"history": history})


def fusion_dim(level: int, a, b, c, lie: Optional[LieAlgebraData] = None) -> int:
    lie = lie or build_lie_data("A", 1)
    labs = [tuple(x) if isinstance(x, (tuple, list)) else (x,) for x in (a, b, c)]
    return _fusion_dim_cached(lie, level, tuple(labs))


@lru_cache(maxsize=None)
def _fusion_dim_cached(lie, level, labs) -> int:
    return vacua_basis(PointedSphere.standard(labs), level, lie=lie).dim


def fusion_table(level: int, lie: Optional[LieAlgebraData] = None) -> Dict[Tuple, int]:
    lie = lie or build_lie_data("A", 1)
    labels = label_set(lie, level)
    return {(a, b, c): fusion_dim(level, a, b, c, lie) for a in labels for b in labels for c in labels}


# -- propagation ------------------------------------------------------------------


def propagate(basis: VacuaBasis, new_point, coordinate: Optional[FormalSeries] = None) -> VacuaBasis:
    """Lift vacua to the sphere with an extra point labelled 0.

    ``coordinate`` optionally fixes the local coordinate at the new point.
    Each lifted element is the unique solution of the enlarged gauge system
    whose value on v (x) |0> equals the original value on v; dimensions are
    compared rather than assumed.
    """
    sphere = basis.sphere
    q = Fraction(new_point)
    if q in sphere.points:
        raise ValueError("coincident point")
    lie = build_lie_data("A", len(sphere.labels[0]))
    zero = (0,) * lie.rank
    coords = None
    if coordinate is not None or sphere.coordinates is not None:
        coords = (sphere.coordinates or (None,) * sphere.n) + (coordinate,)
    big = PointedSphere(sphere.points + (q,), sphere.labels + (zero,), coords)
    D, K = basis.D, basis.K
    new = vacua_at(big, basis.level, D, K, lie)
    win_old = basis.elements[0].window if basis.elements else None
    # restriction to states with |0> in the last slot, read in the old window
    vac = 0  # global index of |0> in H_0
    lifted = []
    if new.elements:
        rmat = []
        for e in new.elements:
            r = {}
            for i, x in e.coeffs.items():
                st = e.window.states[i]
                if st[-1] == vac:
                    j = win_old.index.get(st[:-1]) if win_old else None
                    if j is not None:
                        r[j] = x
            rmat.append(r)
        # change of basis so that restriction reproduces the old elements
        from .exact import solve_left

        for old in basis.elements:
            coeff = solve_left(rmat, old.coeffs)
            comb: Dict[int, Fraction] = {}
            for c, e in zip(coeff, new.elements):
                for i, x in e.coeffs.items():
                    comb[i] = comb.get(i, ZERO) + c * x
            lifted.append(VacuaElement(new.elements[0].window, {i: x for i, x in comb.items() if x}))
    cert = dict(new.certificate)
    cert["source_dim"] = basis.dim
    return VacuaBasis(big, basis.level, lifted, D, K, cert)


def restrict_to_vacuum_slot(element: VacuaElement, old_window: TensorWindow) -> Dict[int, Fraction]:
    """<Psi|(v (x) |0>) as a covector on the smaller window."""
    out = {}
    for i, x in element.coeffs.items():
        st = element.window.states[i]
        if st[-1] == 0:
            j = old_window.index.get(st[:-1])
            if j is not None:
                out[j] = x
    return out


# -- coordinate changes -------------------------------------------------------------


def apply_coordinate_change(element: VacuaElement, hs: Sequence[Optional[FormalSeries]]) -> VacuaElement:
    """<Psi| G[h_1] (x) ... (x) G[h_N] as a covector on the same window.

    The rational part is stored in ``coeffs``; the product of a_j^(-Delta_j) is
    kept in ``prefactor``.
    """
    win = element.window
    ops: List[Optional[CoordinateChange]] = []
    pref = 1
    for m, h in zip(win.modules, hs):
        if h is None:
            ops.append(None)
            continue
        g = coordinate_change_operator(m, h)
        ops.append(g)
        pref = pref * g.prefactor()
    # (Psi G)(v) = Psi(G v); G lowers degree so G v stays in the window
    cols: List[Dict[int, Dict[int, Fraction]]] = []
    for m, g in zip(win.modules, ops):
        per = {}
        if g is not None:
            for (t, s), b in g.operator.blocks.items():
                for i, r in b.rows.items():
                    for j, x in r.items():
                        per.setdefault(m.offsets[s] + j, {})[m.offsets[t] + i] = x
        cols.append(per)
    out: Dict[int, Fraction] = {}
    for idx, st in enumerate(win.states):
        # expand G_1 (x) ... (x) G_N applied to st
        acc = {(): ONE}
        for j, g_j in enumerate(st):
            img = {g_j: ONE} if ops[j] is None else cols[j].get(g_j, {})
            nxt = {}
            for pre, c in acc.items():
                for g2, x in img.items():
                    nxt[pre + (g2,)] = nxt.get(pre + (g2,), ZERO) + c * x
            acc = nxt
        s = ZERO
        for st2, c in acc.items():
            v = element.value(st2)
            if v:
                s += c * v
        if s:
            out[idx] = s
    return VacuaElement(win, out, pref * element.prefactor)


def chain(h1: FormalSeries, h2: FormalSeries) -> FormalSeries:
    """The coordinate change xi -> h2(h1(xi)); G[chain(h1, h2)] = G[h1] G[h2]."""
    return h2.compose(h1)
