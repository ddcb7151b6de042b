"""Glueing: a combinatorial surface model, the recursive dimension functor and sewing series.

Surfaces are disjoint unions of components (genus, named points).  Glueing a
pair of points on one component adds a handle; glueing points on different
components joins them.  Dimensions follow the factorization rule

    dim V(S glued at (a, b); labels) = sum_mu dim V(S; labels, a -> mu, b -> mu^dagger)

with 3-point spheres supplied by the vacua solver on P^1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from .affine_module import ModulePairing, dual_bases
from .exact import ZERO, QMatrix, fstr, inverse
from .fock import (
    AbelianSphere,
    AbelianVacuum,
    MayaDiagram,
    abelian_vacua_at,
    dual_basis_plus,
    enumerate_maya,
    normalized_forms,
    vacuum,
    wedge_covector,
)
from .lie_core import LieAlgebraData, build_lie_data, conformal_weight, dagger, label_set
from .vacua_p1 import fusion_dim

log = logging.getLogger(__name__)

Label = Tuple[int, ...]


# -- combinatorial surfaces ---------------------------------------------------------


@dataclass(frozen=True)
class Component:
    genus: int
    points: Tuple[str, ...] = ()


@dataclass(frozen=True)
class LabeledMarkedSurface:
    components: Tuple[Component, ...]
    labels: Tuple[Tuple[str, Label], ...] = ()  # (point, label) for the unglued points
    glued: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        names = [p for c in self.components for p in c.points]
        if len(set(names)) != len(names):
            raise ValueError("point names must be unique")
        for c in self.components:
            if c.genus < 0:
                raise ValueError("negative genus")

    @property
    def genus(self) -> int:
        """Genus of the connected surface; for disconnected ones the sum over components."""
        return sum(c.genus for c in self.components)

    def points(self) -> List[str]:
        return [p for c in self.components for p in c.points]

    def label_map(self) -> Dict[str, Label]:
        return dict(self.labels)

    def component_of(self, point: str) -> int:
        for i, c in enumerate(self.components):
            if point in c.points:
                return i
        raise KeyError(point)

    def to_json(self) -> dict:
        return {"components": [{"genus": c.genus, "points": list(c.points)} for c in self.components],
                "labels": {p: list(l) for p, l in self.labels},
                "glued": [list(g) for g in self.glued]}


def surface(*components: Tuple[int, Sequence[str]], labels: Optional[Dict[str, Label]] = None) -> LabeledMarkedSurface:
    comps = tuple(Component(g, tuple(pts)) for g, pts in components)
    return LabeledMarkedSurface(comps, tuple(sorted((labels or {}).items())))


def glue_surface(s: LabeledMarkedSurface, pair: Tuple[str, str]) -> LabeledMarkedSurface:
    a, b = pair
    if a == b:
        raise ValueError("cannot glue a point to itself")
    i, j = s.component_of(a), s.component_of(b)
    comps = list(s.components)
    if i == j:
        c = comps[i]
        comps[i] = Component(c.genus + 1, tuple(p for p in c.points if p not in (a, b)))
    else:
        ci, cj = comps[i], comps[j]
        merged = Component(ci.genus + cj.genus, tuple(p for p in ci.points + cj.points if p not in (a, b)))
        comps = [c for k, c in enumerate(comps) if k not in (i, j)]
        comps.insert(min(i, j), merged)
    labels = tuple((p, l) for p, l in s.labels if p not in (a, b))
    return LabeledMarkedSurface(tuple(comps), labels, s.glued + ((a, b),))


# -- dimensions ------------------------------------------------------------------------


class DimensionFunctor:
    """Memoized dimensions of spaces of vacua for one algebra and level.

    ``order`` picks the decomposition: "canonical" cuts handles first and then
    splits off points two at a time; "alt" separates all points from the
    handles first and splits genus in halves.  Both must agree.
    """

    def __init__(self, level: int, lie: Optional[LieAlgebraData] = None):
        self.level = level
        self.lie = lie or build_lie_data("A", 1)
        self.labels = label_set(self.lie, level)
        self.calls = 0

    def dag(self, lam: Label) -> Label:
        return dagger(self.lie, lam)

    @lru_cache(maxsize=None)
    def sphere(self, labs: Tuple[Label, ...]) -> int:
        self.calls += 1
        labs = tuple(sorted(labs))
        n = len(labs)
        zero = (0,) * self.lie.rank
        if n == 0:
            return 1
        if n == 1:
            return 1 if labs[0] == zero else 0
        if n == 2:
            return 1 if labs[1] == self.dag(labs[0]) else 0
        if n == 3:
            return fusion_dim(self.level, *labs, lie=self.lie)
        return sum(self.sphere((labs[0], labs[1], mu)) * self.sphere((self.dag(mu),) + labs[2:])
                   for mu in self.labels)

    def _sphere_alt(self, labs: Tuple[Label, ...]) -> int:
        n = len(labs)
        if n <= 3:
            return self.sphere(labs)
        # pair the first point with the last instead
        return sum(self.sphere((labs[0], labs[-1], mu)) * self._sphere_alt((self.dag(mu),) + labs[1:-1])
                   for mu in self.labels)

    @lru_cache(maxsize=None)
    def connected(self, genus: int, labs: Tuple[Label, ...], order: str = "canonical") -> int:
        labs = tuple(sorted(labs))
        if genus == 0:
            return self.sphere(labs) if order == "canonical" else self._sphere_alt(labs)
        if order == "canonical":
            # cut one handle open
            return sum(self.connected(genus - 1, labs + (mu, self.dag(mu)), order) for mu in self.labels)
        if len(labs) >= 2:
            # a separating curve around all the points
            return sum(self._sphere_alt(labs + (mu,)) * self.connected(genus, (self.dag(mu),), order)
                       for mu in self.labels)
        if genus == 1:
            return sum(self._sphere_alt(labs + (mu, self.dag(mu))) for mu in self.labels)
        if labs:
            return sum(self.connected(1, labs + (mu,), order) * self.connected(genus - 1, (self.dag(mu),), order)
                       for mu in self.labels)
        g1 = genus // 2
        return sum(self.connected(g1, (mu,), order) * self.connected(genus - g1, (self.dag(mu),), order)
                   for mu in self.labels)

    def of_surface(self, s: LabeledMarkedSurface, order: str = "canonical") -> int:
        lab = s.label_map()
        missing = [p for p in s.points() if p not in lab]
        if missing:
            raise ValueError("unlabelled points: %s" % ", ".join(missing))
        out = 1
        for c in s.components:  # disjoint unions multiply
            out *= self.connected(c.genus, tuple(lab[p] for p in c.points), order)
            if out == 0:
                return 0
        return out


def dim_functor(s: LabeledMarkedSurface, level: int, order: str = "canonical",
                lie: Optional[LieAlgebraData] = None, pieces: Optional[LabeledMarkedSurface] = None) -> int:
    if order not in ("canonical", "alt", "recorded"):
        raise ValueError("unknown order %r" % order)
    functor = _functor(level, lie or build_lie_data("A", 1))
    if order == "recorded":
        return dim_from_record(s, functor, pieces)
    return functor.of_surface(s, order)


@lru_cache(maxsize=None)
def _functor(level: int, lie: LieAlgebraData) -> DimensionFunctor:
    return DimensionFunctor(level, lie)


def dim_from_record(s: LabeledMarkedSurface, functor: DimensionFunctor, pieces: Optional[LabeledMarkedSurface] = None) -> int:
    """Sum over labellings of the recorded glued pairs of the product over the pieces.

    ``pieces`` is the surface before any glueing; when omitted it is rebuilt
    from ``s`` only if nothing was glued.
    """
    base = pieces
    if base is None:
        if s.glued:
            raise ValueError("pass the unglued pieces to use the recorded order")
        return functor.of_surface(s)
    lab = base.label_map()
    open_pts = [p for p in base.points() if p not in lab]
    pairs = list(s.glued)
    if sorted(open_pts) != sorted(p for pr in pairs for p in pr):
        raise ValueError("glued pairs must cover exactly the unlabelled points of the pieces")
    total = 0

    def rec(k, assign):
        nonlocal total
        if k == len(pairs):
            full = dict(lab)
            full.update(assign)
            labelled = LabeledMarkedSurface(base.components, tuple(sorted(full.items())))
            total += functor.of_surface(labelled)
            return
        a, b = pairs[k]
        for mu in functor.labels:
            assign[a], assign[b] = mu, functor.dag(mu)
            rec(k + 1, assign)
        del assign[a], assign[b]

    rec(0, {})
    return total


def glue_all(pieces: LabeledMarkedSurface, pairs: Sequence[Tuple[str, str]]) -> Tuple[LabeledMarkedSurface, LabeledMarkedSurface]:
    """Glue ``pairs`` in order; returns (glued surface, the pieces) for dim_from_record."""
    s = pieces
    for pr in pairs:
        s = glue_surface(s, pr)
    return s, pieces


# -- sewing series -------------------------------------------------------------------


@dataclass
class SewingSeries:
    """sum_k terms[k] tau^(offset + k); offset is exact and never turned into a float."""

    offset: Fraction
    terms: Dict[int, Dict[tuple, Fraction]]
    order: int
    kind: str
    label: Optional[Label] = None
    blocks: Dict[Tuple[int, int], Dict[tuple, Fraction]] = field(default_factory=dict)

    def exponents(self) -> List[Fraction]:
        return [self.offset + k for k in sorted(self.terms)]

    def coefficient(self, k: int) -> Dict[tuple, Fraction]:
        return self.terms.get(k, {})

    def scalar(self, k: int) -> Fraction:
        return self.terms.get(k, {}).get((), ZERO)

    def monodromy_exponent(self) -> Fraction:
        """The formal monodromy eigenvalue is exp(2 pi i * this), kept symbolic."""
        return self.offset - (self.offset.numerator // self.offset.denominator)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "label": list(self.label) if self.label is not None else None,
            "offset": fstr(self.offset),
            "order": self.order,
            "terms": [{"step": k, "exponent": fstr(self.offset + k),
                       "coefficient": {_key_str(st): fstr(x) for st, x in sorted(v.items(), key=lambda kv: str(kv[0]))}}
                      for k, v in sorted(self.terms.items())],
        }


def _key_str(st: tuple) -> str:
    if not st:
        return "1"
    return "(x)".join(m.label() if isinstance(m, MayaDiagram) else str(m) for m in st)


class PairingCovector:
    """The two-point covector v (x) w -> (v|w) given by an invariant pairing."""

    def __init__(self, p: ModulePairing):
        self.pairing = p
        self.modules = [p.left, p.right]

    def value(self, state: Tuple[int, ...]) -> Fraction:
        g1, g2 = state
        d1, i1 = _local(self.pairing.left, g1)
        d2, i2 = _local(self.pairing.right, g2)
        if d1 != d2:
            return ZERO
        return self.pairing.block(d1)[i1, i2]


def _local(module, g: int) -> Tuple[int, int]:
    for d in range(module.cutoff, -1, -1):
        if g >= module.offsets[d]:
            return d, g - module.offsets[d]
    raise IndexError(g)


def glue_series_nonabelian(psi, pairing: ModulePairing, D: int, rest_states: Optional[Sequence[tuple]] = None,
                           basis_change: Optional[Dict[int, QMatrix]] = None) -> SewingSeries:
    """sum_d {sum_i <Psi| v_i(d) (x) v^i(d) (x) u>} tau^(Delta_mu + d).

    ``psi`` has ``value(state)`` on global index tuples whose first two slots are
    H_mu and H_mu-dagger.  ``rest_states`` lists the u's (tuples for the other
    slots, default the single empty tuple).  ``basis_change[d]`` replaces the
    basis v_i(d) by the columns of that matrix; the series must not change.
    """
    left, right = pairing.left, pairing.right
    if D > left.cutoff:
        raise ValueError("order %d exceeds the module cutoff %d" % (D, left.cutoff))
    rest = list(rest_states) if rest_states is not None else [()]
    terms: Dict[int, Dict[tuple, Fraction]] = {}
    for d in range(D + 1):
        basis, dual = dual_bases(pairing, d)
        if basis_change and d in basis_change:
            a = basis_change[d]
            basis = a
            dual = dual @ inverse(a).T
        coeff: Dict[tuple, Fraction] = {}
        for u in rest:
            s = ZERO
            for i in range(basis.ncols):
                vi = basis.column(i)
                wi = dual.column(i)
                for j, x in vi.items():
                    for k, y in wi.items():
                        s += x * y * psi.value((left.offsets[d] + j, right.offsets[d] + k) + tuple(u))
            if s:
                coeff[tuple(u)] = s
        terms[d] = coeff
    delta = conformal_weight(left.lie, left.level, left.weight)
    return SewingSeries(delta, terms, D, "nonabelian", tuple(left.weight))


def nodal_vacuum(pairing: ModulePairing) -> Dict[Tuple[int, int], Fraction]:
    """|0_{mu,mu-dagger}> = sum_i v_i(0) (x) v^i(0), in global indices of the two modules."""
    basis, dual = dual_bases(pairing, 0)
    out: Dict[Tuple[int, int], Fraction] = {}
    for i in range(basis.ncols):
        for j, x in basis.column(i).items():
            for k, y in dual.column(i).items():
                out[(j, k)] = out.get((j, k), ZERO) + x * y
    return {k: v for k, v in out.items() if v}


def glue_series_abelian(psi: AbelianVacuum, D: int) -> SewingSeries:
    """sum_p sum_d sum_i (-1)^(p+d) <psi| v_i(d,p) (x) v^i(d,-p-1) (x) u> tau^(d + p(p+1)/2).

    The first two slots of ``psi`` are glued.  Coefficients are covectors on
    the remaining slots, keyed by tuples of Maya diagrams.
    """
    win = psi.window
    if 2 * D > win.emax:
        raise ValueError("order %d needs a window of energy %d, have %d" % (D, 2 * D, win.emax))
    n_rest = win.n - 2
    from .fock import TensorFockWindow

    rest = TensorFockWindow(n_rest, win.emax - 2 * D, 0).states if n_rest else [()]
    terms: Dict[int, Dict[tuple, Fraction]] = {}
    blocks: Dict[Tuple[int, int], Dict[tuple, Fraction]] = {}
    p = 0
    while p * (p + 1) // 2 <= D:
        for q in sorted({p, -p - 1}):
            e0 = q * (q + 1) // 2
            for d in range(D - e0 + 1):
                basis, duals = dual_basis_plus(q, d)
                sign = -1 if (q + d) % 2 else 1
                coeff: Dict[tuple, Fraction] = {}
                for u in rest:
                    if 2 * (d + e0) + sum(m.energy for m in u) > win.emax:
                        continue
                    s = ZERO
                    for v, w in zip(basis, duals):
                        for n, y in w.items():
                            s += y * psi.value((v, n) + tuple(u))
                    if s:
                        coeff[tuple(u)] = sign * s
                blocks[(q, d)] = coeff
                acc = terms.setdefault(d + e0, {})
                for k, x in coeff.items():
                    acc[k] = acc.get(k, ZERO) + x
        p += 1
    terms = {k: {u: x for u, x in v.items() if x} for k, v in terms.items()}
    return SewingSeries(Fraction(0), terms, D, "abelian", None, blocks)


def nodal_restriction(series: SewingSeries) -> Dict[tuple, Fraction]:
    """The tau -> 0 leading block: the d = 0 term (nonabelian) or the exponent-0 term (abelian)."""
    return dict(series.terms.get(0, {}))


# -- the nodal sign check ---------------------------------------------------------------------


@dataclass
class NodalCheck:
    proportional: bool
    restricted_value: Fraction
    expected_sign: int
    emax: int

    @property
    def ok(self) -> bool:
        return self.proportional and self.restricted_value == self.expected_sign


def nodal_preferred_check(emax: int = 3, plus=Fraction(0), minus=Fraction(1), q=Fraction(3)) -> NodalCheck:
    """Compare preferred vacua across a node on the sphere (arithmetic genus 1).

    The nodal curve identifies P+ and P- on P^1.  Its preferred covector at Q
    wedges the normalized forms with w_1 = -dz/(z-P+) + dz/(z-P-).  Lifting it
    through |0_{+,-}> to the three-pointed sphere and restricting to |0> (x) |0>
    at P+- must give (-1)^1 times the one-point preferred covector <-1|.
    """
    plus, minus, q = Fraction(plus), Fraction(minus), Fraction(q)
    sphere = AbelianSphere((plus, minus, q))
    vac = abelian_vacua_at(sphere, emax)
    if vac.dim != 1:
        return NodalCheck(False, ZERO, -1, emax)
    phi = vac.elements[0]
    # w_1 expanded at Q: -sum (-1)^m (q-P+)^(-1-m) xi^m + sum (-1)^m (q-P-)^(-1-m) xi^m
    w1 = {}
    for m in range(emax + 3):
        c = (-1) ** m * (-(q - plus) ** (-1 - m) + (q - minus) ** (-1 - m))
        if c:
            w1[m] = Fraction(c)
    forms = [w1] + normalized_forms(None, emax + 2, emax + 3)
    target = wedge_covector(forms, 0, emax)
    v0, vm = vacuum(0), vacuum(-1)
    lifted: Dict[MayaDiagram, Fraction] = {}
    for d in range(emax + 1):
        for m in enumerate_maya(0, d):
            x = phi.value((v0, vm, m)) - phi.value((vm, v0, m))
            if x:
                lifted[m] = x
    # find the scalar c with c * lifted = target
    ratio = None
    proportional = True
    for m in set(lifted) | set(target):
        a, b = lifted.get(m, ZERO), target.get(m, ZERO)
        if a == 0 or b == 0:
            if a != b:
                proportional = False
            continue
        r = b / a
        if ratio is None:
            ratio = r
        elif r != ratio:
            proportional = False
    if ratio is None:
        return NodalCheck(False, ZERO, -1, emax)
    restricted = ratio * phi.value((v0, v0, vm))
    return NodalCheck(proportional, restricted, -1, emax)


def curvature_ratio(level: int, lie: Optional[LieAlgebraData] = None) -> Fraction:
    """c_v / 2 with c_v = level dim g / (g* + level): the scalar relating the two curvatures."""
    lie = lie or build_lie_data("A", 1)
    return Fraction(level * lie.dim, lie.dual_coxeter + level) / 2
