"""The spin-0 bc (ghost) system: Maya diagrams, fermion modes and abelian vacua on P^1.

Half-integers are stored doubled: the position nu = -3/2 is the integer -3.
A Maya diagram of charge p is kept as (p, partition); its occupied positions
are p - 1/2 - (i - 1) + lambda_i for i = 1, 2, ...  The ket |M> is the wedge of
the occupied basis vectors in decreasing order and <M| is its dual.

Operators act on sparse vectors {MayaDiagram: Fraction}.  psi_nu removes nu
from the wedge and psibar_nu inserts -nu; both carry the sign
(-1)^(number of occupied positions above the slot).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from sympy.utilities.iterables import partitions

from .affine_module import CoordinateChange, TruncationError, WindowOperator, _exp_lowering, unipotent_part
from .exact import ONE, ZERO, QMatrix, inverse, nullspace, solve_left
from .series import DomainError, FormalSeries, formal_log

log = logging.getLogger(__name__)

Vec = Dict["MayaDiagram", Fraction]


def doubled(nu) -> int:
    """2*nu for a half-integer nu (accepts Fraction, str or an already-odd int via Fraction)."""
    x = Fraction(nu) * 2
    if x.denominator != 1 or x.numerator % 2 == 0:
        raise ValueError("%s is not a half-integer" % nu)
    return x.numerator


@dataclass(frozen=True, order=True)
class MayaDiagram:
    charge: int
    partition: Tuple[int, ...] = ()

    def __post_init__(self):
        lam = tuple(int(x) for x in self.partition)
        while lam and lam[-1] == 0:
            lam = lam[:-1]
        if any(lam[i] < lam[i + 1] for i in range(len(lam) - 1)) or (lam and lam[-1] < 0):
            raise ValueError("not a partition: %r" % (self.partition,))
        object.__setattr__(self, "partition", lam)

    @property
    def degree(self) -> int:
        return sum(self.partition)

    @property
    def energy(self) -> int:
        """L_0 eigenvalue d + p(p+1)/2."""
        return self.degree + self.charge * (self.charge + 1) // 2

    def positions(self, depth: int) -> List[int]:
        """The top ``depth`` occupied positions (doubled), decreasing."""
        lam = self.partition
        return [2 * self.charge - 1 - 2 * i + 2 * (lam[i] if i < len(lam) else 0) for i in range(depth)]

    @classmethod
    def from_positions(cls, charge: int, pos: Sequence[int]) -> "MayaDiagram":
        lam = []
        for i, s in enumerate(pos):
            diff = s - (2 * charge - 1 - 2 * i)
            if diff % 2 or diff < 0:
                raise ValueError("positions inconsistent with charge %d" % charge)
            lam.append(diff // 2)
        return cls(charge, tuple(lam))

    def label(self) -> str:
        return "|%d;%s>" % (self.charge, ",".join(map(str, self.partition)))

    def to_json(self) -> dict:
        return {"charge": self.charge, "partition": list(self.partition), "degree": self.degree}


def vacuum(p: int = 0) -> MayaDiagram:
    return MayaDiagram(p, ())


def enumerate_maya(p: int, d: int) -> List[MayaDiagram]:
    if d < 0:
        raise ValueError("degree must be non-negative")
    out = []
    for part in partitions(d):
        lam = []
        for k in sorted(part, reverse=True):
            lam.extend([k] * part[k])
        out.append(MayaDiagram(p, tuple(lam)))
    out.sort()
    return out


def _depth_for(m: MayaDiagram, n2: int) -> int:
    # enough positions that the last listed one is below n2 and below all moved boxes
    return max(len(m.partition) + 1, (2 * m.charge - 1 - n2) // 2 + 3)


def _remove(m: MayaDiagram, n2: int) -> Optional[Tuple[int, MayaDiagram]]:
    pos = m.positions(_depth_for(m, n2))
    if n2 not in pos:
        return None
    i = pos.index(n2)
    rest = pos[:i] + pos[i + 1:]
    return (-1 if i % 2 else 1), MayaDiagram.from_positions(m.charge - 1, rest)


def _insert(m: MayaDiagram, n2: int) -> Optional[Tuple[int, MayaDiagram]]:
    pos = m.positions(_depth_for(m, n2))
    if n2 in pos:
        return None
    i = sum(1 for s in pos if s > n2)
    new = pos[:i] + [n2] + pos[i:]
    return (-1 if i % 2 else 1), MayaDiagram.from_positions(m.charge + 1, new)


def _lift(op, vec: Vec, n2: int) -> Vec:
    out: Vec = {}
    for m, c in vec.items():
        r = op(m, n2)
        if r is None:
            continue
        s, m2 = r
        v = out.get(m2, ZERO) + s * c
        if v:
            out[m2] = v
        else:
            out.pop(m2, None)
    return out


# left actions on kets
def psi(nu, vec: Vec) -> Vec:
    return _lift(_remove, vec, doubled(nu))


def psibar(nu, vec: Vec) -> Vec:
    return _lift(_insert, vec, -doubled(nu))


# right actions on covectors: <M| psi_nu puts e^nu into the wedge, <M| psibar_nu contracts e^(-nu)
def rpsi(covec: Vec, nu) -> Vec:
    return _lift(_insert, covec, doubled(nu))


def rpsibar(covec: Vec, nu) -> Vec:
    return _lift(_remove, covec, -doubled(nu))


def _psi2(n2: int, vec: Vec) -> Vec:
    return _lift(_remove, vec, n2)


def _psibar2(n2: int, vec: Vec) -> Vec:
    return _lift(_insert, vec, -n2)


def pair(covec: Vec, vec: Vec) -> Fraction:
    return sum((c * vec.get(m, ZERO) for m, c in covec.items()), ZERO)


def add_into(out: Vec, vec: Vec, c=ONE) -> None:
    for m, x in vec.items():
        v = out.get(m, ZERO) + c * x
        if v:
            out[m] = v
        else:
            out.pop(m, None)


def maya_data(m: MayaDiagram) -> Tuple[List[Fraction], List[Fraction]]:
    """The negative half-integers (mu's, nu's) describing M relative to |0>.

    mu_i are minus the occupied positive positions, nu_j the empty negative ones,
    both increasing.
    """
    depth = max(len(m.partition) + abs(m.charge) + 2, 2)
    pos = set(m.positions(depth + max(0, -m.charge) + 2))
    low = min(pos)
    added = sorted(-s for s in pos if s > 0)
    holes = sorted(s for s in range(low + 2, 0, 2) if s not in pos)
    return [Fraction(x, 2) for x in added], [Fraction(x, 2) for x in holes]


def build_from_data(mus: Sequence, nus: Sequence) -> Vec:
    """(-1)^(sum nu + s/2) psibar_mu1 ... psibar_mur psi_nus ... psi_nu1 |0>."""
    vec: Vec = {vacuum(0): ONE}
    for nu in sorted(nus):
        vec = psi(nu, vec)
    for mu in sorted(mus, reverse=True):
        vec = psibar(mu, vec)
    e = sum((Fraction(x) for x in nus), ZERO) + Fraction(len(nus), 2)
    sign = -1 if int(e) % 2 else 1
    return {m: sign * c for m, c in vec.items()}


# -- bilinears ----------------------------------------------------------------


def _span(vec: Vec, n: int) -> range:
    """Half-integer indices (doubled) outside of which a mode bilinear acts trivially."""
    r = 0
    for m in vec:
        r = max(r, abs(m.charge) + m.degree)
    r += abs(n) + 3
    return range(-2 * r - 1, 2 * r + 2, 2)


def _normal_ordered(first, second, a2: int, b2: int, vec: Vec) -> Vec:
    """:A_a B_b: applied to vec; equals -B_b A_a when a > 0 > b."""
    if a2 > 0 > b2:
        return _neg(second(b2, first(a2, vec)))
    return first(a2, second(b2, vec))


def _neg(vec: Vec) -> Vec:
    return {m: -c for m, c in vec.items()}


def current_mode(n: int, vec: Vec) -> Vec:
    """J_n = sum_{nu + mu = n} :psibar_nu psi_mu:."""
    out: Vec = {}
    for nu2 in _span(vec, n):
        mu2 = 2 * n - nu2
        add_into(out, _normal_ordered(_psibar2, _psi2, nu2, mu2, vec))
    return out


def bc_virasoro(n: int, vec: Vec) -> Vec:
    """L_n = sum_{mu + nu = n} (-mu - 1/2) :psi_mu psibar_nu:."""
    out: Vec = {}
    for mu2 in _span(vec, n):
        nu2 = 2 * n - mu2
        w = Fraction(-mu2 - 1, 2)
        if w:
            add_into(out, _normal_ordered(_psi2, _psibar2, mu2, nu2, vec), w)
    return out


CENTRAL_CHARGE = Fraction(-2)


# -- graded window and coordinate changes ----------------------------------------


class FockWindow:
    """All Maya diagrams with energy d + p(p+1)/2 <= emax, grouped by energy.

    Energy is the L_0 grading, so L_n maps grade e to grade e - n and the
    block operators of affine_module apply unchanged.
    """

    def __init__(self, emax: int):
        self.emax = emax
        self.grades: List[List[MayaDiagram]] = [[] for _ in range(emax + 1)]
        p = 0
        while p * (p + 1) // 2 <= emax:
            for q in {p, -p - 1}:
                base = q * (q + 1) // 2
                for d in range(emax - base + 1):
                    self.grades[base + d].extend(enumerate_maya(q, d))
            p += 1
        for g in self.grades:
            g.sort()
        self.where = {m: (e, i) for e, g in enumerate(self.grades) for i, m in enumerate(g)}

    def dims(self) -> List[int]:
        return [len(g) for g in self.grades]

    def states(self) -> List[MayaDiagram]:
        return [m for g in self.grades for m in g]

    def operator(self, action) -> WindowOperator:
        """Block matrix of a grade-homogeneous linear map given on single diagrams."""
        blocks: Dict[Tuple[int, int], QMatrix] = {}
        for s, grade in enumerate(self.grades):
            for j, m in enumerate(grade):
                for m2, c in action({m: ONE}).items():
                    hit = self.where.get(m2)
                    if hit is None:
                        continue
                    t, i = hit
                    b = blocks.setdefault((t, s), QMatrix(len(self.grades[t]), len(grade)))
                    b.add_entry(i, j, c)
        return WindowOperator(self.dims(), blocks)


@lru_cache(maxsize=None)
def fock_window(emax: int) -> FockWindow:
    return FockWindow(emax)


@lru_cache(maxsize=None)
def bc_virasoro_operator(emax: int, n: int) -> WindowOperator:
    return fock_window(emax).operator(lambda v: bc_virasoro(n, v))


def bc_field_operator(emax: int, l: FormalSeries) -> WindowOperator:
    """T[l] = sum_k l_k L_k on the fermion window."""
    win = fock_window(emax)
    out = WindowOperator(win.dims())
    for e, c in l.coeffs.items():
        k = e - 1
        if abs(k) > emax:
            continue
        if k >= 0 and l.order < emax + 2:
            raise TruncationError("vector field known only to order %d" % l.order)
        out = out + bc_virasoro_operator(emax, k).scale(c)
    return out


def fock_coordinate_change(emax: int, h: FormalSeries) -> CoordinateChange:
    """G[h] = G[u] a^(-L_0) on the fermion window; L_0 has integer spectrum so all is rational."""
    order = emax + 2
    if h.order < order:
        raise TruncationError("coordinate change known only to order %d, need %d" % (h.order, order))
    a, u = unipotent_part(h.truncate(order))
    unip = _exp_lowering(bc_field_operator(emax, formal_log(u, order)).scale(-1))
    dims = fock_window(emax).dims()
    scal = WindowOperator(dims, {(e, e): QMatrix.identity(n, a ** (-e)) for e, n in enumerate(dims)})
    return CoordinateChange(a, ZERO, unip @ scal)


def _as_fock_vector(win: FockWindow, by_grade: Dict[int, Dict[int, Fraction]]) -> Vec:
    return {win.grades[e][i]: c for e, v in by_grade.items() for i, c in v.items()}


def _by_grade(win: FockWindow, vec: Vec) -> Dict[int, Dict[int, Fraction]]:
    out: Dict[int, Dict[int, Fraction]] = {}
    for m, c in vec.items():
        e, i = win.where[m]
        out.setdefault(e, {})[i] = c
    return out


def transform_covector(covec: Vec, g: CoordinateChange, emax: int) -> Vec:
    """<phi| G for a single-point covector supported in the window."""
    win = fock_window(emax)
    return _as_fock_vector(win, g.operator.rapply(_by_grade(win, covec)))


# -- one-forms and functions on the sphere ----------------------------------------


@dataclass(frozen=True)
class AbelianSphere:
    points: Tuple[Fraction, ...]
    coordinates: Optional[Tuple[Optional[FormalSeries], ...]] = None

    def __post_init__(self):
        pts = tuple(Fraction(p) for p in self.points)
        if not pts:
            raise ValueError("need at least one point")
        if len(set(pts)) != len(pts):
            raise ValueError("coincident points")
        object.__setattr__(self, "points", pts)
        if self.coordinates is not None and len(self.coordinates) != len(pts):
            raise ValueError("one coordinate per point")

    @property
    def n(self) -> int:
        return len(self.points)

    @classmethod
    def standard(cls, n: int) -> "AbelianSphere":
        return cls(tuple(Fraction(i) for i in range(n)))

    def coordinate(self, i: int) -> Optional[FormalSeries]:
        return None if self.coordinates is None else self.coordinates[i]


def _pole_expansion(points, j: int, k: int, i: int, order: int) -> Dict[int, Fraction]:
    """(z - q_j)^(-k) expanded at q_i in xi = z - q_i, exponents < order."""
    from math import comb

    if i == j:
        return {-k: ONE}
    c = points[i] - points[j]
    return {m: Fraction((-1) ** m * comb(k + m - 1, m)) / c ** (k + m) for m in range(order)}


def _in_coordinate(base: Dict[int, Fraction], low: int, h: Optional[FormalSeries], order: int,
                   differential: bool) -> Dict[int, object]:
    """Re-expand a function (or the coefficient g of g dxi) in eta = h(xi)."""
    if h is None:
        return {e: c for e, c in base.items() if e < order}
    pad = order - low + 2
    f = FormalSeries(base, order + pad)
    hinv = h.truncate(order + pad).comp_inverse()
    out = f.compose(hinv)
    if differential:
        out = out * hinv.derivative()
    return dict(out.truncate(order).coeffs)


@dataclass(frozen=True)
class GaugeTerm:
    """A basis function (k = 0 means the constant) or a basis one-form on the sphere."""

    kind: str  # "function", "form" or "log-form"
    at: Optional[int] = None
    k: int = 0
    other: Optional[int] = None

    def pole(self) -> int:
        return self.k if self.kind != "log-form" else 1

    def expansion(self, sphere: AbelianSphere, i: int, order: int) -> Dict[int, object]:
        pts = sphere.points
        if self.kind == "function" and self.at is None:
            base = {0: ONE}
        elif self.kind == "log-form":
            base = dict(_pole_expansion(pts, self.at, 1, i, order + 2))
            for e, c in _pole_expansion(pts, self.other, 1, i, order + 2).items():
                base[e] = base.get(e, ZERO) - c
        else:
            base = _pole_expansion(pts, self.at, self.k, i, order + self.k + 2)
        return _in_coordinate(base, -self.pole(), sphere.coordinate(i), order, self.kind != "function")

    def label(self) -> str:
        if self.kind == "function":
            return "1" if self.at is None else "(z-q%d)^-%d" % (self.at + 1, self.k)
        if self.kind == "log-form":
            return "((z-q%d)^-1-(z-q%d)^-1)dz" % (self.at + 1, self.other + 1)
        return "(z-q%d)^-%d dz" % (self.at + 1, self.k)


def gauge_terms(n: int, K: int) -> Tuple[List[GaugeTerm], List[GaugeTerm]]:
    """Functions with poles of order <= K and one-forms with poles of order <= K + 1."""
    funcs = [GaugeTerm("function")] + [GaugeTerm("function", j, k) for j in range(n) for k in range(1, K + 1)]
    forms = [GaugeTerm("form", j, k) for j in range(n) for k in range(2, K + 2)]
    forms += [GaugeTerm("log-form", 0, 1, j) for j in range(1, n)]
    return funcs, forms


# -- abelian vacua -----------------------------------------------------------------


class TensorFockWindow:
    """Tensor kets M_1 (x) ... (x) M_N with total energy <= emax and fixed total charge."""

    def __init__(self, n: int, emax: int, charge: int = -1):
        self.n, self.emax, self.charge = n, emax, charge
        self.single = fock_window(emax).states()
        self.single.sort(key=lambda m: (m.energy, m))
        self.states = self.with_charge(charge, emax)
        self.index = {st: i for i, st in enumerate(self.states)}

    def with_charge(self, charge: int, budget: int) -> List[Tuple[MayaDiagram, ...]]:
        out: List[Tuple[MayaDiagram, ...]] = []

        def rec(prefix, left, q):
            if len(prefix) == self.n:
                if q == charge:
                    out.append(tuple(prefix))
                return
            for m in self.single:
                if m.energy > left:
                    break
                prefix.append(m)
                rec(prefix, left - m.energy, q + m.charge)
                prefix.pop()

        rec([], budget, 0)
        return out


def energy(st: Sequence[MayaDiagram]) -> int:
    return sum(m.energy for m in st)


def _rho_sign(st: Sequence[MayaDiagram], j: int) -> int:
    return -1 if sum(m.charge for m in st[:j]) % 2 else 1


@dataclass
class AbelianSystem:
    window: TensorFockWindow
    rows: List[Dict[int, Fraction]]
    labels: List[Tuple[str, Tuple[MayaDiagram, ...]]]

    def matrix(self) -> QMatrix:
        return QMatrix(len(self.rows), len(self.window.states), dict(enumerate(self.rows)))


def abelian_gauge_system(sphere: AbelianSphere, emax: int, K: Optional[int] = None) -> AbelianSystem:
    K = emax if K is None else K
    win = TensorFockWindow(sphere.n, emax, -1)
    funcs, forms = gauge_terms(sphere.n, K)
    order = emax + 2
    rows: List[Dict[int, Fraction]] = []
    labels = []

    def emit(term: GaugeTerm, shift: int, source_charge: int, mode):
        # mode(exponent) -> (doubled index, operator on a vector)
        budget = emax - shift
        if budget < 0:
            return
        exps = [term.expansion(sphere, j, order) for j in range(sphere.n)]
        for st in win.with_charge(source_charge, budget):
            row: Dict[int, Fraction] = {}
            for j in range(sphere.n):
                sign = _rho_sign(st, j)
                for e, c in exps[j].items():
                    img = mode(e, {st[j]: ONE})
                    for m2, x in img.items():
                        st2 = st[:j] + (m2,) + st[j + 1:]
                        idx = win.index.get(st2)
                        if idx is None:
                            raise TruncationError("gauge row left the window")
                        v = row.get(idx, ZERO) + sign * c * x
                        if v:
                            row[idx] = v
                        else:
                            row.pop(idx, None)
            if row:
                rows.append(row)
                labels.append((term.label(), st))

    for w in forms:  # psi[omega] = sum a_n psi_{n+1/2}, raises energy by at most pole - 1
        emit(w, w.pole() - 1, 0, lambda e, v: _psi2(2 * e + 1, v))
    for f in funcs:  # psibar[f] = sum b_m psibar_{m+1/2}, raises energy by at most pole
        emit(f, f.pole(), -2, lambda e, v: _psibar2(2 * e + 1, v))
    return AbelianSystem(win, rows, labels)


@dataclass
class AbelianVacuum:
    window: TensorFockWindow
    coeffs: Dict[int, Fraction]

    def value(self, st: Sequence[MayaDiagram]) -> Fraction:
        i = self.window.index.get(tuple(st))
        return ZERO if i is None else self.coeffs.get(i, ZERO)

    def scaled(self, c) -> "AbelianVacuum":
        return AbelianVacuum(self.window, {i: c * x for i, x in self.coeffs.items()})

    def normalized_at(self, st: Sequence[MayaDiagram]) -> "AbelianVacuum":
        v = self.value(st)
        if not v:
            raise ZeroDivisionError("vacuum vanishes on %r" % (st,))
        return self.scaled(ONE / v)

    def as_dict(self) -> Dict[Tuple[MayaDiagram, ...], Fraction]:
        return {self.window.states[i]: x for i, x in self.coeffs.items()}

    def residual(self, system: AbelianSystem) -> List[Fraction]:
        return [sum((x * self.coeffs.get(i, ZERO) for i, x in r.items()), ZERO) for r in system.rows]

    def to_json(self) -> dict:
        return {"terms": [{"state": [m.to_json() for m in self.window.states[i]], "value": str(x)}
                          for i, x in sorted(self.coeffs.items())]}


@dataclass
class AbelianVacua:
    sphere: AbelianSphere
    emax: int
    elements: List[AbelianVacuum]
    certificate: dict

    @property
    def dim(self) -> int:
        return len(self.elements)


def abelian_vacua_at(sphere: AbelianSphere, emax: int, K: Optional[int] = None) -> AbelianVacua:
    sysm = abelian_gauge_system(sphere, emax, K)
    ns = nullspace(sysm.matrix())
    elems = [AbelianVacuum(sysm.window, v) for v in ns]
    cert = {"emax": emax, "dim": len(elems), "rows": len(sysm.rows), "unknowns": len(sysm.window.states)}
    return AbelianVacua(sphere, emax, elems, cert)


def abelian_vacua(sphere: AbelianSphere, emax: Optional[int] = None, max_emax: Optional[int] = None) -> AbelianVacua:
    """The vacua line, with successive truncations compared; any dimension other than 1 is an error."""
    from .vacua_p1 import StabilizationError, max_truncation

    cap = max_truncation() if max_emax is None else max_emax
    e = 1 if emax is None else emax
    history = []
    prev = None
    while e <= cap:
        cur = abelian_vacua_at(sphere, e)
        history.append(cur.certificate)
        if prev is not None and prev.dim == cur.dim:
            cur.certificate = {"history": history, "stable_dim": cur.dim, "emax": e}
            if cur.dim != 1:
                raise StabilizationError("abelian vacua stabilized at dimension %d" % cur.dim, cur.certificate)
            return cur
        prev = cur
        e += 1
    raise StabilizationError("abelian vacua did not stabilize up to emax=%d" % cap, {"history": history})


def abelian_propagate(vac: AbelianVacua, new_point, coordinate: Optional[FormalSeries] = None) -> AbelianVacua:
    """Lift along v -> v (x) |0> to the sphere with one more point."""
    sphere = vac.sphere
    q = Fraction(new_point)
    coords = None
    if sphere.coordinates is not None or coordinate is not None:
        coords = tuple(sphere.coordinates or (None,) * sphere.n) + (coordinate,)
    big = AbelianSphere(sphere.points + (q,), coords)
    new = abelian_vacua_at(big, vac.emax)
    lifted = []
    if new.elements and vac.elements:
        old_win = vac.elements[0].window
        rmat = [restrict_last_vacuum(e, old_win) for e in new.elements]
        for old in vac.elements:
            coeff = solve_left(rmat, old.coeffs)
            comb: Dict[int, Fraction] = {}
            for c, e in zip(coeff, new.elements):
                for i, x in e.coeffs.items():
                    comb[i] = comb.get(i, ZERO) + c * x
            lifted.append(AbelianVacuum(new.elements[0].window, {i: x for i, x in comb.items() if x}))
    cert = dict(new.certificate)
    cert["source_dim"] = vac.dim
    return AbelianVacua(big, vac.emax, lifted, cert)


def restrict_last_vacuum(element: AbelianVacuum, old_window: TensorFockWindow) -> Dict[int, Fraction]:
    """<Phi|(v (x) |0>) as a covector on the window with one point fewer."""
    vac0 = vacuum(0)
    out = {}
    for i, x in element.coeffs.items():
        st = element.window.states[i]
        if st[-1] == vac0:
            j = old_window.index.get(st[:-1])
            if j is not None:
                out[j] = x
    return out


def restrict_slot(element: AbelianVacuum, slot: int) -> Vec:
    """<Phi| with |0> inserted in every slot except ``slot``, as a one-point covector."""
    vac0 = vacuum(0)
    out: Vec = {}
    for i, x in element.coeffs.items():
        st = element.window.states[i]
        if all(m == vac0 for k, m in enumerate(st) if k != slot):
            out[st[slot]] = x
    return out


def apply_abelian_coordinate_change(element: AbelianVacuum, hs: Sequence[Optional[FormalSeries]]) -> AbelianVacuum:
    """<Phi| G[h_1] (x) ... (x) G[h_N]; G preserves charge so no fermionic signs arise."""
    win = element.window
    fw = fock_window(win.emax)
    images = []
    for h in hs:
        if h is None:
            images.append(None)
            continue
        g = fock_coordinate_change(win.emax, h).operator
        img: Dict[MayaDiagram, Vec] = {}
        for (t, s), b in g.blocks.items():
            for i, r in b.rows.items():
                for j, x in r.items():
                    img.setdefault(fw.grades[s][j], {})[fw.grades[t][i]] = x
        images.append(img)
    out: Dict[int, Fraction] = {}
    for idx, st in enumerate(win.states):
        acc = {(): ONE}
        for j, m in enumerate(st):
            col = {m: ONE} if images[j] is None else images[j].get(m, {})
            acc = {pre + (m2,): c * x for pre, c in acc.items() for m2, x in col.items()}
        s = sum((c * element.value(st2) for st2, c in acc.items()), ZERO)
        if s:
            out[idx] = s
    return AbelianVacuum(win, out)


# -- the preferred vacuum on the sphere ------------------------------------------------


def normalized_forms(h: Optional[FormalSeries], count: int, order: int) -> List[Dict[int, object]]:
    """Coefficients g_n of the one-forms g_n(eta) d eta, n = 1..count, with
    g_n = eta^(-n-1) + (regular part): the genus-0 normalized basis with a pole at the point.
    """
    raw = []
    for k in range(2, count + 2):
        raw.append(_in_coordinate({-k: ONE}, -k, h, order, True))
    out: List[Dict[int, object]] = []
    for n in range(1, count + 1):
        g = dict(raw[n - 1])
        # clear eta^(-j), j = n .. 2, with the normalized forms of lower pole order
        for j in range(n, 1, -1):
            c = g.get(-j, ZERO)
            if c:
                for e, x in out[j - 2].items():
                    g[e] = g.get(e, ZERO) - c * x
        lead = g.get(-n - 1, ZERO)
        g = {e: x / lead for e, x in g.items() if x}
        out.append(g)
    return out


def wedge_covector(forms: Sequence[Dict[int, object]], charge: int, emax: int) -> Vec:
    """The semi-infinite wedge ... e(w_2) ^ e(w_1) restricted to charge ``charge``, energy <= emax.

    e(sum a_m eta^m d eta) = sum a_m e^(m+1/2).  The first ``charge + 1`` forms
    may be arbitrary; form number n beyond them must read eta^(charge-n) + regular,
    so that deep columns are unit vectors and the value on |M> is the
    determinant of a finite top block.
    """
    from .exact import det

    extra = charge + 1
    out: Vec = {}
    base = charge * (charge + 1) // 2
    for d in range(emax - base + 1):
        for m in enumerate_maya(charge, d):
            size = len(m.partition) + max(extra, 0)
            if size == 0:
                out[m] = ONE
                continue
            if size > len(forms):
                raise TruncationError("need %d normalized forms, have %d" % (size, len(forms)))
            pos = m.positions(size)
            v = det([[forms[n].get((s - 1) // 2, ZERO) for s in pos] for n in range(size)])
            if v:
                out[m] = v
    return out


def preferred_vacuum_p1(emax: int, h: Optional[FormalSeries] = None, genus: int = 0) -> Vec:
    """The wedge of the genus-0 normalized forms at one point, in the coordinate eta = h(xi).

    Lies in charge -1; only energies <= emax are returned.
    """
    if genus != 0:
        raise DomainError("preferred vacua are implemented on the sphere only")
    return wedge_covector(normalized_forms(h, emax + 1, emax + 2), -1, emax)


# -- the pairing between charge p and -p-1 ---------------------------------------------


def _blocks_up_to(emax: int) -> List[Tuple[int, int]]:
    out = []
    p = 0
    while p * (p + 1) // 2 <= emax:
        for q in (p, -p - 1):
            for d in range(emax - p * (p + 1) // 2 + 1):
                out.append((q, d))
        p += 1
    return sorted(out)


@lru_cache(maxsize=None)
def sewing_element(emax: int) -> Dict[Tuple[MayaDiagram, MayaDiagram], Fraction]:
    """Omega = sum_E tau^E Omega_E in F (x) F, charges (p, -p-1), fixed by

        (psi_{n+1/2} (x) 1) Omega = tau^(n+1) rho_2(psi_{-n-3/2}) Omega,
        (psibar_{m+1/2} (x) 1) Omega = -tau^m rho_2(psibar_{-m+1/2}) Omega,

    the local gauge conditions across a node z w = tau, normalized so that
    Omega_0 = |0> (x) |-1> - |-1> (x) |0>.  Keys are (left, right) diagrams.
    """
    unknowns = []
    for p, d in _blocks_up_to(emax):
        for a in enumerate_maya(p, d):
            for b in enumerate_maya(-p - 1, d):
                unknowns.append((a, b))
    index = {k: i for i, k in enumerate(unknowns)}
    rows: List[Dict[int, Fraction]] = []

    def apply_left(op, pairs):
        out: Dict[Tuple[MayaDiagram, MayaDiagram], Dict[int, Fraction]] = {}
        for (a, b), i in pairs:
            for a2, x in op({a: ONE}).items():
                out.setdefault((a2, b), {})[i] = out.setdefault((a2, b), {}).get(i, ZERO) + x
        return out

    def apply_right(op, pairs):
        out: Dict[Tuple[MayaDiagram, MayaDiagram], Dict[int, Fraction]] = {}
        for (a, b), i in pairs:
            s = -1 if a.charge % 2 else 1
            for b2, x in op({b: ONE}).items():
                out.setdefault((a, b2), {})[i] = out.setdefault((a, b2), {}).get(i, ZERO) + s * x
        return out

    def by_energy(e):
        return [(k, i) for k, i in index.items() if k[0].energy == e]

    for e in range(emax + 1):
        here = by_energy(e)
        for n in range(-emax - 2, emax + 2):
            e2 = e - n - 1
            # psi condition: left side from Omega_e, right side from Omega_{e2}
            if 0 <= e2 <= emax:
                lhs = apply_left(lambda v: _psi2(2 * n + 1, v), here)
                rhs = apply_right(lambda v: _psi2(-2 * n - 3, v), by_energy(e2))
                for key in set(lhs) | set(rhs):
                    row = dict(lhs.get(key, {}))
                    for i, x in rhs.get(key, {}).items():
                        row[i] = row.get(i, ZERO) - x
                    row = {i: x for i, x in row.items() if x}
                    if row:
                        rows.append(row)
            e3 = e - n
            if 0 <= e3 <= emax:
                lhs = apply_left(lambda v: _psibar2(2 * n + 1, v), here)
                rhs = apply_right(lambda v: _psibar2(-2 * n + 1, v), by_energy(e3))
                for key in set(lhs) | set(rhs):
                    row = dict(lhs.get(key, {}))
                    for i, x in rhs.get(key, {}).items():
                        row[i] = row.get(i, ZERO) + x
                    row = {i: x for i, x in row.items() if x}
                    if row:
                        rows.append(row)
    ns = nullspace(QMatrix(len(rows), len(unknowns), dict(enumerate(rows))))
    if len(ns) != 1:
        raise ValueError("sewing element not unique at emax=%d (%d solutions)" % (emax, len(ns)))
    v = ns[0]
    lead = v.get(index[(vacuum(0), vacuum(-1))], ZERO)
    if not lead:
        raise ValueError("sewing element vanishes at tau^0")
    return {unknowns[i]: x / lead for i, x in v.items()}


def pairing_plus(p: int, d: int, emax: Optional[int] = None) -> QMatrix:
    """Gram matrix {M|N}_+ for M in F_d(p), N in F_d(-p-1), rows/cols in enumerate_maya order.

    The dual-basis tensor sum_i v_i (x) v^i of a block is (-1)^(p+d) times the
    matching block of the sewing element, and the Gram matrix is its inverse
    transpose.
    """
    e = d + p * (p + 1) // 2
    omega = sewing_element(max(e, 1) if emax is None else emax)
    left, right = enumerate_maya(p, d), enumerate_maya(-p - 1, d)
    sign = -1 if (p + d) % 2 else 1
    cas = QMatrix(len(left), len(right))
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            x = omega.get((a, b), ZERO)
            if x:
                cas.add_entry(i, j, sign * x)
    return inverse(cas).T


def dual_basis_plus(p: int, d: int) -> Tuple[List[MayaDiagram], List[Vec]]:
    """v_i = |M_i> and the dual vectors v^i in F_d(-p-1) under the pairing."""
    left, right = enumerate_maya(p, d), enumerate_maya(-p - 1, d)
    gram = pairing_plus(p, d)
    # v^i = sum_N X[i,N] |N>, with gram @ X^T = Id
    x = inverse(gram).T
    duals = [{right[j]: c for j, c in x.rows.get(i, {}).items()} for i in range(len(left))]
    return left, duals
