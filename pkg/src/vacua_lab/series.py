"""Truncated formal Laurent series in one variable and the formal coordinate-change group.

A series is known modulo xi^order.  Coefficients are Fractions; the few
operations that leave the rationals (flows with a nonzero linear part, logs of
non-unipotent maps) switch to sympy expressions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Mapping

from .exact import ONE, ZERO, frac, fstr


class DomainError(ValueError):
    pass


EXACT = 10 ** 9  # truncation order used for exactly known polynomials


@dataclass(frozen=True)
class FormalSeries:
    coeffs: Mapping[int, object]
    order: int  # valid for exponents < order

    def __post_init__(self):
        clean = {k: (Fraction(v) if isinstance(v, int) else v) for k, v in self.coeffs.items()
                 if k < self.order and not _zeroish(v)}
        object.__setattr__(self, "coeffs", clean)

    # constructors
    @classmethod
    def from_list(cls, values: Iterable, order: int | None = None, start: int = 0) -> "FormalSeries":
        vals = [v if not isinstance(v, (int, str)) else frac(v) for v in values]
        if order is None:
            order = start + len(vals)
        return cls({start + k: v for k, v in enumerate(vals)}, order)

    @classmethod
    def monomial(cls, k: int, order: int, c=ONE) -> "FormalSeries":
        return cls({k: c}, order)

    @classmethod
    def identity(cls, order: int) -> "FormalSeries":
        return cls({1: ONE}, order)

    def __getitem__(self, k: int):
        if k >= self.order:
            raise IndexError("coefficient %d beyond truncation order %d" % (k, self.order))
        return self.coeffs.get(k, ZERO)

    def valuation(self) -> int | None:
        return min(self.coeffs) if self.coeffs else None

    def truncate(self, order: int) -> "FormalSeries":
        return FormalSeries(self.coeffs, min(order, self.order))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FormalSeries):
            return NotImplemented
        n = min(self.order, other.order)
        keys = {k for k in self.coeffs if k < n} | {k for k in other.coeffs if k < n}
        return all(_zeroish(self[k] - other[k]) for k in keys)

    def __hash__(self):
        return hash((tuple(sorted(self.coeffs.items())), self.order))

    # ring operations
    def __add__(self, other: "FormalSeries") -> "FormalSeries":
        n = min(self.order, other.order)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, ZERO) + v
        return FormalSeries(out, n)

    def __neg__(self) -> "FormalSeries":
        return FormalSeries({k: -v for k, v in self.coeffs.items()}, self.order)

    def __sub__(self, other: "FormalSeries") -> "FormalSeries":
        return self + (-other)

    def scale(self, c) -> "FormalSeries":
        return FormalSeries({k: c * v for k, v in self.coeffs.items()}, self.order)

    def __mul__(self, other):
        if not isinstance(other, FormalSeries):
            return self.scale(other)
        va, vb = self.valuation(), other.valuation()
        # a known to xi^Na times b with valuation vb is known to xi^(Na+vb)
        n = min(self.order + (vb if vb is not None else other.order),
                other.order + (va if va is not None else self.order))
        out: Dict[int, object] = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                if i + j < n:
                    out[i + j] = out.get(i + j, ZERO) + a * b
        return FormalSeries(out, n)

    __rmul__ = scale

    def power(self, k: int) -> "FormalSeries":
        if k < 0:
            return self.reciprocal().power(-k)
        if k == 0:
            return FormalSeries({0: ONE}, EXACT)
        out = self
        for _ in range(k - 1):
            out = out * self
        return out

    def reciprocal(self) -> "FormalSeries":
        v = self.valuation()
        if v is None:
            raise ZeroDivisionError("reciprocal of zero series")
        lead = self.coeffs[v]
        inv_lead = ONE / lead if isinstance(lead, Fraction) else 1 / lead
        rel = self.order - v  # number of known terms
        # unit part u = self / (lead xi^v) = 1 + ...
        u = {k - v: c * inv_lead for k, c in self.coeffs.items()}
        inv = {0: ONE}
        for n in range(1, rel):
            s = ZERO
            for k in range(1, n + 1):
                c = u.get(k)
                if c is not None and (n - k) in inv:
                    s += c * inv[n - k]
            if not _zeroish(s):
                inv[n] = -s
        return FormalSeries({k - v: c * inv_lead for k, c in inv.items()}, rel - v)

    def derivative(self) -> "FormalSeries":
        return FormalSeries({k - 1: k * v for k, v in self.coeffs.items() if k}, self.order - 1)

    def residue(self):
        if self.order <= -1:
            raise DomainError("residue beyond truncation")
        return self.coeffs.get(-1, ZERO)

    def compose(self, h: "FormalSeries") -> "FormalSeries":
        """self(h(xi)) for h with valuation >= 1."""
        vh = h.valuation()
        if vh is None or vh < 1:
            raise DomainError("inner series must vanish at 0")
        if vh != 1:
            raise DomainError("only valuation-one inner series are supported")
        v = self.valuation()
        n_out = min(self.order, h.order if v is None or v >= 1 else h.order - 1 + v)
        out = FormalSeries({}, n_out)
        hpow_cache: Dict[int, FormalSeries] = {}
        for k in sorted(self.coeffs):
            if k * vh >= n_out:
                continue
            if k not in hpow_cache:
                hpow_cache[k] = h.power(k) if k >= 0 else h.reciprocal().power(-k)
            out = out + hpow_cache[k].scale(self.coeffs[k]).truncate(n_out)
        return out.truncate(n_out)

    def comp_inverse(self) -> "FormalSeries":
        """Compositional inverse of h = a xi + ..., a != 0."""
        if self.valuation() != 1:
            raise DomainError("not an invertible coordinate change")
        a = self.coeffs[1]
        n = self.order
        g = FormalSeries({1: ONE / a if isinstance(a, Fraction) else 1 / a}, n)
        # Newton-free fixed point: g <- g - (h(g) - xi)/a  converges one order per step
        for _ in range(n):
            r = self.compose(g) - FormalSeries.identity(n)
            if all(_zeroish(v) for v in r.coeffs.values()):
                break
            g = (g - r.scale(ONE / a if isinstance(a, Fraction) else 1 / a)).truncate(n)
        return g.truncate(n)

    def map(self, fn) -> "FormalSeries":
        return FormalSeries({k: fn(v) for k, v in self.coeffs.items()}, self.order)

    def to_json(self) -> dict:
        return {"order": self.order, "coeffs": {str(k): _cstr(v) for k, v in sorted(self.coeffs.items())}}

    def __repr__(self) -> str:
        terms = " + ".join("%s*x^%d" % (_cstr(v), k) for k, v in sorted(self.coeffs.items()))
        return "FormalSeries(%s + O(x^%d))" % (terms or "0", self.order)


def _zeroish(v) -> bool:
    if isinstance(v, (int, Fraction)):
        return v == 0
    try:
        return bool(v == 0) or (getattr(v, "is_zero", None) is True)
    except TypeError:
        return False


def _cstr(v) -> str:
    if isinstance(v, (int, Fraction)):
        return fstr(v)
    return str(v)


def series(values, order=None, start=0) -> FormalSeries:
    return FormalSeries.from_list(values, order, start)


# -- vector fields ----------------------------------------------------------


def apply_field(l: FormalSeries, f: FormalSeries) -> FormalSeries:
    """The derivation l(xi) d/dxi applied to f."""
    return l * f.derivative()


def schwarzian(h: FormalSeries, order: int | None = None) -> FormalSeries:
    if h.valuation() != 1:
        raise DomainError("not an invertible coordinate change")
    d1 = h.derivative()
    d2 = d1.derivative()
    d3 = d2.derivative()
    inv = d1.reciprocal()
    r2 = d2 * inv
    out = d3 * inv - (r2 * r2).scale(Fraction(3, 2))
    return out.truncate(order) if order is not None else out


def _exp_nilpotent(l: FormalSeries, order: int) -> FormalSeries:
    term = FormalSeries.identity(order)
    out = term
    k = 0
    while True:
        k += 1
        term = apply_field(l, term).truncate(order).scale(Fraction(1, k))
        if not term.coeffs:
            return out.truncate(order)
        out = out + term


def formal_exp(l: FormalSeries, order: int) -> FormalSeries:
    """h = exp(l)(xi) for a vector field l(xi) d/dxi with l(0) = 0."""
    if l.coeffs.get(0) and not _zeroish(l.coeffs.get(0)):
        raise DomainError("vector field must vanish at the origin")
    if any(k < 0 for k in l.coeffs):
        raise DomainError("vector field must be regular")
    if l.order < order:
        raise DomainError("vector field known only to order %d" % l.order)
    alpha = l.coeffs.get(1, ZERO)
    if _zeroish(alpha):
        return _exp_nilpotent(l, order)
    return _exp_flow(l, order)


def _exp_flow(l: FormalSeries, order: int) -> FormalSeries:
    """Time-1 flow via exponential-polynomial coefficients c_n(t) = sum_j A_nj e^{j alpha t}."""
    import sympy

    alpha = sympy.sympify(l.coeffs[1])
    E = sympy.exp(alpha)
    lk = {k: sympy.sympify(v) for k, v in l.coeffs.items() if k >= 2}
    # c[n] : {j: A}
    c: Dict[int, Dict[int, object]] = {1: {1: sympy.Integer(1)}}

    def mul(p, q):
        out: Dict[int, object] = {}
        for i, a in p.items():
            for j, b in q.items():
                out[i + j] = out.get(i + j, 0) + a * b
        return out

    # powers[k][n]: coefficient of xi^n in phi^k, as exponential polynomial
    for n in range(2, order):
        forcing: Dict[int, object] = {}
        for k, coef in lk.items():
            if k > n:
                continue
            # coefficient of xi^n in phi^k using c_1..c_{n-1}
            for comp in _compositions(n, k):
                term = {0: sympy.Integer(1)}
                for part in comp:
                    term = mul(term, c[part])
                for j, a in term.items():
                    forcing[j] = forcing.get(j, 0) + coef * a
        cn: Dict[int, object] = {}
        for j, b in forcing.items():
            # d/dt (A e^{j a t}) = alpha A e^{j a t} + b e^{j a t}  ->  A = b / ((j-1) alpha)
            cn[j] = b / ((j - 1) * alpha)
        cn[1] = -sum(cn.values()) if cn else sympy.Integer(0)
        c[n] = {j: sympy.simplify(a) for j, a in cn.items()}
    out = {}
    for n in range(1, order):
        val = sympy.simplify(sum(a * E ** j for j, a in c[n].items()))
        out[n] = _demote(val)
    return FormalSeries(out, order)


def _compositions(n: int, k: int):
    """Ordered k-tuples of positive integers summing to n."""
    if k == 1:
        yield (n,)
        return
    for first in range(1, n - k + 2):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def _demote(v):
    import sympy

    v = sympy.nsimplify(v) if getattr(v, "is_Rational", False) else v
    if getattr(v, "is_Rational", False):
        return Fraction(int(v.p), int(v.q))
    return v


def formal_log(h: FormalSeries, order: int) -> FormalSeries:
    """The unique l(xi) d/dxi with exp(l) = h, for h = a xi + ..., a > 0."""
    if h.valuation() != 1:
        raise DomainError("not an invertible coordinate change")
    a = h.coeffs[1]
    if not (a > 0):
        raise DomainError("leading coefficient must be positive")
    if h.order < order:
        raise DomainError("coordinate change known only to order %d" % h.order)
    if a == 1:
        return _log_unipotent(h.truncate(order), order)
    return _log_general(h.truncate(order), order)


def _log_unipotent(h: FormalSeries, order: int) -> FormalSeries:
    # composition operator C f = f o h; l(xi) = log(C)(xi) = sum (-1)^{k+1} (C - 1)^k xi / k
    term = FormalSeries.identity(order)
    out = FormalSeries({}, order)
    k = 0
    while True:
        k += 1
        term = (term.compose(h) - term).truncate(order)
        if not term.coeffs:
            return out
        out = out + term.scale(Fraction((-1) ** (k + 1), k))


def _log_general(h: FormalSeries, order: int) -> FormalSeries:
    import sympy

    alpha = sympy.log(sympy.Rational(h.coeffs[1].numerator, h.coeffs[1].denominator)) if isinstance(
        h.coeffs[1], Fraction) else sympy.log(h.coeffs[1])
    E = sympy.exp(alpha)
    l = {1: alpha}
    for n in range(2, order):
        trial = _exp_flow(FormalSeries(dict(l), n + 1), n + 1)
        diff = sympy.sympify(h[n]) - sympy.sympify(trial[n])
        response = E * (E ** (n - 1) - 1) / ((n - 1) * alpha)
        l[n] = sympy.simplify(diff / response)
    return FormalSeries({k: _demote(v) for k, v in l.items()}, order)
