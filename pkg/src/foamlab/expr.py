"""Symbolic smooth expressions in canonical sum-of-products form.

An :class:`Expr` is a polynomial with exact rational coefficients over
*atoms*: coordinate variables and the primitives ``exp``, ``sin``, ``cos``,
``bump``, ``sstep`` and the guarded reciprocal ``inv``.  Atoms carry their own
(canonical) argument expression.  Bump and sstep atoms also carry a derivative
order, so differentiation never leaves the globally smooth fragment:

    d/dy bump^(m)(y)  = bump^(m+1)(y)
    d/dy sstep^(m)(y) = sstep^(m+1)(y),    sstep^(1) = bump / int(bump)

Every constructor returns canonical form, so structural equality is equality
of the term tuples and ``simplify`` is the identity on constructed values.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import special

_KIND_RANK = {"x": 0, "exp": 1, "sin": 2, "cos": 3, "bump": 4, "sstep": 5, "inv": 6}

MultiIndex = tuple[int, ...]


class Atom:
    __slots__ = ("kind", "order", "arg", "key", "_hash")

    def __init__(self, kind: str, order: int = 0, arg: "Expr | None" = None):
        self.kind = kind
        self.order = order
        self.arg = arg
        self.key = (_KIND_RANK[kind], order, arg.key if arg is not None else ())
        self._hash = hash(self.key)

    def __eq__(self, other):
        return isinstance(other, Atom) and self.key == other.key

    def __hash__(self):
        return self._hash

    def __setattr__(self, name, value):
        if hasattr(self, "_hash"):
            raise AttributeError("Atom is immutable")
        object.__setattr__(self, name, value)

    def __repr__(self):
        return atom_text(self)


Monomial = tuple[tuple[Atom, int], ...]


class Expr:
    """Immutable canonical polynomial over atoms."""

    __slots__ = ("terms", "key", "_hash", "__dict__")

    def __init__(self, terms: Mapping[Monomial, Fraction] | Iterable[tuple[Monomial, Fraction]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean = [(m, Fraction(c)) for m, c in items if c != 0]
        clean.sort(key=lambda t: _mono_key(t[0]))
        object.__setattr__(self, "terms", tuple(clean))
        object.__setattr__(self, "key", tuple((_mono_key(m), c) for m, c in self.terms))
        object.__setattr__(self, "_hash", hash(self.key))

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    # -- structural ---------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = const(other)
        return isinstance(other, Expr) and self.key == other.key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    def __str__(self):
        return to_text(self)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(not m for m, _ in self.terms)

    @property
    def constant_value(self) -> Fraction:
        if not self.is_constant:
            raise ValueError("expression is not constant")
        return self.terms[0][1] if self.terms else Fraction(0)

    @cached_property
    def atoms(self) -> frozenset[Atom]:
        out = set()
        for m, _ in self.terms:
            for a, _ in m:
                out.add(a)
                if a.arg is not None:
                    out |= a.arg.atoms
        return frozenset(out)

    @cached_property
    def max_var(self) -> int:
        """Largest variable index used, -1 if none."""
        return max((a.order for a in self.atoms if a.kind == "x"), default=-1)

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = _lift(other)
        acc = dict(self.terms)
        for m, c in other.terms:
            acc[m] = acc.get(m, 0) + c
        return Expr(acc)

    __radd__ = __add__

    def __neg__(self):
        return Expr((m, -c) for m, c in self.terms)

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        acc: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = _mono_mul(m1, m2)
                acc[m] = acc.get(m, 0) + c1 * c2
        return Expr(acc)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result, base = ONE, self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result


def _lift(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Fraction)):
        return const(v)
    raise TypeError(f"cannot use {type(v).__name__} in an expression")


def _mono_key(m: Monomial):
    return tuple((a.key, e) for a, e in m)


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    acc: dict[Atom, int] = dict(m1)
    for a, e in m2:
        acc[a] = acc.get(a, 0) + e
    return tuple(sorted(acc.items(), key=lambda t: t[0].key))


def _atom_expr(a: Atom) -> Expr:
    return Expr({((a, 1),): Fraction(1)})


def const(c) -> Expr:
    c = Fraction(c)
    return Expr({(): c}) if c else ZERO


ZERO = Expr()
ONE = Expr({(): Fraction(1)})


def var(i: int) -> Expr:
    """Coordinate x_{i+1} (0-based index)."""
    return _atom_expr(Atom("x", i))


def exp(e: Expr) -> Expr:
    e = _lift(e)
    if e.is_zero:
        return ONE
    return _atom_expr(Atom("exp", 0, e))


def sin(e: Expr) -> Expr:
    e = _lift(e)
    if e.is_zero:
        return ZERO
    return _atom_expr(Atom("sin", 0, e))


def cos(e: Expr) -> Expr:
    e = _lift(e)
    if e.is_zero:
        return ONE
    return _atom_expr(Atom("cos", 0, e))


def bump(e: Expr, order: int = 0) -> Expr:
    e = _lift(e)
    if e.is_constant and abs(e.constant_value) >= 1:
        return ZERO
    if e.is_zero and order % 2 == 1:
        return ZERO  # odd derivatives of an even function vanish at 0
    return _atom_expr(Atom("bump", order, e))


def sstep(e: Expr, order: int = 0) -> Expr:
    e = _lift(e)
    if e.is_constant:
        v = e.constant_value
        if order == 0:
            if v <= -1:
                return ZERO
            if v >= 1:
                return ONE
            if v == 0:
                return const(Fraction(1, 2))
        else:
            if abs(v) >= 1:
                return ZERO
            if v == 0 and order % 2 == 0:
                return ZERO  # even derivatives of sstep are odd derivatives of the bump
    return _atom_expr(Atom("sstep", order, e))


def nbump(e: Expr) -> Expr:
    """Normalised bump: the derivative of sstep."""
    return sstep(e, 1)


class GuardError(ValueError):
    pass


def inv(e: Expr) -> Expr:
    e = _lift(e)
    if e.is_constant:
        v = e.constant_value
        if v == 0:
            raise ZeroDivisionError("inv(0)")
        return const(1 / v)
    return _atom_expr(Atom("inv", 0, e))


def _rebuild_atom(a: Atom, arg: Expr) -> Expr:
    if a.kind == "exp":
        return exp(arg)
    if a.kind == "sin":
        return sin(arg)
    if a.kind == "cos":
        return cos(arg)
    if a.kind == "bump":
        return bump(arg, a.order)
    if a.kind == "sstep":
        return sstep(arg, a.order)
    if a.kind == "inv":
        return inv(arg)
    raise AssertionError(a.kind)


def map_atoms(e: Expr, fn) -> Expr:
    """Rebuild ``e`` replacing each top-level atom ``a`` by ``fn(a)``."""
    cache: dict[Atom, Expr] = {}
    total = ZERO
    for m, c in e.terms:
        prod = const(c)
        for a, k in m:
            if a not in cache:
                cache[a] = fn(a)
            prod = prod * cache[a] ** k
        total = total + prod
    return total


def simplify(e: Expr) -> Expr:
    """Re-canonicalise bottom-up; constructors already canonicalise, so this is idempotent."""
    def fn(a: Atom) -> Expr:
        if a.arg is None:
            return _atom_expr(a)
        return _rebuild_atom(a, simplify(a.arg))
    return map_atoms(e, fn)


def substitute(e: Expr, values: Mapping[int, Expr]) -> Expr:
    """Replace variables by expressions."""
    def fn(a: Atom) -> Expr:
        if a.kind == "x":
            return values.get(a.order, _atom_expr(a))
        return _rebuild_atom(a, substitute(a.arg, values))
    return map_atoms(e, fn)


# ---------------------------------------------------------------------------
# differentiation


def _diff_atom(a: Atom, j: int) -> Expr:
    if a.kind == "x":
        return ONE if a.order == j else ZERO
    darg = diff1(a.arg, j)
    if darg.is_zero:
        return ZERO
    if a.kind == "exp":
        outer = exp(a.arg)
    elif a.kind == "sin":
        outer = cos(a.arg)
    elif a.kind == "cos":
        outer = -sin(a.arg)
    elif a.kind == "bump":
        outer = bump(a.arg, a.order + 1)
    elif a.kind == "sstep":
        outer = sstep(a.arg, a.order + 1)
    elif a.kind == "inv":
        outer = -(inv(a.arg) ** 2)
    else:
        raise AssertionError(a.kind)
    return outer * darg


_DIFF_CACHE: dict[tuple, Expr] = {}


def diff1(e: Expr, j: int) -> Expr:
    key = (e.key, j)
    hit = _DIFF_CACHE.get(key)
    if hit is not None:
        return hit
    acc = ZERO
    for m, c in e.terms:
        for idx, (a, k) in enumerate(m):
            da = _diff_atom(a, j)
            if da.is_zero:
                continue
            rest = [(b, kb) for b, kb in m if b != a]
            if k > 1:
                rest.append((a, k - 1))
            rest_expr = Expr({tuple(sorted(rest, key=lambda t: t[0].key)): c * k})
            acc = acc + rest_expr * da
    if len(_DIFF_CACHE) > 200_000:
        _DIFF_CACHE.clear()
    _DIFF_CACHE[key] = acc
    return acc


def diff(e: Expr, p: MultiIndex) -> Expr:
    """Exact partial derivative D^p e."""
    for j, k in enumerate(p):
        if k < 0:
            raise ValueError("multi-index entries must be non-negative")
        for _ in range(k):
            e = diff1(e, j)
    return e


def multi_indices(n: int, max_order: int) -> list[MultiIndex]:
    """All p in N^n with |p| <= max_order, graded then lexicographic."""
    out: list[MultiIndex] = []

    def rec(prefix, remaining, slots):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], max_order, n)
    return sorted(out, key=lambda p: (sum(p), tuple(-v for v in p)))


# ---------------------------------------------------------------------------
# numeric evaluation


class DomainError(ValueError):
    pass


def _atom_value(a: Atom, x, cache) -> float:
    if a.kind == "x":
        return float(x[a.order])
    y = eval_expr(a.arg, x, cache)
    if a.kind == "exp":
        return math.exp(y)
    if a.kind == "sin":
        return math.sin(y)
    if a.kind == "cos":
        return math.cos(y)
    if a.kind == "bump":
        return special.bump_d(a.order, y)
    if a.kind == "sstep":
        return special.sstep_d(a.order, y)
    if a.kind == "inv":
        if y == 0:
            raise ZeroDivisionError("inv evaluated at a zero of its argument")
        return 1.0 / y
    raise AssertionError(a.kind)


def eval_expr(e: Expr, x: Sequence, cache: dict | None = None) -> float:
    if cache is None:
        cache = {}
    total = 0.0
    for m, c in e.terms:
        prod = float(c)
        for a, k in m:
            v = cache.get(a)
            if v is None:
                v = _atom_value(a, x, cache)
                cache[a] = v
            prod *= v ** k
        total += prod
    return total


def evaluate(e: Expr, x: Sequence, omega=None) -> float:
    """Float value of ``e`` at a rational point; ``omega`` (a Box) enables the domain check."""
    if omega is not None and not omega.contains(x):
        raise DomainError(f"point {tuple(str(v) for v in x)} lies outside the domain")
    return eval_expr(e, x)


def _atom_array(a: Atom, X: np.ndarray, cache) -> np.ndarray:
    if a.kind == "x":
        return X[a.order]
    y = eval_array(a.arg, X, cache)
    if a.kind == "exp":
        return np.exp(y)
    if a.kind == "sin":
        return np.sin(y)
    if a.kind == "cos":
        return np.cos(y)
    if a.kind == "bump":
        return special.bump_d_array(a.order, y)
    if a.kind == "sstep":
        return special.sstep_d_array(a.order, y)
    if a.kind == "inv":
        with np.errstate(divide="ignore"):
            return 1.0 / y
    raise AssertionError(a.kind)


def eval_array(e: Expr, X: np.ndarray, cache: dict | None = None) -> np.ndarray:
    """Vectorised evaluation; ``X`` has shape (n, N)."""
    if cache is None:
        cache = {}
    X = np.asarray(X, dtype=float)
    total = np.zeros(X.shape[1])
    for m, c in e.terms:
        prod = np.full(X.shape[1], float(c))
        for a, k in m:
            v = cache.get(a)
            if v is None:
                v = _atom_array(a, X, cache)
                cache[a] = v
            prod = prod * v ** k
        total = total + prod
    return total


# ---------------------------------------------------------------------------
# interval enclosures (used to validate guarded reciprocals)

_BUMP_SUP: dict[int, float] = {}


def _bump_sup(m: int) -> float:
    if m not in _BUMP_SUP:
        ys = np.linspace(-0.9999, 0.9999, 20001)
        _BUMP_SUP[m] = float(np.max(np.abs(special.bump_d_array(m, ys)))) * 1.05 + 1e-12
    return _BUMP_SUP[m]


def _widen(lo: float, hi: float) -> tuple[float, float]:
    return math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf)


def _imul(a, b):
    ps = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    return _widen(min(ps), max(ps))


def _ipow(a, k):
    if k == 0:
        return (1.0, 1.0)
    lo, hi = a
    if k % 2 == 0 and lo < 0 < hi:
        return _widen(0.0, max(lo ** k, hi ** k))
    vals = [lo ** k, hi ** k]
    return _widen(min(vals), max(vals))


def _trig_range(fn, lo, hi):
    if hi - lo >= 2 * math.pi:
        return (-1.0, 1.0)
    vals = [fn(lo), fn(hi)]
    k0 = math.floor(lo / (math.pi / 2)) - 1
    k1 = math.ceil(hi / (math.pi / 2)) + 1
    for k in range(k0, k1 + 1):
        t = k * math.pi / 2
        if lo <= t <= hi:
            vals.append(fn(t))
    return _widen(max(-1.0, min(vals)), min(1.0, max(vals)))


def interval(e: Expr, box: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Outward-rounded enclosure of ``e`` over an axis box."""
    total = (0.0, 0.0)
    for m, c in e.terms:
        prod = _widen(float(c), float(c))
        for a, k in m:
            prod = _imul(prod, _ipow(_atom_interval(a, box), k))
        total = _widen(total[0] + prod[0], total[1] + prod[1])
    return total


def _atom_interval(a: Atom, box):
    if a.kind == "x":
        lo, hi = box[a.order]
        return _widen(float(lo), float(hi))
    lo, hi = interval(a.arg, box)
    if a.kind == "exp":
        return _widen(math.exp(lo), math.exp(hi) if hi < 700 else math.inf)
    if a.kind == "sin":
        return _trig_range(math.sin, lo, hi)
    if a.kind == "cos":
        return _trig_range(math.cos, lo, hi)
    if a.kind == "bump":
        if a.order == 0:
            vals = [special.bump_d(0, lo), special.bump_d(0, hi)]
            if lo <= 0 <= hi:
                vals.append(special.bump_d(0, 0.0))
            return _widen(min(vals), max(vals))
        s = _bump_sup(a.order)
        return (-s, s)
    if a.kind == "sstep":
        if a.order == 0:
            return _widen(special.sstep(lo), special.sstep(hi))
        s = _bump_sup(a.order - 1) / special.BUMP_INTEGRAL
        return (-s, s)
    if a.kind == "inv":
        if lo <= 0 <= hi:
            return (-math.inf, math.inf)
        return _widen(1.0 / hi, 1.0 / lo)
    raise AssertionError(a.kind)


# ---------------------------------------------------------------------------
# printing


def _frac(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def atom_text(a: Atom) -> str:
    if a.kind == "x":
        return f"x{a.order + 1}"
    inner = to_text(a.arg)
    if a.kind == "bump":
        name = "bump" if a.order == 0 else f"bump_d{a.order}"
    elif a.kind == "sstep":
        name = {0: "sstep", 1: "nbump"}.get(a.order, f"nbump_d{a.order - 1}")
    else:
        name = a.kind
    return f"{name}({inner})"


def _mono_text(m: Monomial) -> str:
    return "*".join(atom_text(a) if k == 1 else f"{atom_text(a)}^{k}" for a, k in m)


def to_text(e: Expr) -> str:
    if e.is_zero:
        return "0"
    out = []
    for i, (m, c) in enumerate(e.terms):
        neg = c < 0
        mag = abs(c)
        if not m:
            body = _frac(mag)
        elif mag == 1:
            body = _mono_text(m)
        else:
            body = f"{_frac(mag)}*{_mono_text(m)}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f"- {body}" if neg else f"+ {body}")
    return " ".join(out)


# ---------------------------------------------------------------------------
# affine structure


def as_affine(e: Expr, n: int) -> tuple[list[Fraction], Fraction] | None:
    """Coefficients and constant when ``e`` is affine in the coordinates."""
    coeffs = [Fraction(0)] * n
    c0 = Fraction(0)
    for m, c in e.terms:
        if not m:
            c0 = c
        elif len(m) == 1 and m[0][1] == 1 and m[0][0].kind == "x" and m[0][0].order < n:
            coeffs[m[0][0].order] = c
        else:
            return None
    return coeffs, c0


def is_polynomial(e: Expr) -> bool:
    return all(a.kind == "x" for m, _ in e.terms for a, _ in m)


# ---------------------------------------------------------------------------
# plateau substitution and the syntactic zero test


def _rat_interval(e: Expr, box) -> tuple[Fraction, Fraction]:
    """Exact rational enclosure of a polynomial over a closed box."""
    lo_t, hi_t = Fraction(0), Fraction(0)
    for m, c in e.terms:
        lo, hi = c, c
        for a, k in m:
            blo, bhi = box[a.order]
            cands = [blo ** k, bhi ** k]
            if k % 2 == 0 and blo < 0 < bhi:
                cands.append(Fraction(0))
            plo, phi = min(cands), max(cands)
            ps = [lo * plo, lo * phi, hi * plo, hi * phi]
            lo, hi = min(ps), max(ps)
        lo_t += lo
        hi_t += hi
    return lo_t, hi_t


def _arg_range(arg: Expr, cell, omega):
    from .region import affine_range

    aff = as_affine(arg, omega.n)
    if aff is not None:
        r = affine_range(cell, omega, aff[0], aff[1])
        return None if r is None else (r[0], r[2])
    if is_polynomial(arg) and arg.max_var < omega.n:
        box = []
        for i in range(omega.n):
            e_i = [1 if k == i else 0 for k in range(omega.n)]
            r = affine_range(cell, omega, e_i)
            if r is None:
                return None
            box.append((r[0], r[2]))
        return _rat_interval(arg, box)
    return None


def substitute_plateaus(e: Expr, cell, omega) -> Expr:
    """Replace bump/sstep atoms that are constant on ``cell`` by their plateau value."""
    def fn(a: Atom) -> Expr:
        if a.arg is None:
            return _atom_expr(a)
        arg = substitute_plateaus(a.arg, cell, omega)
        if a.kind in ("bump", "sstep") and not arg.is_constant:
            rng = _arg_range(arg, cell, omega)
            if rng is not None:
                lo, hi = rng
                if a.kind == "sstep" and a.order == 0:
                    if lo >= 1:
                        return ONE
                    if hi <= -1:
                        return ZERO
                elif lo >= 1 or hi <= -1:
                    return ZERO
        return _rebuild_atom(a, arg)
    if not e.atoms or not any(a.kind in ("bump", "sstep") for a in e.atoms):
        return e
    return map_atoms(e, fn)


def is_literal_zero(e: Expr, region=None) -> bool:
    """Sound syntactic zero test, optionally using plateau values forced by ``region``.

    ``True`` guarantees the function vanishes identically on the region;
    ``False`` proves nothing.
    """
    if e.is_zero:
        return True
    if region is None:
        return False
    for cell in region.cells:
        if not substitute_plateaus(e, cell, region.omega).is_zero:
            from .region import cell_is_empty

            if not cell_is_empty(cell, region.omega):
                return False
    return True


def check_guards(e: Expr, region) -> None:
    """Raise GuardError unless every ``inv`` argument is bounded away from 0 on the closed region."""
    invs = [a for a in e.atoms if a.kind == "inv"]
    if not invs:
        return
    if region is None:
        raise GuardError("inv() used without a guarding region")
    closed = region.closure()
    for cell in closed.cells:
        box = []
        for i in range(region.n):
            from .region import affine_range

            e_i = [1 if k == i else 0 for k in range(region.n)]
            r = affine_range(cell, region.omega, e_i)
            box.append((r[0], r[2]))
        for a in invs:
            lo, hi = interval(a.arg, box)
            if lo <= 0 <= hi:
                raise GuardError(f"denominator {to_text(a.arg)} may vanish on the piece region")
