"""Exact rational polyhedral set calculus over a bounded open box.

Every set lives inside a domain box ``Omega`` (open).  A :class:`Cell` is a
finite conjunction of half-space constraints ``a.x < b`` or ``a.x <= b``; the
box constraints are implicit and added by every query.  A :class:`RegionSet`
is a finite union of cells.  All topology (closure, interior, complement) is
relative to ``Omega``.

Emptiness, projections and exact ranges of affine functions are decided by
Fourier-Motzkin elimination with strictness tracking; the dimension is at most
3 (4 with an auxiliary variable), so the elimination stays small.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterable, NamedTuple, Sequence

Rational = Fraction | int


class DimensionError(ValueError):
    pass


class Constraint(NamedTuple):
    """``a . x < b`` when strict, ``a . x <= b`` otherwise; ``a`` is a primitive integer vector."""

    a: tuple[int, ...]
    b: Fraction
    strict: bool

    @staticmethod
    def make(a: Sequence[Rational], b: Rational, strict: bool) -> "Constraint":
        a = [Fraction(c) for c in a]
        b = Fraction(b)
        den = reduce(_lcm, (c.denominator for c in a), 1)
        ints = [int(c * den) for c in a]
        g = reduce(math.gcd, ints, 0)
        if g == 0:
            return Constraint(tuple(ints), b, strict)
        return Constraint(tuple(i // g for i in ints), b * den / g, strict)

    def negated(self) -> "Constraint":
        return Constraint(tuple(-c for c in self.a), -self.b, not self.strict)

    def weak(self) -> "Constraint":
        return self._replace(strict=False)

    def holds(self, x: Sequence[Rational]) -> bool:
        lhs = sum(c * xi for c, xi in zip(self.a, x))
        return lhs < self.b if self.strict else lhs <= self.b

    def is_axis(self) -> bool:
        return sum(1 for c in self.a if c) == 1

    def text(self) -> str:
        return f"{linear_text(self.a)} {'<' if self.strict else '<='} {_frac_text(self.b)}"


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _frac_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def linear_text(a: Sequence[Rational]) -> str:
    parts = []
    for i, c in enumerate(a):
        if c == 0:
            continue
        c = Fraction(c)
        mag = abs(c)
        body = f"x{i + 1}" if mag == 1 else f"{_frac_text(mag)}*x{i + 1}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    return " ".join(parts) if parts else "0"


# ---------------------------------------------------------------------------
# Fourier-Motzkin core.  Systems are lists of (a, b, strict) with integer a.


class _Infeasible(Exception):
    pass


def _prim(a: Sequence[int], b: Fraction, strict: bool):
    g = reduce(math.gcd, a, 0)
    if g == 0:
        if (b <= 0) if strict else (b < 0):
            raise _Infeasible
        return None
    if g != 1:
        a = tuple(c // g for c in a)
        b = b / g
    else:
        a = tuple(a)
    return a, b, strict


def _tighten(system):
    best: dict[tuple[int, ...], tuple[Fraction, bool]] = {}
    for a, b, s in system:
        cur = best.get(a)
        if cur is None or b < cur[0] or (b == cur[0] and s and not cur[1]):
            best[a] = (b, s)
    for a, (b, s) in best.items():
        opp = best.get(tuple(-c for c in a))
        if opp is not None:
            # a.x rel b and -a.x rel b2  =>  -b2 rel a.x rel b
            lo = -opp[0]
            if lo > b or (lo == b and (s or opp[1])):
                raise _Infeasible
    return [(a, b, s) for a, (b, s) in best.items()]


def _eliminate(system, j: int):
    pos, neg, rest = [], [], []
    for c in system:
        aj = c[0][j]
        if aj > 0:
            pos.append(c)
        elif aj < 0:
            neg.append(c)
        else:
            rest.append(c)
    out = list(rest)
    for pa, pb, ps in pos:
        pj = pa[j]
        for qa, qb, qs in neg:
            qj = -qa[j]
            a = tuple(qj * x + pj * y for x, y in zip(pa, qa))
            c = _prim(a, qj * pb + pj * qb, ps or qs)
            if c is not None:
                out.append(c)
    return _tighten(out)


def _project(system, n: int, keep: int = 0):
    """Eliminate variables n-1 .. keep; returns the list of intermediate systems."""
    stages = [_tighten(system)]
    for j in range(n - 1, keep - 1, -1):
        stages.append(_eliminate(stages[-1], j))
    return stages


def feasible(system, n: int) -> bool:
    try:
        _project(system, n)
    except _Infeasible:
        return False
    return True


def _bounds(system, j: int):
    """Interval for variable j from constraints that only involve it."""
    lo, lo_s, hi, hi_s = None, False, None, False
    for a, b, s in system:
        c = a[j]
        if c > 0:
            v = b / c
            if hi is None or v < hi or (v == hi and s):
                hi, hi_s = v, s
        elif c < 0:
            v = b / c
            if lo is None or v > lo or (v == lo and s):
                lo, lo_s = v, s
    return lo, lo_s, hi, hi_s


def _substitute(system, j: int, value: Fraction):
    out = []
    for a, b, s in system:
        if a[j]:
            b = b - a[j] * value
            a = a[:j] + (0,) + a[j + 1 :]
        c = _prim(a, b, s)
        if c is not None:
            out.append(c)
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Open axis box ``lo_i < x_i < hi_i``; the ambient domain Omega."""

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(Fraction(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(Fraction(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or not 1 <= len(self.lo) <= 3:
            raise DimensionError("domain box must have 1..3 axes")
        if any(l >= h for l, h in zip(self.lo, self.hi)):
            raise ValueError("domain box must be nonempty")

    @property
    def n(self) -> int:
        return len(self.lo)

    @cached_property
    def constraints(self) -> tuple[tuple, ...]:
        out = []
        for i in range(self.n):
            e = tuple(1 if k == i else 0 for k in range(self.n))
            out.append((e, self.hi[i], True))
            out.append((tuple(-c for c in e), -self.lo[i], True))
        return tuple(out)

    def contains(self, x: Sequence[Rational]) -> bool:
        return all(l < xi < h for l, xi, h in zip(self.lo, x, self.hi))

    def text(self) -> str:
        return " x ".join(f"({_frac_text(l)}, {_frac_text(h)})" for l, h in zip(self.lo, self.hi))


@dataclass(frozen=True)
class Cell:
    """Conjunction of constraints (the domain box is implicit)."""

    constraints: tuple[Constraint, ...] = ()

    def system(self, omega: Box, weak: bool = False) -> list:
        own = [(c.a, c.b, False if weak else c.strict) for c in self.constraints]
        return own + list(omega.constraints)

    def holds(self, x: Sequence[Rational]) -> bool:
        return all(c.holds(x) for c in self.constraints)

    def text(self) -> str:
        if not self.constraints:
            return "all"
        return " & ".join(c.text() for c in self.constraints)

    def sort_key(self):
        return tuple((c.a, c.b, c.strict) for c in self.constraints)


def _cell(constraints: Iterable[Constraint]) -> Cell:
    best: dict[tuple[int, ...], Constraint] = {}
    for c in constraints:
        cur = best.get(c.a)
        if cur is None or c.b < cur.b or (c.b == cur.b and c.strict and not cur.strict):
            best[c.a] = c
    return Cell(tuple(sorted(best.values(), key=lambda c: (c.a, c.b, c.strict))))


def cell_is_empty(cell: Cell, omega: Box) -> bool:
    return not feasible(cell.system(omega), omega.n)


def cell_is_full(cell: Cell, omega: Box) -> bool:
    """Nonempty interior: the all-strict version is feasible."""
    sys_ = [(a, b, True) for a, b, _ in cell.system(omega)]
    return feasible(sys_, omega.n)


def affine_range(cell: Cell, omega: Box, coeffs: Sequence[Rational], const: Rational = 0):
    """Exact image ``{f(x) : x in cell}`` of ``f = coeffs . x + const``.

    Returns ``(lo, lo_strict, hi, hi_strict)`` or ``None`` when the cell is empty.
    """
    n = omega.n
    c = Constraint.make(list(coeffs) + [-1], -Fraction(const), False)
    lifted = [(a + (0,), b, s) for a, b, s in cell.system(omega)]
    lifted.append((c.a, c.b, False))
    lifted.append((tuple(-v for v in c.a), -c.b, False))
    try:
        system = _tighten(lifted)
        for j in range(n - 1, -1, -1):
            system = _eliminate(system, j)
    except _Infeasible:
        return None
    return _bounds(system, n)


def sample_point(cell: Cell, omega: Box, rng: random.Random | None = None,
                 denominator_bits: int = 12) -> tuple[Fraction, ...] | None:
    """An exact rational point of the cell (midpoint choices unless ``rng`` given)."""
    n = omega.n
    try:
        stages = _project(cell.system(omega), n, keep=1)
    except _Infeasible:
        return None
    # stages[-1] only involves x_0; stages[n-1-j] involves x_0..x_j
    point: list[Fraction] = []
    for j in range(n):
        system = stages[n - 1 - j]
        for i, v in enumerate(point):
            system = _substitute(system, i, v)
        lo, lo_s, hi, hi_s = _bounds(system, j)
        point.append(_pick(lo, hi, rng, denominator_bits))
    return tuple(point)


def sample_points(cell: Cell, omega: Box, rng: random.Random, count: int,
                  denominator_bits: int = 12) -> list[tuple[Fraction, ...]]:
    """Several random points of a cell, sharing one elimination pass."""
    n = omega.n
    try:
        stages = _project(cell.system(omega), n, keep=1)
    except _Infeasible:
        return []
    out = []
    for _ in range(count):
        point: list[Fraction] = []
        for j in range(n):
            system = stages[n - 1 - j]
            for i, v in enumerate(point):
                system = _substitute(system, i, v)
            lo, _, hi, _ = _bounds(system, j)
            point.append(_pick(lo, hi, rng, denominator_bits))
        out.append(tuple(point))
    return out


def _pick(lo, hi, rng, bits) -> Fraction:
    if lo == hi:
        return lo
    if rng is None:
        return (lo + hi) / 2
    scale = 1 << bits
    t = Fraction(rng.randint(1, scale - 1), scale)
    return lo + t * (hi - lo)


def _rank(rows: list[list[Fraction]]) -> int:
    m = [list(map(Fraction, r)) for r in rows]
    rank = 0
    cols = len(m[0]) if m else 0
    for col in range(cols):
        piv = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col] / m[rank][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[rank])]
        rank += 1
    return rank


def affine_dimension(cell: Cell, omega: Box) -> int:
    """Dimension of the affine hull; -1 for the empty cell."""
    if cell_is_empty(cell, omega):
        return -1
    base = cell.system(omega)
    implicit = []
    for c in cell.constraints:
        if c.strict:
            continue
        probe = base + [(c.a, c.b, True)]
        if not feasible(probe, omega.n):
            implicit.append(list(c.a))
    return omega.n - (_rank(implicit) if implicit else 0)


def implicit_equalities(cell: Cell, omega: Box) -> list[Constraint]:
    """Weak constraints of a nonempty cell that hold with equality everywhere on it."""
    base = cell.system(omega)
    out = []
    for c in cell.constraints:
        if not c.strict and not feasible(base + [(c.a, c.b, True)], omega.n):
            out.append(c)
    return out


def _complement_pieces(cell: Cell) -> list[list[Constraint]]:
    """Disjoint decomposition of (Omega minus cell) as constraint lists."""
    out = []
    prefix: list[Constraint] = []
    for c in cell.constraints:
        out.append(prefix + [c.negated()])
        prefix = prefix + [c]
    return out


@dataclass(frozen=True)
class RegionSet:
    """Finite union of cells inside ``omega``."""

    omega: Box
    cells: tuple[Cell, ...] = ()

    # -- constructors -----------------------------------------------------
    @staticmethod
    def empty(omega: Box) -> "RegionSet":
        return RegionSet(omega, ())

    @staticmethod
    def full(omega: Box) -> "RegionSet":
        return RegionSet(omega, (Cell(()),))

    @staticmethod
    def from_cells(omega: Box, cells: Iterable[Iterable[Constraint]]) -> "RegionSet":
        out = []
        for cons in cells:
            for c in cons:
                if len(c.a) != omega.n:
                    raise DimensionError("constraint dimension does not match the domain")
            cell = _cell(cons)
            if not cell_is_empty(cell, omega):
                out.append(cell)
        return RegionSet(omega, _dedup(out))

    @staticmethod
    def box(omega: Box, lo: Sequence[Rational], hi: Sequence[Rational],
            closed: bool = True) -> "RegionSet":
        cons = []
        for i in range(omega.n):
            e = [1 if k == i else 0 for k in range(omega.n)]
            cons.append(Constraint.make(e, hi[i], not closed))
            cons.append(Constraint.make([-v for v in e], -Fraction(lo[i]), not closed))
        return RegionSet.from_cells(omega, [cons])

    @staticmethod
    def point(omega: Box, x: Sequence[Rational]) -> "RegionSet":
        return RegionSet.box(omega, x, x, closed=True)

    # -- basic predicates -------------------------------------------------
    @property
    def n(self) -> int:
        return self.omega.n

    def _check(self, other: "RegionSet"):
        if other.omega != self.omega:
            raise DimensionError("region sets live in different domains")

    def is_empty(self) -> bool:
        return all(cell_is_empty(c, self.omega) for c in self.cells)

    def __bool__(self) -> bool:
        return not self.is_empty()

    def contains_point(self, x: Sequence[Rational]) -> bool:
        return self.omega.contains(x) and any(c.holds(x) for c in self.cells)

    # -- boolean algebra --------------------------------------------------
    def union(self, other: "RegionSet") -> "RegionSet":
        self._check(other)
        return RegionSet(self.omega, _dedup(self.cells + other.cells))

    def intersect(self, other: "RegionSet") -> "RegionSet":
        self._check(other)
        out = []
        for c in self.cells:
            for d in other.cells:
                cell = _cell(c.constraints + d.constraints)
                if not cell_is_empty(cell, self.omega):
                    out.append(cell)
        return RegionSet(self.omega, _dedup(out))

    def difference(self, other: "RegionSet") -> "RegionSet":
        self._check(other)
        cells = list(self.cells)
        for d in other.cells:
            nxt = []
            for c in cells:
                nxt.extend(_cell_minus(c, d, self.omega))
            cells = nxt
            if not cells:
                break
        return RegionSet(self.omega, _dedup(cells))

    def complement(self) -> "RegionSet":
        return RegionSet.full(self.omega).difference(self)

    def subset_of(self, other: "RegionSet") -> bool:
        return self.difference(other).is_empty()

    def same_points(self, other: "RegionSet") -> bool:
        return self.subset_of(other) and other.subset_of(self)

    # -- topology (relative to omega) -------------------------------------
    def closure(self) -> "RegionSet":
        cells = [Cell(tuple(c.weak() for c in cell.constraints)) for cell in self.cells
                 if not cell_is_empty(cell, self.omega)]
        return RegionSet(self.omega, _dedup([_cell(c.constraints) for c in cells]))

    def interior(self) -> "RegionSet":
        full = [c for c in self.cells if cell_is_full(c, self.omega)]
        if not full:
            return RegionSet.empty(self.omega)
        if len(self.cells) == 1:
            cell = self.cells[0]
            return RegionSet(self.omega, (_cell(c._replace(strict=True) for c in cell.constraints),))
        return self.complement().closure().complement()

    def boundary(self) -> "RegionSet":
        return self.closure().difference(self.interior())

    def is_closed(self) -> bool:
        if all(not c.strict for cell in self.cells for c in cell.constraints):
            return True
        return self.closure().subset_of(self)

    def is_open(self) -> bool:
        if all(c.strict for cell in self.cells for c in cell.constraints):
            return True
        return self.subset_of(self.interior())

    def has_full_cell(self) -> bool:
        return any(cell_is_full(c, self.omega) for c in self.cells)

    def is_nowhere_dense(self) -> bool:
        # closure cells are full-dimensional iff the original cells are
        return not self.closure().has_full_cell()

    # -- geometry ----------------------------------------------------------
    def simplified(self) -> "RegionSet":
        """Drop empty cells and constraints implied by the rest of their cell."""
        out = []
        for cell in self.cells:
            if cell_is_empty(cell, self.omega):
                continue
            kept = list(cell.constraints)
            for c in list(kept):
                rest = [d for d in kept if d != c]
                probe = Cell(tuple(rest) + (c.negated(),))
                if cell_is_empty(probe, self.omega):
                    kept = rest
            out.append(_cell(kept))
        return RegionSet(self.omega, _dedup(out))

    def sample(self, rng: random.Random | None = None) -> tuple[Fraction, ...] | None:
        for cell in self.cells:
            p = sample_point(cell, self.omega, rng)
            if p is not None:
                return p
        return None

    def interior_box(self) -> "RegionSet | None":
        """A closed axis box of positive volume inside the set, if the set has interior."""
        inner = self.interior()
        for cell in inner.cells:
            if not cell_is_full(cell, self.omega):
                continue
            strict = Cell(tuple(c._replace(strict=True) for c in cell.constraints))
            p = sample_point(strict, self.omega)
            r = Fraction(1, 2)
            for _ in range(64):
                inside_omega = all(l < v - r and v + r < h
                                   for v, l, h in zip(p, self.omega.lo, self.omega.hi))
                if inside_omega:
                    cand = RegionSet.box(self.omega, [v - r for v in p], [v + r for v in p])
                    if cand.subset_of(inner):
                        return cand
                r /= 2
        return None

    def bounding_box(self):
        lo = [None] * self.n
        hi = [None] * self.n
        for cell in self.cells:
            for i in range(self.n):
                e = [1 if k == i else 0 for k in range(self.n)]
                rng = affine_range(cell, self.omega, e)
                if rng is None:
                    break
                l, _, h, _ = rng
                lo[i] = l if lo[i] is None else min(lo[i], l)
                hi[i] = h if hi[i] is None else max(hi[i], h)
        if lo[0] is None:
            return None
        return tuple(lo), tuple(hi)

    def inflate(self, r: Rational) -> "RegionSet":
        """Outer neighbourhood: every constraint relaxed by ``r * |a|_1`` and closed."""
        r = Fraction(r)
        cells = []
        for cell in self.cells:
            cells.append([Constraint(c.a, c.b + r * sum(abs(v) for v in c.a), False)
                          for c in cell.constraints])
        return RegionSet.from_cells(self.omega, cells)

    def linf_distance(self, x: Sequence[Rational]) -> Fraction | None:
        """Exact sup-norm distance from ``x`` to the closure of the set."""
        best = None
        for cell in self.closure().cells:
            d = _cell_linf_distance(cell, self.omega, x)
            if d is not None and (best is None or d < best):
                best = d
        return best

    def text(self) -> str:
        if not self.cells:
            return "empty"
        return " | ".join(c.text() for c in self.cells)

    def __repr__(self) -> str:
        return f"RegionSet({self.text()})"


def _dedup(cells: Iterable[Cell]) -> tuple[Cell, ...]:
    seen = {}
    for c in cells:
        seen.setdefault(c.sort_key(), c)
    return tuple(seen[k] for k in sorted(seen))


def _cell_minus(c: Cell, d: Cell, omega: Box) -> list[Cell]:
    both = _cell(c.constraints + d.constraints)
    if cell_is_empty(both, omega):
        return [c]
    out = []
    for piece in _complement_pieces(d):
        cell = _cell(c.constraints + tuple(piece))
        if not cell_is_empty(cell, omega):
            out.append(cell)
    return out


def _cell_linf_distance(cell: Cell, omega: Box, x: Sequence[Rational]) -> Fraction | None:
    n = omega.n
    # variables y_0..y_{n-1}, t ; minimise t
    system = []
    closed_box = [(a, b, False) for a, b, _ in omega.constraints]
    for a, b, _ in cell.system(omega, weak=True)[: len(cell.constraints)] + closed_box:
        system.append((a + (0,), b, False))
    for i in range(n):
        e = tuple(1 if k == i else 0 for k in range(n))
        xi = Fraction(x[i])
        system.append((e + (-1,), xi, False))                        # y_i - t <= x_i
        system.append((tuple(-v for v in e) + (-1,), -xi, False))    # -y_i - t <= -x_i
    try:
        system = _tighten([c for c in (_prim(a, b, s) for a, b, s in system) if c])
        for j in range(n - 1, -1, -1):
            system = _eliminate(system, j)
    except _Infeasible:
        return None
    lo, _, _, _ = _bounds(system, n)
    return max(lo, Fraction(0)) if lo is not None else Fraction(0)


# ---------------------------------------------------------------------------
# Volumes of unions of axis boxes.


def cell_box(cell: Cell, omega: Box):
    """Axis bounds of a box cell, or None if the cell is not an axis box."""
    if not all(c.is_axis() for c in cell.constraints):
        return None
    lo = list(omega.lo)
    hi = list(omega.hi)
    for c in cell.constraints:
        i = next(k for k, v in enumerate(c.a) if v)
        v = c.b / c.a[i]
        if c.a[i] > 0:
            hi[i] = min(hi[i], v)
        else:
            lo[i] = max(lo[i], v)
    return tuple(lo), tuple(hi)


def volume(region: RegionSet) -> Fraction:
    """Exact Lebesgue measure of a union of axis boxes.

    Lower-dimensional cells of any shape contribute zero; a full-dimensional
    cell that is not an axis box is refused.
    """
    boxes = []
    for cell in region.cells:
        if cell_is_empty(cell, region.omega):
            continue
        bx = cell_box(cell, region.omega)
        if bx is None:
            if cell_is_full(cell, region.omega):
                raise ValueError("volume() only accepts axis-aligned boxes")
            continue
        lo, hi = bx
        if all(l < h for l, h in zip(lo, hi)):
            boxes.append((lo, hi))
    return _union_measure(boxes, 0, region.n)


def box_volume_sum(region: RegionSet) -> Fraction:
    """Sum of the individual box volumes (an upper bound for the union)."""
    total = Fraction(0)
    for cell in region.cells:
        bx = cell_box(cell, region.omega)
        if bx is None:
            if cell_is_full(cell, region.omega):
                raise ValueError("box_volume_sum() only accepts axis-aligned boxes")
            continue
        lo, hi = bx
        total += math.prod((max(h - l, 0) for l, h in zip(lo, hi)), start=Fraction(1))
    return total


def _union_measure(boxes, axis: int, n: int) -> Fraction:
    if not boxes:
        return Fraction(0)
    if axis == n - 1:
        spans = sorted((b[0][axis], b[1][axis]) for b in boxes)
        total = Fraction(0)
        cur_lo, cur_hi = spans[0]
        for lo, hi in spans[1:]:
            if lo > cur_hi:
                total += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            else:
                cur_hi = max(cur_hi, hi)
        return total + cur_hi - cur_lo
    cuts = sorted({b[0][axis] for b in boxes} | {b[1][axis] for b in boxes})
    total = Fraction(0)
    for lo, hi in zip(cuts, cuts[1:]):
        active = [b for b in boxes if b[0][axis] <= lo and hi <= b[1][axis]]
        if active:
            total += (hi - lo) * _union_measure(active, axis + 1, n)
    return total
