"""Classified singularity-set descriptors.

Three shapes of set are representable:

* ``Exact``: a finite polyhedral region.
* ``CountableUnion``: an enumeration of exact stages (rational or dyadic points,
  an explicit list, or the interleaving of two enumerations).  Only finite
  truncations are ever inspected, so checks report the depth they reached.
* ``MeasureZero``: a union of exact/countable parts together with constructed
  box covers of arbitrarily small total volume.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator, Union

from .region import Box, Cell, RegionSet, _cell, _dedup, box_volume_sum, cell_box, cell_is_full
from .verdict import Verdict


class Tag(str, Enum):
    CLOSED_NOWHERE_DENSE = "CLOSED_NOWHERE_DENSE"
    FIRST_CATEGORY = "FIRST_CATEGORY"
    MEASURE_ZERO = "MEASURE_ZERO"
    GENERAL = "GENERAL"


class IncompatibleDescriptors(ValueError):
    pass


def _closed_nd(region: RegionSet) -> bool:
    return region.is_closed() and region.is_nowhere_dense()


@dataclass(frozen=True)
class Exact:
    region: RegionSet

    @property
    def omega(self) -> Box:
        return self.region.omega

    @cached_property
    def tag(self) -> Tag:
        return Tag.CLOSED_NOWHERE_DENSE if _closed_nd(self.region) else Tag.GENERAL

    def stage(self, i: int) -> RegionSet:
        return self.region if i == 1 else RegionSet.empty(self.omega)

    def truncate(self, depth: int) -> RegionSet:
        return self.region

    def text(self) -> str:
        return f"exact({self.region.text()})"


# ---------------------------------------------------------------------------
# point enumerations


def _grid_points(omega: Box, q: int, dyadic: bool) -> Iterator[tuple[Fraction, ...]]:
    """Points of omega whose coordinates have least common denominator exactly q."""
    axes = []
    for lo, hi in zip(omega.lo, omega.hi):
        start = math.floor(lo * q) + 1
        stop = math.ceil(hi * q) - 1
        axes.append(range(start, stop + 1))
    for nums in itertools.product(*axes):
        pt = tuple(Fraction(v, q) for v in nums)
        lcm = 1
        for v in pt:
            lcm = lcm * v.denominator // math.gcd(lcm, v.denominator)
        if lcm == q:
            yield pt


class _PointEnumeration:
    """Lazily extended list of enumerated points (by denominator, then lexicographic)."""

    def __init__(self, omega: Box, dyadic: bool):
        self.omega = omega
        self.dyadic = dyadic
        self.points: list[tuple[Fraction, ...]] = []
        self.q = 0

    def get(self, i: int) -> tuple[Fraction, ...]:
        while len(self.points) < i:
            self.q = 1 if self.q == 0 else (self.q * 2 if self.dyadic else self.q + 1)
            self.points.extend(_grid_points(self.omega, self.q, self.dyadic))
        return self.points[i - 1]


@lru_cache(maxsize=None)
def _enumeration(omega: Box, dyadic: bool) -> _PointEnumeration:
    return _PointEnumeration(omega, dyadic)


@dataclass(frozen=True)
class CountableUnion:
    """Enumerated union of exact stages; ``stage`` is 1-based."""

    omega: Box
    kind: str                                   # rationals | dyadics | list | interleave
    items: tuple[RegionSet, ...] = ()
    parts: tuple["CountableUnion", ...] = ()

    def __post_init__(self):
        if self.kind not in ("rationals", "dyadics", "list", "interleave"):
            raise ValueError(f"unknown enumeration kind {self.kind!r}")
        if self.kind == "interleave" and len(self.parts) != 2:
            raise ValueError("interleave needs two enumerations")

    def stage(self, i: int) -> RegionSet:
        if i < 1:
            raise ValueError("stages are numbered from 1")
        if self.kind in ("rationals", "dyadics"):
            return RegionSet.point(self.omega, _enumeration(self.omega, self.kind == "dyadics").get(i))
        if self.kind == "list":
            return self.items[i - 1] if i <= len(self.items) else RegionSet.empty(self.omega)
        first, second = self.parts
        return first.stage((i + 1) // 2) if i % 2 else second.stage(i // 2)

    def truncate(self, depth: int) -> RegionSet:
        return _truncation(self, depth)

    @cached_property
    def tag(self) -> Tag:
        if self.kind in ("rationals", "dyadics"):
            return Tag.FIRST_CATEGORY
        if self.kind == "list":
            ok = all(_closed_nd(r) for r in self.items)
        else:
            ok = all(p.tag is Tag.FIRST_CATEGORY for p in self.parts)
        return Tag.FIRST_CATEGORY if ok else Tag.GENERAL

    @property
    def finite(self) -> bool:
        return self.kind == "list" or (self.kind == "interleave" and all(p.finite for p in self.parts))

    def text(self) -> str:
        if self.kind == "list":
            return "list(" + "; ".join(r.text() for r in self.items) + ")"
        if self.kind == "interleave":
            return f"interleave({self.parts[0].text()}, {self.parts[1].text()})"
        return self.kind


@lru_cache(maxsize=256)
def _truncation(desc: CountableUnion, depth: int) -> RegionSet:
    if depth <= 1:
        return desc.stage(1)
    prev = _truncation(desc, depth - 1)
    return prev.union(desc.stage(depth))


# ---------------------------------------------------------------------------
# measure zero


def degenerate_cover(region: RegionSet, eps: Fraction) -> RegionSet:
    """Closed axis boxes covering ``region`` with total volume at most ``eps``.

    Raises ValueError when a cell is full-dimensional (it has positive measure).
    """
    omega = region.omega
    closed = region.closure()
    if not closed.cells:
        return RegionSet.empty(omega)
    share = Fraction(eps) / len(closed.cells)
    boxes: list[tuple[tuple[Fraction, ...], tuple[Fraction, ...]]] = []
    for cell in closed.cells:
        if cell_is_full(cell, omega):
            raise ValueError("region has positive measure and admits no small cover")
        bx = cell_box(cell, omega)
        if bx is not None:
            boxes.append(bx)
            continue
        boxes.extend(_refine_cover(cell, omega, share))
    # boxes are nonempty and lie in the closure of omega, so skip the emptiness tests
    cells = [_cell(_box_constraints(lo, hi)) for lo, hi in boxes]
    return RegionSet(omega, _dedup(cells))


def _box_constraints(lo, hi):
    from .region import Constraint

    # axis normals are already primitive, so build the constraints directly
    n = len(lo)
    out = []
    for i in range(n):
        e = tuple(1 if k == i else 0 for k in range(n))
        out.append(Constraint(e, Fraction(hi[i]), False))
        out.append(Constraint(tuple(-v for v in e), -Fraction(lo[i]), False))
    return out


def _box_volume(lo, hi) -> Fraction:
    return math.prod((h - l for l, h in zip(lo, hi)), start=Fraction(1))


def _refine_cover(cell: Cell, omega: Box, eps: Fraction):
    """Cover a degenerate cell by boxes around one of its implicit hyperplanes."""
    from .region import implicit_equalities

    bb = RegionSet(omega, (cell,)).bounding_box()
    if bb is None:
        return []
    eqs = implicit_equalities(cell, omega)
    if not eqs:
        raise ValueError("degenerate cell without an implicit equality")
    eq = eqs[0]
    n = omega.n
    j = max(range(n), key=lambda i: (abs(eq.a[i]), -i))
    lo, hi = bb
    others = [i for i in range(n) if i != j]
    w = Fraction(1)
    while True:
        boxes = []
        axes = []
        for i in others:
            cuts = []
            t = lo[i]
            while t < hi[i] or not cuts:
                cuts.append((t, min(t + w, hi[i])))
                t += w
            axes.append(cuts)
        for combo in itertools.product(*axes):
            # range of x_j = (b - sum a_i x_i) / a_j over the grid cell
            vals = [eq.b]
            for (l, h), i in zip(combo, others):
                a = eq.a[i]
                vals = [v - a * l for v in vals] + [v - a * h for v in vals]
            xs = [v / eq.a[j] for v in vals]
            jl, jh = max(min(xs), lo[j]), min(max(xs), hi[j])
            if jl > jh:
                continue
            blo, bhi = [None] * n, [None] * n
            blo[j], bhi[j] = jl, jh
            for (l, h), i in zip(combo, others):
                blo[i], bhi[i] = l, h
            boxes.append((tuple(blo), tuple(bhi)))
        if sum(_box_volume(a, b) for a, b in boxes) <= eps:
            return boxes
        w /= 2


Base = Union[Exact, CountableUnion]


@dataclass(frozen=True)
class MeasureZero:
    """Union of measure-zero parts, each coverable by boxes of arbitrarily small volume."""

    parts: tuple[Base, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("MeasureZero needs at least one part")

    @property
    def omega(self) -> Box:
        return self.parts[0].omega

    tag = Tag.MEASURE_ZERO

    def truncate(self, depth: int) -> RegionSet:
        out = RegionSet.empty(self.omega)
        for p in self.parts:
            out = out.union(p.truncate(depth))
        return out

    def stage(self, i: int) -> RegionSet:
        return self.truncate(i)

    def cover(self, eps, depth: int = 64) -> RegionSet:
        return _measure_cover(self, Fraction(eps), depth)

    def validate(self, depth: int = 64, levels: int = 10, samples: int = 20) -> bool:
        """Covers at eps = 1, 1/2, ..., 2^-levels have total box volume <= eps.

        Containment holds by construction; it is spot-checked at sampled points.
        """
        import random

        target = self.truncate(depth)
        rng = random.Random(0)
        pts = [p for p in (target.sample(rng) for _ in range(samples)) if p is not None]
        for j in range(levels + 1):
            eps = Fraction(1, 2 ** j)
            cov = self.cover(eps, depth)
            if box_volume_sum(cov) > eps:
                return False
            if not all(any(c.holds(p) for c in cov.cells) for p in pts):
                return False
        return True

    def text(self) -> str:
        return "measure_zero(" + ", ".join(p.text() for p in self.parts) + ")"


@lru_cache(maxsize=256)
def _measure_cover(desc: MeasureZero, eps: Fraction, depth: int) -> RegionSet:
    share = eps / len(desc.parts)
    out = RegionSet.empty(desc.omega)
    for p in desc.parts:
        if isinstance(p, Exact):
            out = out.union(degenerate_cover(p.region, share))
        else:
            for i in range(1, depth + 1):
                out = out.union(degenerate_cover(p.stage(i), share / 2 ** i))
    return out


SetDescriptor = Union[Exact, CountableUnion, MeasureZero]


def is_measure_zero(desc: SetDescriptor, depth: int) -> bool:
    if isinstance(desc, MeasureZero):
        return all(is_measure_zero(p, depth) for p in desc.parts)
    if isinstance(desc, Exact):
        return not desc.region.has_full_cell()
    return all(not desc.stage(i).has_full_cell() for i in range(1, depth + 1))


# ---------------------------------------------------------------------------
# checks


def has_dense_complement(desc: SetDescriptor, depth: int = 64) -> Verdict:
    if depth < 1:
        raise ValueError("depth must be at least 1")
    region = desc.truncate(depth)
    if region.has_full_cell():
        box = region.interior_box()
        return Verdict("Refuted", depth, {"box": box.text() if box is not None else region.text()})
    if isinstance(desc, Exact):
        return Verdict("Confirmed")
    if isinstance(desc, CountableUnion) and desc.finite:
        return Verdict("Confirmed")
    return Verdict("Confirmed", depth)


def family_union(a: SetDescriptor, b: SetDescriptor) -> SetDescriptor:
    """A descriptor of the same class containing both inputs."""
    if a.omega != b.omega:
        raise IncompatibleDescriptors("descriptors live in different domains")
    ta, tb = a.tag, b.tag
    if ta is Tag.GENERAL or tb is Tag.GENERAL:
        raise IncompatibleDescriptors("GENERAL descriptors admit no union rule")
    if ta is Tag.MEASURE_ZERO or tb is Tag.MEASURE_ZERO:
        parts = []
        for d in (a, b):
            parts.extend(d.parts if isinstance(d, MeasureZero) else (d,))
        return MeasureZero(tuple(parts))
    if isinstance(a, Exact) and isinstance(b, Exact):
        return Exact(a.region.union(b.region))
    return CountableUnion(a.omega, "interleave", parts=(_as_enumeration(a), _as_enumeration(b)))


def _as_enumeration(d: SetDescriptor) -> CountableUnion:
    if isinstance(d, CountableUnion):
        return d
    return CountableUnion(d.omega, "list", items=(d.region,))


def is_residual_in(desc: SetDescriptor, U: RegionSet, depth: int = 64) -> Verdict:
    """Decide (to depth) whether U minus the set is of first category."""
    if U.is_empty():
        raise ValueError("U must be nonempty")
    if not U.is_open():
        raise ValueError("U must be open")
    trunc = desc.truncate(depth)
    rest = U.difference(trunc)
    if rest.is_nowhere_dense():
        return Verdict("ResidualWitness", depth, {"remainder": rest.text()})
    if desc.tag in (Tag.FIRST_CATEGORY, Tag.CLOSED_NOWHERE_DENSE):
        # a first-category set cannot be residual in a nonempty open subset of a Baire space
        return Verdict("NotResidual", depth, {"reason": f"tag {desc.tag.value}"})
    exact = desc.region if isinstance(desc, Exact) else None
    if isinstance(desc, MeasureZero) and all(isinstance(p, Exact) for p in desc.parts):
        exact = trunc
    if exact is not None:
        open_rest = U.difference(exact.closure())
        if open_rest.has_full_cell():
            box = open_rest.interior_box()
            return Verdict("NotResidual", depth, {"box": box.text() if box is not None else open_rest.text()})
    return Verdict("Unknown", depth)


def descriptor_text(desc: SetDescriptor) -> str:
    return desc.text()
