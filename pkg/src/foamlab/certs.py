"""Membership certificates for the vanishing ideals and their checkers.

A certificate pairs a singularity set with *shells*: a nested family of
regions ``A(mu)`` (mu a chain position) on which the net is claimed to be
literally zero from position mu onwards.  Because only finitely many shells can
be inspected, every shell family also carries a gap radius ``r(mu)``: the part
of the domain covered by neither the singularity set nor ``A(mu)`` must stay
within distance ``r(mu)`` of the singularity set, and ``r(mu)`` must decay.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from . import expr as E
from .descriptors import (CountableUnion, Exact, MeasureZero, SetDescriptor, Tag, family_union,
                          has_dense_complement, is_measure_zero)
from .nets import Net, PiecewiseExpr
from .region import RegionSet, sample_points
from .verdict import Verdict

TOL = 1e-9


class CertificateError(ValueError):
    """Structurally invalid certificate (coverage gap, malformed set)."""


class CertificateEscalation(CertificateError):
    """A transform emptied a shell that was needed; the result is not trusted."""


class FamilyMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class IdealFamily:
    kind: str                               # ND | BAIRE_I | M0 | SINGLE
    sigma: SetDescriptor | None = None

    def text(self) -> str:
        return self.kind if self.sigma is None else f"SINGLE({self.sigma.text()})"

    def admits(self, desc: SetDescriptor, depth: int) -> tuple[bool, str]:
        tag = desc.tag
        if self.kind == "ND":
            ok = isinstance(desc, Exact) and tag is Tag.CLOSED_NOWHERE_DENSE
            return ok, "" if ok else "ND family needs a closed nowhere dense exact set"
        if self.kind == "BAIRE_I":
            ok = tag in (Tag.CLOSED_NOWHERE_DENSE, Tag.FIRST_CATEGORY)
            return ok, "" if ok else "BAIRE_I family needs a first-category set"
        if self.kind == "M0":
            ok = is_measure_zero(desc, depth)
            if ok and isinstance(desc, MeasureZero):
                ok = desc.validate(depth)
            return ok, "" if ok else "M0 family needs a measure-zero set"
        assert self.sigma is not None
        ok = desc.truncate(depth).subset_of(self.sigma.truncate(depth))
        return ok, "" if ok else "set is not contained in the family's single set"


ND = IdealFamily("ND")
BAIRE_I = IdealFamily("BAIRE_I")
M0 = IdealFamily("M0")


def SingleSet(sigma: SetDescriptor) -> IdealFamily:
    if has_dense_complement(sigma).kind != "Confirmed":
        raise ValueError("the single set must have dense complement")
    return IdealFamily("SINGLE", sigma)


def family_from_name(name: str) -> IdealFamily:
    key = name.upper().replace("-", "_")
    table = {"ND": ND, "NOWHERE_DENSE": ND, "BAIRE_I": BAIRE_I, "BI": BAIRE_I, "FC": BAIRE_I,
             "M0": M0, "MEASURE_ZERO": M0}
    if key not in table:
        raise ValueError(f"unknown ideal family {name!r}")
    return table[key]


# ---------------------------------------------------------------------------
# shells


class Shells:
    """Nested regions A(mu) with a gap radius r(mu)."""

    def stage(self, mu: int) -> RegionSet:
        raise NotImplementedError

    def radius(self, mu: int) -> Fraction:
        return Fraction(0)

    def text(self) -> str:
        return type(self).__name__

    def summary(self, depth: int) -> dict:
        return {"shells": self.text(), "radius_at_depth": self.radius(depth)}


@dataclass(frozen=True, eq=False)
class FiniteShells(Shells):
    """Explicit (region, threshold) pairs; A(mu) is the union of regions with threshold <= mu."""

    entries: tuple[tuple[RegionSet, int], ...]

    def stage(self, mu: int) -> RegionSet:
        omega = self.entries[0][0].omega
        out = RegionSet.empty(omega)
        for region, lam in self.entries:
            if lam <= mu:
                out = out.union(region)
        return out

    def text(self) -> str:
        return "; ".join(f"({r.text()}, {lam})" for r, lam in self.entries)


class StageShells(Shells):
    """Regions R(m) from a template; A(mu) is the union of R(m) for m <= mu."""

    def __init__(self, template: Callable[[int], RegionSet], radius_fn: Callable[[int], Fraction],
                 label: str = "stage template", radius_label: str = ""):
        self.template = template
        self.radius_fn = radius_fn
        self.label = label
        self.radius_label = radius_label
        self._stages: list[RegionSet] = []

    def stage(self, mu: int) -> RegionSet:
        while len(self._stages) < mu:
            m = len(self._stages) + 1
            cur = self.template(m)
            if self._stages:
                prev = self._stages[-1]
                if not prev.subset_of(cur):
                    cur = prev.union(cur)
            self._stages.append(cur)
        return self._stages[mu - 1]

    def radius(self, mu: int) -> Fraction:
        return Fraction(self.radius_fn(mu))

    def text(self) -> str:
        return f"{self.label} (gap radius {self.radius_label})" if self.radius_label else self.label


class MappedShells(Shells):
    """Stages transformed by ``fn(stage, mu)``; radius inherited unless given."""

    def __init__(self, base: Shells, fn: Callable[[RegionSet, int], RegionSet], label: str,
                 radius_fn: Callable[[int], Fraction] | None = None):
        self.base = base
        self.fn = fn
        self.label = label
        self.radius_fn = radius_fn
        self._cache: dict[int, RegionSet] = {}

    def stage(self, mu: int) -> RegionSet:
        if mu not in self._cache:
            self._cache[mu] = self.fn(self.base.stage(mu), mu)
        return self._cache[mu]

    def radius(self, mu: int) -> Fraction:
        return Fraction(self.radius_fn(mu)) if self.radius_fn else self.base.radius(mu)

    def text(self) -> str:
        return f"{self.label}({self.base.text()})"


class MeetShells(Shells):
    def __init__(self, a: Shells, b: Shells):
        self.a, self.b = a, b
        self._cache: dict[int, RegionSet] = {}

    def stage(self, mu: int) -> RegionSet:
        if mu not in self._cache:
            self._cache[mu] = self.a.stage(mu).intersect(self.b.stage(mu))
        return self._cache[mu]

    def radius(self, mu: int) -> Fraction:
        return max(self.a.radius(mu), self.b.radius(mu))

    def text(self) -> str:
        return f"meet({self.a.text()}, {self.b.text()})"


def interior_shells(shells: Shells) -> Shells:
    if isinstance(shells, FiniteShells):
        return FiniteShells(tuple((r.interior(), lam) for r, lam in shells.entries))
    return MappedShells(shells, lambda a, mu: a.interior(), "interior")


# ---------------------------------------------------------------------------
# certificates


@dataclass
class PointwiseCertificate:
    sigma: SetDescriptor
    shells: Shells
    family: IdealFamily = BAIRE_I
    note: str = ""

    def summary(self, depth: int) -> dict:
        return {"kind": "pointwise", "family": self.family.text(), "sigma": self.sigma.text(),
                "sigma_at_depth": self.sigma.truncate(depth).text(), **self.shells.summary(depth)}


@dataclass
class UniformCertificate:
    gamma: RegionSet
    patches: Shells
    family: IdealFamily = ND

    def summary(self, depth: int) -> dict:
        return {"kind": "uniform", "family": self.family.text(), "gamma": self.gamma.text(),
                **self.patches.summary(depth)}


def _check_radius(shells: Shells, depth: int) -> None:
    r_prev = None
    for mu in _coverage_depths(depth):
        r = shells.radius(mu)
        if r < 0 or (r_prev is not None and r > r_prev):
            raise CertificateError(f"gap radius must be non-negative and non-increasing (position {mu})")
        r_prev = r
    if shells.radius(depth) > 0 and shells.radius(4 * depth) * 2 > shells.radius(depth):
        raise CertificateError("gap radius does not decay")


def _coverage_depths(depth: int) -> list[int]:
    return list(range(1, depth + 1))


def check_coverage(sing: RegionSet, shells: Shells, depth: int) -> None:
    """Raise CertificateError unless the uncovered gap stays within the radius of the set."""
    _check_radius(shells, depth)
    omega = sing.omega
    full = RegionSet.full(omega)
    for mu in _coverage_depths(depth):
        gap = full.difference(sing.union(shells.stage(mu)))
        if gap.is_empty():
            continue
        allowed = sing.inflate(shells.radius(mu)) if sing.cells else RegionSet.empty(omega)
        rest = gap.difference(allowed)
        if not rest.is_empty():
            pt = rest.sample()
            raise CertificateError(
                f"coverage gap at position {mu}: point ({', '.join(str(v) for v in pt)}) "
                "is in no shell and outside the singularity neighbourhood")


def _witness(u: Net, region: RegionSet, mu: int, order: int, seed: int = 0):
    """Look for a point of ``region`` where some derivative of u_mu exceeds TOL."""
    rng = random.Random(seed * 1000003 + mu)
    pw = u.at(mu)
    idx = E.multi_indices(u.omega.n, order)
    pts = []
    for cell in region.cells:
        mid = RegionSet(region.omega, (cell,)).sample()
        if mid is not None:
            pts.append(mid)
        pts.extend(sample_points(cell, region.omega, rng, 8))
    for x in pts:
        if not region.contains_point(x):
            continue
        base = pw.piece_at(x)
        for p in idx:
            val = E.eval_expr(E.diff(base, p) if any(p) else base, x)
            if abs(val) > TOL:
                return x, p, val
    return None


def _refute_or_unknown(u: Net, bad: RegionSet, mu: int, order: int, what: str, seed: int) -> Verdict:
    hit = _witness(u, bad, mu, order, seed)
    if hit is not None:
        x, p, val = hit
        return Verdict("Refuted", mu, {"x": list(x), "index": mu, "label": u.label(mu), "order": list(p),
                                        "value": val})
    return Verdict("Unknown", mu, {"region": bad.text()}, f"{what}: not literally zero but no numeric witness")


def check_pointwise(u: Net, c: PointwiseCertificate, depth: int = 64, order: int = 3,
                    seed: int = 0) -> Verdict:
    if c.sigma.omega != u.omega:
        raise CertificateError("certificate and net live on different domains")
    ok, why = c.family.admits(c.sigma, depth)
    if not ok:
        return Verdict("Unknown", depth, detail=why)
    dense = has_dense_complement(c.sigma, depth)
    if dense.kind != "Confirmed":
        return Verdict("Unknown", depth, dense.witness, "singularity set has no dense complement")
    sing = c.sigma.truncate(depth)
    check_coverage(sing, c.shells, depth)
    for mu in range(1, depth + 1):
        stage = c.shells.stage(mu)
        if stage.is_empty():
            continue
        bad = stage.intersect(u.nonzero_region(mu)).difference(sing)
        if not bad.is_empty():
            return _refute_or_unknown(u, bad, mu, order, "shell", seed)
    return Verdict("Verified", depth, payload=c)


def check_uniform(u: Net, c: UniformCertificate, depth: int = 64, order: int = 3,
                  seed: int = 0) -> Verdict:
    gamma = c.gamma
    if gamma.omega != u.omega:
        raise CertificateError("certificate and net live on different domains")
    if not gamma.is_closed() or not gamma.is_nowhere_dense():
        raise CertificateError(f"malformed certificate: gamma {gamma.text()} is not closed nowhere dense")
    check_coverage(gamma, c.patches, depth)
    for mu in range(1, depth + 1):
        stage = c.patches.stage(mu)
        if stage.is_empty():
            continue
        if not stage.is_open():
            raise CertificateError(f"malformed certificate: patch at position {mu} is not open")
        bad = stage.intersect(u.nonzero_region(mu)).difference(gamma)
        if not bad.is_empty():
            return _refute_or_unknown(u, bad, mu, order, "patch", seed)
    return Verdict("Verified", depth, payload=c)


# ---------------------------------------------------------------------------
# transforms


def derive_certificate(c, p: E.MultiIndex, depth: int = 64):
    """Certificate for D^p u from one for u: shells shrink to their interiors."""
    if isinstance(c, UniformCertificate) or not any(p):
        return c
    shells = interior_shells(c.shells)
    if not c.shells.stage(depth).is_empty() and shells.stage(depth).is_empty():
        raise CertificateEscalation("interior of a needed shell is empty")
    return PointwiseCertificate(c.sigma, shells, c.family, note="derived")


def uniform_to_pointwise(c: UniformCertificate, family: IdealFamily = BAIRE_I) -> PointwiseCertificate:
    """A closed nowhere dense set is a one-stage first-category set."""
    return PointwiseCertificate(CountableUnion(c.gamma.omega, "list", items=(c.gamma,)), c.patches, family)


def _union_sigma(c1: PointwiseCertificate, c2: PointwiseCertificate) -> SetDescriptor:
    if c1.family.kind == "SINGLE":
        return c1.family.sigma
    if c1.sigma == c2.sigma:
        return c1.sigma
    return family_union(c1.sigma, c2.sigma)


def compose_add(c1: PointwiseCertificate, c2: PointwiseCertificate) -> PointwiseCertificate:
    if c1.family != c2.family:
        raise FamilyMismatch(f"cannot add certificates of families {c1.family.text()} and {c2.family.text()}")
    sigma = _union_sigma(c1, c2)
    if isinstance(c1.shells, FiniteShells) and isinstance(c2.shells, FiniteShells):
        entries = []
        for r1, l1 in c1.shells.entries:
            for r2, l2 in c2.shells.entries:
                r = r1.intersect(r2)
                if not r.is_empty():
                    entries.append((r, max(l1, l2)))
        if entries:
            return PointwiseCertificate(sigma, FiniteShells(tuple(entries)), c1.family)
    return PointwiseCertificate(sigma, MeetShells(c1.shells, c2.shells), c1.family)


def compose_mul_ideal(c: PointwiseCertificate, v: Net) -> PointwiseCertificate:
    """Certificate for u*v from one for u: shells refined by v's pieces."""
    def refine(stage: RegionSet, mu: int) -> RegionSet:
        out = RegionSet.empty(stage.omega)
        for region, _ in v.at(mu).pieces:
            out = out.union(stage.intersect(region))
        return out
    return PointwiseCertificate(c.sigma, MappedShells(c.shells, refine, f"refined[{v.name}]"), c.family)


# ---------------------------------------------------------------------------
# neutrix


def neutrix_witness(psi: PiecewiseExpr, seed: int = 0, grid: int = 64):
    """A point where |psi| exceeds the tolerance, or None."""
    rng = random.Random(seed)
    for region, e in psi.pieces:
        if e.is_zero:
            continue
        for cell in region.cells:
            pts = [RegionSet(region.omega, (cell,)).sample()] + sample_points(cell, region.omega, rng, 16)
            for x in pts:
                if x is not None and region.contains_point(x) and abs(E.eval_expr(e, x)) > TOL:
                    return x
    # dense fallback over a regular grid
    import itertools

    omega = psi.omega
    axes = [[lo + (hi - lo) * Fraction(j, grid) for j in range(1, grid)] for lo, hi in zip(omega.lo, omega.hi)]
    for x in itertools.product(*axes):
        if abs(psi.evaluate(x)) > TOL:
            return x
    return None


def neutrix_check(psi: PiecewiseExpr, family: IdealFamily | None = None, depth: int = 64) -> bool:
    """True when the constant net psi is provably outside the ideal.

    A nonzero continuous psi is nonzero on an open set, which no singularity set
    with dense complement can absorb; a literal-zero psi is the zero class.
    """
    if psi.is_literal_zero():
        return False
    return neutrix_witness(psi) is not None
