"""Certificate synthesis, the collapse of pointwise certificates to uniform ones,
and an independent grid oracle."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage

from . import expr as E
from .certs import (BAIRE_I, TOL, CertificateError, IdealFamily, PointwiseCertificate, StageShells,
                    UniformCertificate, check_coverage, check_pointwise, check_uniform)
from .descriptors import CountableUnion, Exact, MeasureZero
from .nets import Net, PiecewiseExpr, diagonal_net, is_countably_cofinal, net_sub
from .region import Box, Constraint, RegionSet
from .verdict import Verdict

FLOOR_WIDTH = Fraction(1, 2 ** 10)
MAX_RADIUS_CONSTANT = 2 ** 16


def workers() -> int:
    try:
        return max(1, int(os.environ.get("FOAMLAB_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# stable zero profile


def stable_profile(u: Net, depth: int) -> list[RegionSet]:
    """S_mu = intersection of Z_nu over mu <= nu <= depth; index 0 holds S_1."""
    if u.monotone_zero:
        return [u.zero_region(mu) for mu in range(1, depth + 1)]
    out = [u.zero_region(depth)]
    for mu in range(depth - 1, 0, -1):
        z = u.zero_region(mu)
        nxt = out[-1]
        out.append(z if z.subset_of(nxt) else z.intersect(nxt).simplified())
    out.reverse()
    return out


def _least_stage(stages: list[RegionSet], region: RegionSet) -> int | None:
    """Least position mu (1-based) with region inside stages[mu-1]; stages are nested."""
    if not region.subset_of(stages[-1]):
        return None
    lo, hi = 0, len(stages) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if region.subset_of(stages[mid]):
            hi = mid
        else:
            lo = mid + 1
    return lo + 1


# ---------------------------------------------------------------------------
# limit of the nonvanishing region


def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """The rational with the smallest denominator (then numerator) in [lo, hi]."""
    if lo > hi:
        lo, hi = hi, lo
    if lo <= 0 <= hi:
        return Fraction(0)
    if hi < 0:
        return -simplest_between(-hi, -lo)
    fl = math.floor(lo)
    if fl == lo:
        return Fraction(fl)
    if fl + 1 <= hi:
        return Fraction(fl + 1)
    rest = simplest_between(1 / (hi - fl), 1 / (lo - fl))
    return fl + 1 / rest


def _extrapolate(bs: list[Fraction]) -> Fraction:
    b1, b2, b3 = bs
    if b1 == b2 == b3:
        return b3
    delta = abs(b3 - b2)
    guess = simplest_between(b3 - delta, b3 + delta)
    if abs(b3 - guess) <= abs(b2 - guess) <= abs(b1 - guess):
        return guess
    return b3


def limit_set(u: Net, depth: int) -> RegionSet:
    """Closed limit of the nonvanishing regions, extrapolated from positions M, 2M, 4M.

    Cells are matched across positions by their sets of constraint normals; each
    right-hand side is extrapolated to the simplest rational consistent with
    the observed convergence.  Unmatched cells contribute their closure at 4M.
    """
    omega = u.omega
    regions = [u.nonzero_region(p).simplified() for p in (depth, 2 * depth, 4 * depth)]
    if not regions[2].cells:
        return RegionSet.empty(omega)
    used = [set(), set()]
    cells = []
    for cell in regions[2].cells:
        normals = tuple(c.a for c in cell.constraints)
        match = []
        for which in (0, 1):
            found = None
            for idx, other in enumerate(regions[which].cells):
                if idx not in used[which] and tuple(c.a for c in other.constraints) == normals:
                    found = idx
                    break
            match.append(found)
        if None in match:
            cells.append([c.weak() for c in cell.constraints])
            continue
        used[0].add(match[0])
        used[1].add(match[1])
        m0 = regions[0].cells[match[0]].constraints
        m1 = regions[1].cells[match[1]].constraints
        lim = []
        for c0, c1, c2 in zip(m0, m1, cell.constraints):
            lim.append(Constraint(c2.a, _extrapolate([c0.b, c1.b, c2.b]), False))
        cells.append(lim)
    return RegionSet.from_cells(omega, cells).simplified()


# ---------------------------------------------------------------------------
# synthesis


def calibrate_radius(sing: RegionSet, stages: list[RegionSet], depth: int):
    """Smallest C in {0, 1, 2, 4, ...} with gap(mu) within C/mu of the set for all mu <= depth."""
    def shells_for(C):
        return StageShells(lambda m: stages[min(m, depth) - 1], lambda m: Fraction(C, m),
                           "stable zero profile", f"{C}/m")
    C = 0
    while C <= MAX_RADIUS_CONSTANT:
        shells = shells_for(C)
        try:
            check_coverage(sing, shells, depth)
            return C, shells
        except CertificateError:
            C = 1 if C == 0 else 2 * C
    return None, None


def _sigma_for(family: IdealFamily, sing: RegionSet, depth: int):
    if family.kind == "ND":
        return Exact(sing)
    if family.kind == "BAIRE_I":
        return CountableUnion(sing.omega, "list", items=(sing,))
    if family.kind == "M0":
        return MeasureZero((Exact(sing),))
    if sing.subset_of(family.sigma.truncate(depth)):
        return family.sigma
    return None


def synthesize_certificate(u: Net, family: IdealFamily, depth: int = 64) -> PointwiseCertificate | None:
    """Certificate from the stable zero profile, or None when no admissible set is found."""
    if u.diagonal is not None and not u.diagonal.is_literal_zero():
        return None
    sing = limit_set(u, depth)
    if not sing.is_nowhere_dense():
        return None
    sigma = _sigma_for(family, sing, depth)
    if sigma is None:
        return None
    stages = stable_profile(u, depth)
    C, shells = calibrate_radius(sigma.truncate(depth), stages, depth)
    if shells is None:
        return None
    return PointwiseCertificate(sigma, shells, family, note="synthesized")


# ---------------------------------------------------------------------------
# uniform patches and collapse


@dataclass(frozen=True)
class NotFound:
    depth: int


def find_uniform_patch(u: Net, c: PointwiseCertificate | None, A: RegionSet,
                       target: PiecewiseExpr | None = None, depth: int = 64):
    """An open set U inside A and a position nu with U in the zero set of u - target for all
    nu <= mu <= depth.  A itself is returned when possible; NotFound(depth) otherwise."""
    if A.is_empty():
        raise ValueError("A must be nonempty")
    if not A.is_open():
        raise ValueError("A must be open")
    d = u
    if target is not None and not target.is_literal_zero():
        d = net_sub(u, diagonal_net(target, u.index_set))
    stages = stable_profile(d, depth)
    nu = _least_stage(stages, A)
    if nu is not None:
        return A, nu
    for mu, s in enumerate(stages, start=1):
        inner = s.interior().intersect(A)
        if inner.has_full_cell():
            return inner.interior(), mu
    return NotFound(depth)


@dataclass
class CollapseReport:
    gamma: RegionSet
    patches: list[tuple[RegionSet, int]]
    depth: int
    nowhere_dense: bool
    uniform: Verdict
    certificate: UniformCertificate | None
    floor_cells: int = 0
    deferred_cells: int = 0
    oracle: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "gamma": self.gamma.text(),
            "gamma_nowhere_dense": self.nowhere_dense,
            "depth": self.depth,
            "patches": [{"region": r.text(), "threshold": nu} for r, nu in self.patches],
            "floor_cells": self.floor_cells,
            "deferred_cells": self.deferred_cells,
            "uniform_check": self.uniform.to_json(),
        }
        if self.oracle:
            out["oracle"] = self.oracle
        return out


def _open_box(omega: Box, lo, hi) -> RegionSet:
    cons = []
    n = omega.n
    for i in range(n):
        e = [1 if k == i else 0 for k in range(n)]
        cons.append(Constraint.make(e, hi[i], True))
        cons.append(Constraint.make([-v for v in e], -lo[i], True))
    return RegionSet.from_cells(omega, [cons])


def collapse(u: Net, c: PointwiseCertificate, depth: int = 64, order: int = 3) -> CollapseReport:
    """Upgrade a verified pointwise certificate to a uniform one with a closed nowhere dense set."""
    cof = is_countably_cofinal(u.index_set, depth)
    if cof.kind != "Confirmed":
        raise ValueError(f"index set is not countably co-final: {cof.witness}")
    v = check_pointwise(u, c, depth, order)
    if v.kind != "Verified":
        raise CertificateError(f"certificate does not verify: {v.kind} {v.witness or v.detail}")
    omega = u.omega
    stages = stable_profile(u, depth)
    patches_open = [s.interior() for s in stages]
    gamma = limit_set(u, depth)
    C, _ = calibrate_radius(gamma, patches_open, depth)
    near = gamma.inflate(Fraction(C, depth)) if C is not None and gamma.cells else None

    resolved: list[tuple[RegionSet, int]] = []
    floor: list[RegionSet] = []
    deferred = 0
    queue = [(tuple(omega.lo), tuple(omega.hi))]
    while queue:
        lo, hi = queue.pop(0)
        box = _open_box(omega, lo, hi)
        nu = _least_stage(patches_open, box)
        if nu is not None:
            resolved.append((box, nu))
            continue
        if near is not None and box.subset_of(near):
            deferred += 1
            continue
        if all(h - l <= FLOOR_WIDTH for l, h in zip(lo, hi)):
            floor.append(box.closure())
            continue
        halves = [[(l, (l + h) / 2), ((l + h) / 2, h)] for l, h in zip(lo, hi)]
        kids = [(tuple(p[0] for p in combo), tuple(p[1] for p in combo)) for combo in itertools.product(*halves)]
        queue.extend(sorted(kids))
    for f in floor:
        gamma = gamma.union(f)
    gamma = gamma.closure()
    if not floor and C is not None:
        shells = StageShells(lambda m: patches_open[min(m, depth) - 1], lambda m: Fraction(C, m),
                             "interior of stable zero profile", f"{C}/m")
    else:
        C2, shells = calibrate_radius(gamma, patches_open, depth)
        if shells is None:
            shells = StageShells(lambda m: patches_open[min(m, depth) - 1], lambda m: Fraction(0),
                                 "interior of stable zero profile", "0")
    cert = UniformCertificate(gamma, shells)
    nd = gamma.is_nowhere_dense()
    try:
        uv = check_uniform(u, cert, depth, order)
    except CertificateError as exc:
        uv = Verdict("Unknown", depth, detail=str(exc))
    return CollapseReport(gamma, resolved, depth, nd, uv, cert if uv.kind == "Verified" else None,
                          len(floor), deferred)


# ---------------------------------------------------------------------------
# brute-force oracle


@dataclass
class OracleResult:
    verdict: Verdict
    h: Fraction
    points: np.ndarray            # integer grid coordinates (n, N)
    min_index: np.ndarray         # minimal chain position, 0 for "never" (bad)
    bad: np.ndarray               # boolean mask

    def bad_points(self) -> list[tuple[Fraction, ...]]:
        idx = np.nonzero(self.bad)[0]
        return [tuple(Fraction(int(v)) * self.h for v in self.points[:, j]) for j in idx]

    def rows(self) -> list[list]:
        out = []
        for x in self.bad_points():
            out.append([*x, "NONE"])
        return out


def grid_points(omega: Box, h: Fraction) -> tuple[np.ndarray, list[int]]:
    axes = []
    for lo, hi in zip(omega.lo, omega.hi):
        start = math.floor(lo / h) + 1
        stop = math.ceil(hi / h) - 1
        axes.append(np.arange(start, stop + 1, dtype=np.int64))
    mesh = np.meshgrid(*axes, indexing="ij")
    shape = [len(a) for a in axes]
    return np.stack([m.ravel() for m in mesh]), shape


def region_mask(region: RegionSet, J: np.ndarray, h: Fraction) -> np.ndarray:
    """Exact membership of grid points x = J*h (already inside omega)."""
    out = np.zeros(J.shape[1], dtype=bool)
    big = int(np.abs(J).max()) if J.size else 0
    for cell in region.cells:
        inside = np.ones(J.shape[1], dtype=bool)
        for c in cell.constraints:
            rhs = c.b / h                      # a.J <= rhs
            p, q = rhs.numerator, rhs.denominator
            bound = q * sum(abs(v) for v in c.a) * big
            if abs(p) < 2 ** 62 and bound < 2 ** 62:
                lhs = q * (np.asarray(c.a, dtype=np.int64) @ J)
                ok = lhs < p if c.strict else lhs <= p
            else:
                lhs = (np.asarray(c.a, dtype=object) @ J.astype(object)) * q
                ok = np.array([(v < p) if c.strict else (v <= p) for v in lhs], dtype=bool)
            inside &= ok
        out |= inside
    return out


def net_values(u: Net, mu: int, J: np.ndarray, X: np.ndarray, h: Fraction) -> np.ndarray:
    """Values of the mu-th instance at the grid points x = J*h."""
    pw = u.at(mu)
    value = np.zeros(J.shape[1])
    assigned = np.zeros(J.shape[1], dtype=bool)
    for region, e in pw.pieces:
        mask = region_mask(region, J, h) & ~assigned
        assigned |= mask
        if not e.is_zero and mask.any():
            value[mask] = E.eval_array(e, X[:, mask])
    return value


def _derivative_ok(u: Net, mu: int, J: np.ndarray, X: np.ndarray, h: Fraction, order: int):
    pw = u.at(mu)
    idx = E.multi_indices(u.omega.n, order)
    ok = np.ones(J.shape[1], dtype=bool)
    value = np.zeros(J.shape[1])
    assigned = np.zeros(J.shape[1], dtype=bool)
    for region, e in pw.pieces:
        mask = region_mask(region, J, h) & ~assigned
        assigned |= mask
        if e.is_zero or not mask.any():
            continue
        sub = X[:, mask]
        cache: dict = {}
        sub_ok = np.ones(sub.shape[1], dtype=bool)
        for p in idx:
            vals = E.eval_array(E.diff(e, p) if any(p) else e, sub, cache)
            if not any(p):
                value[mask] = vals
            sub_ok &= np.abs(vals) <= TOL
        ok[mask] = sub_ok
    return ok, value


def brute_force_membership(u: Net, family: IdealFamily = BAIRE_I, h=Fraction(1, 128), depth: int = 64,
                           order: int = 3) -> OracleResult:
    h = Fraction(h)
    if h > Fraction(1, 8):
        raise ValueError("grid step must be at most 1/8")
    J, shape = grid_points(u.omega, h)
    X = J.astype(float) * float(h)
    positions = list(range(depth, 0, -1))
    with ThreadPoolExecutor(max_workers=workers()) as pool:
        results = list(pool.map(lambda mu: _derivative_ok(u, mu, J, X, h, order), positions))
    still = np.ones(J.shape[1], dtype=bool)
    min_index = np.zeros(J.shape[1], dtype=np.int64)
    for mu, (ok, _) in zip(positions, results):
        still &= ok
        min_index[still] = mu
    bad = min_index == 0
    last_value = results[0][1]
    count = int(bad.sum())
    n = u.omega.n
    stats = {"points": int(J.shape[1]), "bad": count, "fraction": count / max(1, J.shape[1]),
             "bad_measure": Fraction(count) * h ** n, "grid": h, "depth": depth, "order": order}
    verdict = Verdict("NoCounterexample", depth, stats)
    if count:
        witness = None
        if family.kind == "SINGLE":
            target = family.sigma.truncate(depth)
            for j in np.nonzero(bad)[0]:
                x = tuple(Fraction(int(v)) * h for v in J[:, j])
                dist = target.linf_distance(x)
                if dist is None or dist > h:
                    witness = j
                    break
        else:
            grid_bad = bad.reshape(shape)
            core = ndimage.binary_erosion(grid_bad, structure=np.ones((9,) * n, dtype=bool),
                                          border_value=1).ravel()
            if core.any():
                cand = np.nonzero(core)[0]
                mags = np.abs(last_value[cand])
                witness = cand[int(np.argmax(mags))]   # argmax returns the first maximum
        if witness is not None:
            x = [Fraction(int(v)) * h for v in J[:, witness]]
            verdict = Verdict("Counterexample", depth, {"x": x, **stats})
    return OracleResult(verdict, h, J, min_index, bad)


def bad_points_near(gamma: RegionSet, result: OracleResult, tol=None) -> list[tuple[Fraction, ...]]:
    """Oracle bad points farther than ``tol`` (default: the grid step) from gamma."""
    tol = result.h if tol is None else Fraction(tol)
    out = []
    for x in result.bad_points():
        d = gamma.linf_distance(x)
        if d is None or d > tol:
            out.append(x)
    return out
