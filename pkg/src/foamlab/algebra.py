"""Quotient algebra elements: equality up to the ideal, arithmetic, embeddings,
mollifier nets and polynomial differential operators."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
import numpy as np
from scipy import ndimage

from . import expr as E
from .certs import BAIRE_I, ND, TOL, IdealFamily, check_pointwise, neutrix_witness
from .collapse import grid_points, net_values, synthesize_certificate
from .nets import (IndexSet, Net, PiecewiseExpr, check_gluing, combine, constant_net, diagonal_net,
                   is_countably_cofinal, net_add, net_diff, net_mul, net_neg, net_scale, net_sub)
from .region import Box
from .verdict import Verdict


class ContextMismatch(ValueError):
    pass


class InternalInconsistency(RuntimeError):
    pass


@dataclass(frozen=True)
class AlgebraContext:
    omega: Box
    index_set: IndexSet
    family: IdealFamily = ND

    def __post_init__(self):
        cof = is_countably_cofinal(self.index_set)
        if cof.kind != "Confirmed":
            raise ValueError(f"index set is not countably co-final: {cof.witness}")

    def with_family(self, family: IdealFamily) -> "AlgebraContext":
        return AlgebraContext(self.omega, self.index_set, family)


@dataclass
class FoamElement:
    rep: Net
    ctx: AlgebraContext
    cert_cache: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rep.index_set != self.ctx.index_set or self.rep.omega != self.ctx.omega:
            raise ContextMismatch("representative does not match the algebra context")

    def __add__(self, other: "FoamElement") -> "FoamElement":
        return elem_add(self, other)

    def __sub__(self, other: "FoamElement") -> "FoamElement":
        return elem_add(self, elem_neg(other))

    def __mul__(self, other: "FoamElement") -> "FoamElement":
        return elem_mul(self, other)

    def __neg__(self) -> "FoamElement":
        return elem_neg(self)


def _same(a: FoamElement, b: FoamElement) -> None:
    if a.ctx != b.ctx:
        raise ContextMismatch("elements belong to different algebras")


def elem_add(a: FoamElement, b: FoamElement) -> FoamElement:
    _same(a, b)
    return FoamElement(net_add(a.rep, b.rep), a.ctx)


def elem_mul(a: FoamElement, b: FoamElement) -> FoamElement:
    _same(a, b)
    return FoamElement(net_mul(a.rep, b.rep), a.ctx)


def elem_neg(a: FoamElement) -> FoamElement:
    return FoamElement(net_neg(a.rep), a.ctx)


def elem_scale(a: FoamElement, c) -> FoamElement:
    return FoamElement(net_scale(a.rep, c), a.ctx)


def elem_diff(a: FoamElement, p: E.MultiIndex) -> FoamElement:
    return FoamElement(net_diff(a.rep, p), a.ctx)


def zero(ctx: AlgebraContext) -> FoamElement:
    return FoamElement(constant_net(ctx.omega, ctx.index_set, 0), ctx)


def one(ctx: AlgebraContext) -> FoamElement:
    return FoamElement(constant_net(ctx.omega, ctx.index_set, 1), ctx)


def embed_smooth(psi: PiecewiseExpr | E.Expr, ctx: AlgebraContext, name: str = "psi") -> FoamElement:
    if isinstance(psi, E.Expr):
        psi = PiecewiseExpr.constant(ctx.omega, psi)
    return FoamElement(diagonal_net(psi, ctx.index_set, name), ctx)


def nd_to_bi_hom(a: FoamElement) -> FoamElement:
    """The same representative viewed in the first-category algebra."""
    if a.ctx.family.kind != "ND":
        raise ValueError("source element must live in the nowhere dense algebra")
    return FoamElement(a.rep, a.ctx.with_family(BAIRE_I))


# ---------------------------------------------------------------------------
# equality


def _diagonal_obstruction(d: Net):
    if d.diagonal is None or d.diagonal.is_literal_zero():
        return None
    x = neutrix_witness(d.diagonal)
    if x is None:
        return None
    return {"x": list(x), "value": d.diagonal.evaluate(x), "reason": "index-independent difference"}


def _persistent_patch(d: Net, depth: int, h=Fraction(1, 16)):
    """Centre of a 3^n block of grid points on which |d_mu| stays above the
    tolerance at every chain position up to depth.

    A single persistent point is not enough: it may lie on the singular set.
    """
    J, shape = grid_points(d.omega, h)
    X = J.astype(float) * float(h)
    alive = np.ones(J.shape[1], dtype=bool)
    structure = np.ones((3,) * d.omega.n, dtype=bool)
    for mu in range(1, depth + 1):
        idx = np.nonzero(alive)[0]
        vals = net_values(d, mu, J[:, idx], X[:, idx], h)
        alive[idx[np.abs(vals) <= TOL]] = False
        if not ndimage.binary_erosion(alive.reshape(shape), structure).any():
            return None
    core = ndimage.binary_erosion(alive.reshape(shape), structure).ravel()
    j = int(np.nonzero(core)[0][0])
    x = [Fraction(int(v)) * h for v in J[:, j]]
    return {"x": x, "value": float(net_values(d, depth, J[:, [j]], X[:, [j]], h)[0]),
            "patch_radius": h, "reason": f"nonzero near x at every chain position up to {depth}"}


def eq(a: FoamElement, b: FoamElement, depth: int = 64, order: int = 3) -> Verdict:
    """Equal with a verified certificate for a - b, NotEqual with an obstruction, else Unknown."""
    _same(a, b)
    d = net_sub(a.rep, b.rep)
    cert = synthesize_certificate(d, a.ctx.family, depth)
    equal = None
    if cert is not None:
        v = check_pointwise(d, cert, depth, order)
        if v.kind == "Verified":
            equal = Verdict("Equal", depth, {"sigma": cert.sigma.truncate(depth)}, payload=cert)
    obstruction = _diagonal_obstruction(d)
    if obstruction is None and d.diagonal is None:
        obstruction = _persistent_patch(d, depth)
    if equal is not None and obstruction is not None:
        raise InternalInconsistency("both an equality certificate and a disequality witness were found")
    if equal is not None:
        return equal
    if obstruction is not None:
        return Verdict("NotEqual", depth, obstruction)
    return Verdict("Unknown", depth)


# ---------------------------------------------------------------------------
# mollifiers


def mollifier_net(kind: str, ctx: AlgebraContext, axis: int = 0) -> FoamElement:
    """Delta: k*nbump(k*x); Heaviside: sstep(k*x).

    The normal form splits at |k*x| = 1, so the outer pieces are literal
    plateaus (0 for delta, 0 and 1 for Heaviside).
    """
    n = ctx.omega.n
    if kind not in ("delta", "heaviside"):
        raise ValueError(f"unsupported mollifier kind {kind!r}")
    if not 0 <= axis < n:
        raise ValueError(f"axis {axis + 1} outside dimension {n}")
    x = E.var(axis)

    def template(label):
        k = E.const(_scale(ctx.index_set, label))
        e = k * E.nbump(k * x) if kind == "delta" else E.sstep(k * x)
        return PiecewiseExpr.build(ctx.omega, [], e)

    return FoamElement(Net(ctx.index_set, ctx.omega, template, monotone_zero=True, name=kind), ctx)


def _scale(index_set: IndexSet, label) -> int:
    b = index_set.bindings(label)
    return b["k"] if "k" in b else b["k1"]


def delta_integral(k: int) -> float:
    """Integral of k*nbump(k*x) over its support, by adaptive quadrature."""
    from scipy.integrate import quad

    from .special import BUMP_INTEGRAL, bump_d

    val, _ = quad(lambda x: k * bump_d(0, k * x), -1.0 / k, 1.0 / k, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val / BUMP_INTEGRAL


# ---------------------------------------------------------------------------
# differential operators


_SLOT = re.compile(r"\bd([xyzt]+)\(\s*u\s*\)|\bu\b")


@dataclass(frozen=True)
class DiffOperator:
    """Polynomial in u and its derivatives, with coefficients in the expression fragment.

    Derivative slots are written ``dx(u)``, ``dt(u)``, ``dxx(u)``; x, y, z name the
    first three axes and t the last one.
    """

    text: str
    n: int
    slots: tuple[E.MultiIndex, ...]
    poly: E.Expr            # over x1..xn followed by one variable per slot

    @staticmethod
    def parse(text: str, n: int) -> "DiffOperator":
        from .parser import ParseError, parse_expr

        slots: list[E.MultiIndex] = []
        names: dict[E.MultiIndex, str] = {}

        def order_of(letters: str) -> E.MultiIndex:
            p = [0] * n
            for ch in letters:
                axis = n - 1 if ch == "t" else "xyz".index(ch)
                if axis >= n:
                    raise ParseError(f"derivative d{letters} needs dimension > {axis}")
                p[axis] += 1
            return tuple(p)

        def repl(m: re.Match) -> str:
            p = order_of(m.group(1)) if m.group(1) else tuple([0] * n)
            if p not in names:
                names[p] = f"slot{len(slots)}"
                slots.append(p)
            return names[p]

        body = _SLOT.sub(repl, text)
        symbols = {name: E.var(n + i) for i, name in enumerate(names[p] for p in slots)}
        poly = parse_expr(body, n, symbols)
        for a in poly.atoms:
            if a.kind != "x" and a.arg is not None and a.arg.max_var >= n:
                raise ParseError("u may only enter polynomially")
        return DiffOperator(text, n, tuple(slots), poly)

    @property
    def order(self) -> int:
        return max((sum(p) for p in self.slots), default=0)


def apply_operator(T: DiffOperator, a: FoamElement) -> FoamElement:
    u = a.rep
    if T.n != u.omega.n:
        raise ValueError("operator and element have different dimensions")
    if not T.slots:
        return FoamElement(combine([u], lambda es: T.poly, "T(u)"), a.ctx)
    slot_nets = [net_diff(u, p) for p in T.slots]
    for net in slot_nets:
        check_gluing(u.omega, net.at(1).pieces, random.Random(0), samples=20)

    def fn(es):
        return E.substitute(T.poly, {T.n + i: e for i, e in enumerate(es)})
    return FoamElement(combine(slot_nets, fn, f"T({u.name})"), a.ctx)


def is_generalized_solution(T: DiffOperator, a: FoamElement, depth: int = 64) -> Verdict:
    return eq(apply_operator(T, a), zero(a.ctx), depth)


def shock_net(ctx: AlgebraContext, left=0, right=1) -> FoamElement:
    """u_k = a + (b - a) sstep(k (x - c t)) with c = (a + b)/2; x is the first axis, t the last."""
    left, right = Fraction(left), Fraction(right)
    c = (left + right) / 2
    n = ctx.omega.n
    x, t = E.var(0), E.var(n - 1)

    def template(label):
        k = _scale(ctx.index_set, label)
        arg = E.const(k) * (x - E.const(c) * t)
        return PiecewiseExpr.build(ctx.omega, [], E.const(left) + E.const(right - left) * E.sstep(arg))

    return FoamElement(Net(ctx.index_set, ctx.omega, template, name="shock"), ctx)
