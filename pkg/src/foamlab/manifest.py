"""Manifest files: TOML text describing a space, named objects and a task list.

Layout::

    [space]        dimension, omega = [[lo, hi], ...], index, family
    [params]       name = "rational"           (symbols usable in any expression)
    [sets.NAME]    kind = exact|rationals|dyadics|list|union|measure_zero
    [nets.NAME]    builtin | diagonal | combine | [[nets.NAME.piece]] region/expr
    [certs.NAME]   net, family, sigma, stages (region in m), radius (expr in m)
    [operators.NAME] expr = "dt(u) + u*dx(u)"
    [[task]]       kind = check|eq|collapse|solve|neutrix|demo|residual|oracle

Rationals are written as strings ("1/3") so that they stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import tomli
import tomli_w

from . import expr as E
from .algebra import AlgebraContext, DiffOperator, mollifier_net, shock_net
from .certs import IdealFamily, PointwiseCertificate, StageShells, family_from_name
from .descriptors import CountableUnion, Exact, MeasureZero, family_union
from .nets import (CofinalMapped, Naturals, Net, PiecewiseExpr, ProductNN, combine, diagonal_net,
                   net_from_text)
from .parser import ParseError, parse_expr, parse_region
from .region import Box, RegionSet

DEFAULTS = {"depth": 64, "grid": "1/128", "order": 3, "seed": 0}
TASK_KINDS = ("check", "eq", "collapse", "solve", "neutrix", "demo", "residual", "oracle")
SET_KINDS = ("exact", "rationals", "dyadics", "list", "union", "measure_zero")


class ManifestSyntaxError(ValueError):
    """The text is not valid TOML."""


class ManifestError(ValueError):
    """The manifest is well-formed TOML but its content is invalid."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


@dataclass
class Manifest:
    data: dict

    def __eq__(self, other):
        return isinstance(other, Manifest) and self.data == other.data


def loads(text: str) -> Manifest:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ManifestSyntaxError(str(exc)) from exc
    return Manifest(canonical(data))


def load(path) -> Manifest:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dumps(m: Manifest) -> str:
    return tomli_w.dumps(m.data)


def canonical(data: dict) -> dict:
    """Fill defaults and normalise scalars so that equal manifests compare equal."""
    data = dict(data)
    space = dict(data.get("space", {}))
    space.setdefault("index", "naturals")
    space.setdefault("family", "ND")
    data["space"] = space
    for key in ("params", "sets", "nets", "certs", "operators"):
        data[key] = dict(data.get(key, {}))
    tasks = []
    for i, t in enumerate(data.get("task", [])):
        t = dict(t)
        t.setdefault("name", f"{t.get('kind', 'task')}-{i + 1}")
        tasks.append(t)
    data["task"] = tasks
    return data


# ---------------------------------------------------------------------------
# building objects


def _need(table: dict, key: str, where: str):
    if key not in table:
        raise ManifestError(where, f"missing key {key!r}")
    return table[key]


def _rational(v, where: str) -> Fraction:
    try:
        return Fraction(str(v))
    except (ValueError, ZeroDivisionError) as exc:
        raise ManifestError(where, f"not a rational number: {v!r}") from exc


def _located(where: str, fn, *args, **kwargs):
    """Run a parser and re-raise its errors with the manifest location."""
    try:
        return fn(*args, **kwargs)
    except ParseError as exc:
        raise ManifestError(where, _parse_error_text(exc)) from exc
    except E.GuardError as exc:
        raise ManifestError(where, str(exc)) from exc


def _parse_error_text(exc: ParseError) -> str:
    out = exc.message
    if exc.pos is not None:
        out += f" (offset {exc.pos})"
    if exc.text:
        out += f" in {exc.text!r}"
    return out


@dataclass
class Workspace:
    manifest: Manifest
    omega: Box
    index_set: Any
    family: IdealFamily
    symbols: dict[str, E.Expr]
    sets: dict[str, Any] = field(default_factory=dict)
    nets: dict[str, Net] = field(default_factory=dict)
    certs: dict[str, tuple[str | None, PointwiseCertificate]] = field(default_factory=dict)
    operators: dict[str, DiffOperator] = field(default_factory=dict)

    def context(self, family: IdealFamily | None = None) -> AlgebraContext:
        return AlgebraContext(self.omega, self.index_set, family or self.family)

    def family_named(self, name: str | None, where: str) -> IdealFamily:
        if name is None:
            return self.family
        if name.upper().startswith("SINGLE:"):
            set_name = name.split(":", 1)[1]
            if set_name not in self.sets:
                raise ManifestError(where, f"unknown set {set_name!r}")
            from .certs import SingleSet
            try:
                return SingleSet(self.sets[set_name])
            except ValueError as exc:
                raise ManifestError(where, str(exc)) from exc
        try:
            return family_from_name(name)
        except ValueError as exc:
            raise ManifestError(where, str(exc)) from exc

    def net(self, name: str, where: str) -> Net:
        if name not in self.nets:
            raise ManifestError(where, f"unknown net {name!r}")
        return self.nets[name]

    def region(self, text: str, where: str, **extra) -> RegionSet:
        syms = dict(self.symbols)
        syms.update({k: E.const(v) for k, v in extra.items()})
        return _located(where, parse_region, text, self.omega, syms)


def _index_set(spec, where: str):
    if isinstance(spec, str):
        if spec == "naturals":
            return Naturals()
        if spec == "product":
            return ProductNN()
        raise ManifestError(where, f"unknown index set {spec!r}")
    if isinstance(spec, dict) and spec.get("kind") == "cofinal":
        if "rule" in spec:
            return CofinalMapped(rule=str(spec["rule"]))
        chain = spec.get("chain")
        if not chain or not all(isinstance(c, int) for c in chain):
            raise ManifestError(where, "cofinal index needs an integer chain or a rule")
        return CofinalMapped(chain=tuple(chain))
    raise ManifestError(where, f"unknown index set {spec!r}")


def build(m: Manifest) -> Workspace:
    data = m.data
    space = data["space"]
    n = _need(space, "dimension", "space")
    if not isinstance(n, int) or not 1 <= n <= 3:
        raise ManifestError("space.dimension", "dimension must be 1, 2 or 3")
    omega_spec = _need(space, "omega", "space")
    if not isinstance(omega_spec, list) or len(omega_spec) != n:
        raise ManifestError("space.omega", f"expected {n} [lo, hi] pairs")
    lo, hi = [], []
    for j, pair in enumerate(omega_spec):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ManifestError(f"space.omega[{j}]", "expected [lo, hi]")
        a, b = (_rational(v, f"space.omega[{j}]") for v in pair)
        if not a < b:
            raise ManifestError(f"space.omega[{j}]", "need lo < hi")
        lo.append(a)
        hi.append(b)
    omega = Box(tuple(lo), tuple(hi))
    index_set = _index_set(space["index"], "space.index")
    from .nets import is_countably_cofinal

    cof = is_countably_cofinal(index_set)
    if cof.kind != "Confirmed":
        raise ManifestError("space.index", f"index set is not countably co-final: {cof.witness}")
    try:
        family = family_from_name(space["family"])
    except ValueError as exc:
        raise ManifestError("space.family", str(exc)) from exc
    symbols = {name: E.const(_rational(v, f"params.{name}")) for name, v in data["params"].items()}
    ws = Workspace(m, omega, index_set, family, symbols)

    for name, spec in data["sets"].items():
        ws.sets[name] = _build_set(ws, name, spec)
    for name, spec in data["nets"].items():
        ws.nets[name] = _build_net(ws, name, spec)
    for name, spec in data["operators"].items():
        where = f"operators.{name}"
        try:
            ws.operators[name] = DiffOperator.parse(str(_need(spec, "expr", where)), n)
        except ParseError as exc:
            raise ManifestError(where, str(exc)) from exc
    for name, spec in data["certs"].items():
        ws.certs[name] = _build_cert(ws, name, spec)
    for i, task in enumerate(data["task"]):
        where = f"task[{i + 1}]"
        if task.get("kind") not in TASK_KINDS:
            raise ManifestError(where, f"unknown task kind {task.get('kind')!r}")
        if task.get("expect", "positive") not in ("positive", "negative"):
            raise ManifestError(where, "expect must be 'positive' or 'negative'")
    return ws


def _build_set(ws: Workspace, name: str, spec: dict):
    where = f"sets.{name}"
    kind = _need(spec, "kind", where)
    if kind == "exact":
        return Exact(ws.region(str(_need(spec, "region", where)), where + ".region"))
    if kind in ("rationals", "dyadics"):
        return CountableUnion(ws.omega, kind)
    if kind == "list":
        items = _need(spec, "items", where)
        return CountableUnion(ws.omega, "list", tuple(ws.region(str(t), f"{where}.items[{j}]")
                                                      for j, t in enumerate(items)))
    if kind in ("union", "measure_zero"):
        parts = []
        for p in _need(spec, "parts", where):
            if p not in ws.sets:
                raise ManifestError(where, f"unknown set {p!r} (sets must be defined before use)")
            parts.append(ws.sets[p])
        if not parts:
            raise ManifestError(where, "needs at least one part")
        if kind == "measure_zero":
            return MeasureZero(tuple(parts))
        out = parts[0]
        try:
            for p in parts[1:]:
                out = family_union(out, p)
        except ValueError as exc:
            raise ManifestError(where, str(exc)) from exc
        return out
    raise ManifestError(where, f"unknown set kind {kind!r}; expected one of {', '.join(SET_KINDS)}")


def _build_net(ws: Workspace, name: str, spec: dict) -> Net:
    where = f"nets.{name}"
    n = ws.omega.n
    ctx = AlgebraContext(ws.omega, ws.index_set, ws.family)
    if "builtin" in spec:
        kind = spec["builtin"]
        axis = int(spec.get("axis", 1)) - 1
        try:
            if kind in ("delta", "heaviside"):
                net = mollifier_net(kind, ctx, axis).rep
            elif kind == "shock":
                net = shock_net(ctx, _rational(spec.get("left", "0"), where),
                                _rational(spec.get("right", "1"), where)).rep
            else:
                raise ManifestError(where, f"unknown builtin {kind!r}")
        except ValueError as exc:
            raise ManifestError(where, str(exc)) from exc
        net.name = name
        return net
    if "diagonal" in spec:
        psi = _located(where + ".diagonal", parse_expr, str(spec["diagonal"]), n, ws.symbols)
        return diagonal_net(PiecewiseExpr.constant(ws.omega, psi), ws.index_set, name)
    if "combine" in spec:
        names = list(ws.nets)
        syms = dict(ws.symbols)
        used = []
        for j, other in enumerate(names):
            syms[other] = E.var(n + j)
        poly = _located(where + ".combine", parse_expr, str(spec["combine"]), n, syms)
        for j, other in enumerate(names):
            if any(a.kind == "x" and a.order == n + j for a in poly.atoms):
                used.append((j, other))
        if not used:
            raise ManifestError(where, "combine expression uses no net")
        nets = [ws.nets[o] for _, o in used]
        slots = {n + j: k for k, (j, _) in enumerate(used)}

        def fn(es, poly=poly, slots=slots):
            return E.substitute(poly, {v: es[k] for v, k in slots.items()})
        return combine(nets, fn, name)
    pieces = [(str(_need(p, "region", f"{where}.piece[{j}]")), str(_need(p, "expr", f"{where}.piece[{j}]")))
              for j, p in enumerate(spec.get("piece", []))]
    syms = {**ws.symbols, **{k: E.const(v) for k, v in ws.index_set.bindings(ws.index_set.label(1)).items()}}
    for j, (rtext, etext) in enumerate(pieces):
        region = _located(f"{where}.piece[{j}].region", parse_region, rtext, ws.omega, syms)
        _located(f"{where}.piece[{j}].expr", parse_expr, etext, n, syms, region=region)
    default = spec.get("default", "0")
    net = net_from_text(ws.omega, ws.index_set, pieces, None if default is False else str(default),
                        bool(spec.get("monotone_zero", False)), name, ws.symbols)
    # Instantiate and check gluing now so that bad pieces are reported at load time.
    try:
        net.validate(DEFAULTS["depth"])
    except ParseError as exc:
        raise ManifestError(where, _parse_error_text(exc)) from exc
    except ValueError as exc:
        raise ManifestError(where, str(exc)) from exc
    return net


def _build_cert(ws: Workspace, name: str, spec: dict) -> tuple[str | None, PointwiseCertificate]:
    where = f"certs.{name}"
    sigma_name = _need(spec, "sigma", where)
    if sigma_name not in ws.sets:
        raise ManifestError(where, f"unknown set {sigma_name!r}")
    family = ws.family_named(spec.get("family"), where)
    stages_text = str(_need(spec, "stages", where))
    radius_text = str(spec.get("radius", "0"))
    ws.region(stages_text, where + ".stages", m=1)
    _located(where + ".radius", parse_expr, radius_text, 0, {**ws.symbols, "m": E.const(1)})

    def template(mu: int, text=stages_text):
        return ws.region(text, where + ".stages", m=mu)

    def radius(mu: int, e=radius_text):
        val = _located(where + ".radius", parse_expr, e, None, {**ws.symbols, "m": E.const(mu)})
        if not val.is_constant:
            raise ManifestError(where + ".radius", "radius must be a rational expression in m")
        return val.constant_value

    shells = StageShells(template, radius, stages_text, radius_text)
    return spec.get("net"), PointwiseCertificate(ws.sets[sigma_name], shells, family, note=name)
