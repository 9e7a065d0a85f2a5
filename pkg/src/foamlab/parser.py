"""Recursive-descent parser for expressions and region constraints.

Expression grammar (``/`` only by a nonzero constant, so ``p/q`` literals and
``x1/2`` work but ``x1/x2`` does not)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' (INT | SYMBOL))?
    base   := INT | 'x' INT | SYMBOL | FUNC '(' expr ')' | '(' expr ')'

Region grammar::

    region := 'empty' | 'all' | conj ('|' conj)*
    conj   := chain ('&' chain)*
    chain  := expr (REL expr)+            REL in < <= > >= =
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from . import expr as E
from .region import Box, Constraint, RegionSet


class ParseError(ValueError):
    def __init__(self, message: str, pos: int | None = None, text: str | None = None):
        self.message = message
        self.pos = pos
        self.text = text
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(<=|>=|[-+*/^(),<>=&|]))")

_FUNCS = {
    "exp": E.exp,
    "sin": E.sin,
    "cos": E.cos,
    "bump": E.bump,
    "sstep": E.sstep,
    "nbump": E.nbump,
    "inv": E.inv,
}
_DERIV_FUNC = re.compile(r"^(bump|nbump)_d(\d+)$")


@dataclass
class _Tok:
    kind: str  # int | name | op | end
    value: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start, text)
        start = m.start(m.lastindex)
        if m.group(1):
            out.append(_Tok("int", m.group(1), start))
        elif m.group(2):
            out.append(_Tok("name", m.group(2), start))
        else:
            out.append(_Tok("op", m.group(3), start))
        pos = m.end()
    out.append(_Tok("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, n: int | None, symbols: Mapping[str, E.Expr]):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.n = n
        self.symbols = symbols
        self.used_inv = False

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str) -> _Tok:
        t = self.take()
        if t.value != value:
            raise ParseError(f"expected {value!r} but found {t.value or 'end of input'!r}", t.pos, self.text)
        return t

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.pos, self.text)

    # grammar -----------------------------------------------------------
    def expr(self) -> E.Expr:
        acc = self.term()
        while self.peek().value in ("+", "-") and self.peek().kind == "op":
            op = self.take().value
            rhs = self.term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self) -> E.Expr:
        acc = self.factor()
        while self.peek().kind == "op" and self.peek().value in ("*", "/"):
            op = self.take()
            rhs = self.factor()
            if op.value == "*":
                acc = acc * rhs
            else:
                if not rhs.is_constant:
                    raise ParseError("division is only allowed by a constant", op.pos, self.text)
                if rhs.is_zero:
                    raise ParseError("division by zero", op.pos, self.text)
                acc = acc * E.const(1 / rhs.constant_value)
        return acc

    def factor(self) -> E.Expr:
        if self.peek().kind == "op" and self.peek().value == "-":
            self.take()
            return -self.factor()
        base = self.base()
        if self.peek().kind == "op" and self.peek().value == "^":
            self.take()
            t = self.take()
            if t.kind == "int":
                power = int(t.value)
            elif t.kind == "name" and t.value in self.symbols and self.symbols[t.value].is_constant \
                    and self.symbols[t.value].constant_value.denominator == 1 \
                    and self.symbols[t.value].constant_value >= 0:
                power = int(self.symbols[t.value].constant_value)
            else:
                raise ParseError("exponent must be a non-negative integer", t.pos, self.text)
            base = base ** power
        return base

    def base(self) -> E.Expr:
        t = self.take()
        if t.kind == "int":
            return E.const(int(t.value))
        if t.kind == "op" and t.value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "name":
            name = t.value
            if name in self.symbols:
                return self.symbols[name]
            m = re.fullmatch(r"x(\d+)", name)
            if m:
                idx = int(m.group(1))
                if idx < 1 or (self.n is not None and idx > self.n):
                    raise ParseError(f"variable {name} outside dimension {self.n}", t.pos, self.text)
                return E.var(idx - 1)
            fn = _FUNCS.get(name)
            dm = _DERIV_FUNC.match(name)
            if fn is None and dm is None:
                raise ParseError(f"unknown identifier {name!r}", t.pos, self.text)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            if name == "inv":
                self.used_inv = True
                if arg.is_constant and arg.is_zero:
                    raise ParseError("inv of zero", t.pos, self.text)
            if dm is not None:
                order = int(dm.group(2))
                return E.bump(arg, order) if dm.group(1) == "bump" else E.sstep(arg, order + 1)
            return fn(arg)
        raise ParseError(f"unexpected token {t.value or 'end of input'!r}", t.pos, self.text)


def parse_expr(text: str, n: int | None = None, symbols: Mapping[str, E.Expr] | None = None,
               region: RegionSet | None = None) -> E.Expr:
    """Parse an expression; ``inv`` requires a guarding ``region``."""
    p = _Parser(text, n, dict(symbols or {}))
    e = p.expr()
    if p.peek().kind != "end":
        p.error(f"unexpected token {p.peek().value!r}")
    if p.used_inv:
        if region is None:
            raise ParseError("unguarded inv: a piece region is required", None, text)
        try:
            E.check_guards(e, region)
        except E.GuardError as exc:
            raise ParseError(f"unguarded inv: {exc}", None, text) from exc
    return e


def rational_symbols(**values) -> dict[str, E.Expr]:
    return {k: E.const(Fraction(v)) for k, v in values.items()}


# ---------------------------------------------------------------------------
# regions

_REL_SPLIT = re.compile(r"(<=|>=|<|>|=)")


def _affine(text: str, n: int, symbols, offset: int) -> tuple[list[Fraction], Fraction]:
    try:
        e = parse_expr(text, n, symbols)
    except ParseError as exc:
        pos = None if exc.pos is None else exc.pos + offset
        raise ParseError(exc.message, pos) from exc
    aff = E.as_affine(e, n)
    if aff is None:
        raise ParseError(f"constraint side {text.strip()!r} is not affine", offset)
    return aff


def _chain_constraints(text: str, n: int, symbols, offset: int) -> list[Constraint]:
    parts = _REL_SPLIT.split(text)
    if len(parts) < 3:
        raise ParseError("constraint needs a relation (<, <=, >, >=, =)", offset)
    sides = []
    pos = offset
    for k, part in enumerate(parts):
        if k % 2 == 0:
            if not part.strip():
                raise ParseError("empty side in constraint", pos)
            sides.append(_affine(part, n, symbols, pos))
        pos += len(part)
    out = []
    for k in range(len(sides) - 1):
        (a1, c1), (a2, c2) = sides[k], sides[k + 1]
        rel = parts[2 * k + 1]
        diff = [x - y for x, y in zip(a1, a2)]   # lhs - rhs  rel  0
        const = c2 - c1
        if rel in ("<", "<="):
            out.append(Constraint.make(diff, const, rel == "<"))
        elif rel in (">", ">="):
            out.append(Constraint.make([-v for v in diff], -const, rel == ">"))
        else:
            out.append(Constraint.make(diff, const, False))
            out.append(Constraint.make([-v for v in diff], -const, False))
    for c in out:
        if not any(c.a):
            raise ParseError("constraint does not involve any coordinate", offset)
    return out


def parse_region(text: str, omega: Box, symbols: Mapping[str, E.Expr] | None = None) -> RegionSet:
    symbols = dict(symbols or {})
    stripped = text.strip()
    if stripped in ("empty", ""):
        return RegionSet.empty(omega)
    if stripped in ("all", "omega"):
        return RegionSet.full(omega)
    cells = []
    pos = 0
    for disj in text.split("|"):
        cons: list[Constraint] = []
        cpos = pos
        for conj in disj.split("&"):
            if conj.strip() in ("all", "omega"):
                cpos += len(conj) + 1
                continue
            cons.extend(_chain_constraints(conj, omega.n, symbols, cpos))
            cpos += len(conj) + 1
        cells.append(cons)
        pos += len(disj) + 1
    return RegionSet.from_cells(omega, cells)
