"""Three-valued (and oracle) verdicts shared by every checking operation."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

KINDS = (
    "Verified", "Refuted", "Unknown",
    "Equal", "NotEqual",
    "NoCounterexample", "Counterexample",
    "NotResidual", "ResidualWitness",
    "Confirmed",
)

# kinds that make a task fail unless it is marked as expecting a negative outcome
NEGATIVE = frozenset({"Refuted", "NotEqual", "Counterexample", "ResidualWitness"})


@dataclass(frozen=True)
class Verdict:
    kind: str
    depth: int | None = None
    witness: dict | None = None
    detail: str = ""
    payload: Any = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")

    def __bool__(self) -> bool:
        return self.kind in ("Verified", "Equal", "Confirmed", "NoCounterexample")

    @property
    def negative(self) -> bool:
        return self.kind in NEGATIVE

    def to_json(self) -> dict:
        out: dict[str, Any] = {"verdict": self.kind}
        if self.depth is not None:
            out["depth"] = self.depth
        if self.witness is not None:
            out["witness"] = jsonable(self.witness)
        if self.detail:
            out["detail"] = self.detail
        return out


def frac_text(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def jsonable(obj):
    """Convert fractions, tuples and region sets into plain JSON values."""
    if isinstance(obj, Fraction):
        return frac_text(obj)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "text"):
        return obj.text()
    return str(obj)
