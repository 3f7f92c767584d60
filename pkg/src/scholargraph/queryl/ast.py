"""Syntax tree for the query dialect."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..store import TriplePattern, Var
from ..terms import Literal, Term


@dataclass(frozen=True)
class Comparison:
    left: Union[Var, Literal]
    op: str  # "=", "<" or ">"
    right: Union[Var, Literal]


@dataclass(frozen=True)
class AndFilter:
    parts: tuple["Filter", ...]


@dataclass(frozen=True)
class OrFilter:
    parts: tuple["Filter", ...]


Filter = Union[Comparison, AndFilter, OrFilter]


def filter_variables(expr: Filter) -> frozenset[str]:
    if isinstance(expr, Comparison):
        names = set()
        if isinstance(expr.left, Var):
            names.add(expr.left.name)
        if isinstance(expr.right, Var):
            names.add(expr.right.name)
        return frozenset(names)
    out: set[str] = set()
    for part in expr.parts:
        out |= filter_variables(part)
    return frozenset(out)


@dataclass(frozen=True)
class GuardedPattern:
    """A triple pattern with its optional attached filter."""

    pattern: TriplePattern
    guard: Filter | None = None


@dataclass(frozen=True)
class Block:
    """One SELECT/WHERE block.  Variables are scoped to the block."""

    projected: tuple[Var, ...]
    patterns: tuple[GuardedPattern, ...]

    def pattern_variables(self) -> frozenset[str]:
        names: set[str] = set()
        for gp in self.patterns:
            for v in gp.pattern.variables():
                names.add(v.name)
        return frozenset(names)


@dataclass(frozen=True)
class CountOf:
    var: Var


@dataclass(frozen=True)
class RatioOf:
    numerator: "Aggregate"
    denominator: "Aggregate"


Aggregate = Union[CountOf, RatioOf]


@dataclass(frozen=True)
class Placeholder:
    """A blank-node placeholder such as ``_123``; label excludes the ``_``."""

    label: str


TemplateSlot = Union[Term, Var, Placeholder]
TemplateObject = Union[Term, Var, Placeholder, CountOf, RatioOf]


@dataclass(frozen=True)
class Template:
    subject: TemplateSlot
    predicate: TemplateSlot
    object: TemplateObject

    def row_variables(self) -> tuple[Var, ...]:
        """Variables occupying slots directly (COUNT arguments excluded)."""
        out: list[Var] = []
        for slot in (self.subject, self.predicate, self.object):
            if isinstance(slot, Var) and slot not in out:
                out.append(slot)
        return tuple(out)

    def aggregates(self) -> tuple[Aggregate, ...]:
        if isinstance(self.object, (CountOf, RatioOf)):
            return (self.object,)
        return ()


def aggregate_count_vars(agg: Aggregate) -> tuple[Var, ...]:
    if isinstance(agg, CountOf):
        return (agg.var,)
    return aggregate_count_vars(agg.numerator) + aggregate_count_vars(agg.denominator)


@dataclass(frozen=True)
class Script:
    blocks: tuple[Block, ...]
    templates: tuple[Template, ...] = field(default_factory=tuple)
