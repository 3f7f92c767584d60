"""Block evaluation and script execution.

Join semantics: each block is a conjunctive join of its patterns, seeded
from the most selective pattern (fewest unbound slots, then smallest index
range) and extended index-nested-loop style.  A row binds every variable of
the block; the row set is the set of distinct full bindings.  Filters run at
the earliest join step where all their variables are bound.

The public ``evaluate_block`` deduplicates rows on the projected variables
(what a SELECT caller sees).  Aggregates and INSERT dispatch operate on the
full row set: ``COUNT(?v)`` is the number of distinct full rows of the block
projecting ``?v``, which is what makes a count of citation rows count
citations rather than cited documents.

INSERT dispatch: a template whose slot variables are projected by a block
executes once per row of that block; a template of constants, placeholders
and aggregates executes once per script.  Every placeholder label maps to
one fresh blank node per execution, shared across templates.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_EVEN
from typing import Optional, Sequence

from ..errors import ScholarGraphError
from ..ontology import SCHEMA, Schema
from ..store import Store, TriplePattern, Var
from ..terms import (
    Blank,
    Datatype,
    Iri,
    Literal,
    Term,
    Triple,
    datetime_sort_value,
)
from .ast import (
    Aggregate,
    AndFilter,
    Block,
    Comparison,
    CountOf,
    Filter,
    OrFilter,
    Placeholder,
    RatioOf,
    Script,
    Template,
    filter_variables,
)

QUANTUM = Decimal("0.000001")


class EvaluationError(ScholarGraphError):
    """A script failed during evaluation (filters, aggregates, templates)."""


@dataclass(frozen=True)
class ExecutionReport:
    """What one script execution did."""

    block_rows: tuple[int, ...]  # distinct full rows per block
    template_rows: tuple[int, ...]  # instantiations attempted per template
    inserted: int  # triples newly added
    new_triples: tuple[Triple, ...]
    created_blanks: dict[str, Blank]  # placeholder label -> fresh node
    bindings: tuple[tuple[dict[str, Term], ...], ...]  # per block, deduped on projection


_Slot = tuple[str, object]  # ("c", term_id) or ("v", name)


def _coerce_year(obj: Literal) -> Literal:
    """Integer literal under a datetime-ranged predicate becomes a year."""
    value = int(obj.lexical)
    if 0 < value <= 9999:
        return Literal(f"{value:04d}", Datatype.DATETIME)
    return obj


def _datetime_ranged(schema: Schema, predicate: Term) -> bool:
    if not isinstance(predicate, Iri) or not schema.is_property(predicate):
        return False
    return schema.property_def(predicate).range is Datatype.DATETIME


def _prepare_pattern(
    store: Store, schema: Schema, pattern: TriplePattern
) -> Optional[tuple[_Slot, _Slot, _Slot]]:
    """Slot specs with constants interned; None when nothing can match."""
    subject, predicate, obj = pattern.subject, pattern.predicate, pattern.object
    if isinstance(obj, Literal) and obj.datatype is Datatype.INTEGER:
        if _datetime_ranged(schema, predicate):
            obj = _coerce_year(obj)
    slots: list[_Slot] = []
    for index, slot in enumerate((subject, predicate, obj)):
        if isinstance(slot, Var):
            slots.append(("v", slot.name))
            continue
        if index == 0 and isinstance(slot, Literal):
            return None  # literals never occupy subject position
        term_id = store.lookup(slot)
        if term_id is None:
            return None
        slots.append(("c", term_id))
    return (slots[0], slots[1], slots[2])


def _pattern_vars(spec: tuple[_Slot, _Slot, _Slot]) -> frozenset[str]:
    return frozenset(name for kind, name in spec if kind == "v")  # type: ignore[misc]


def _extend(store: Store, rows: list[dict[str, int]], spec: tuple[_Slot, _Slot, _Slot]) -> list[dict[str, int]]:
    out: list[dict[str, int]] = []
    for row in rows:
        query: list[Optional[int]] = []
        for kind, value in spec:
            if kind == "c":
                query.append(value)  # type: ignore[arg-type]
            else:
                query.append(row.get(value))  # type: ignore[arg-type]
        for hit in store.match_ids(query[0], query[1], query[2]):
            fresh = dict(row)
            conflict = False
            for (kind, value), got in zip(spec, hit):
                if kind != "v":
                    continue
                prior = fresh.get(value)  # type: ignore[arg-type]
                if prior is None:
                    fresh[value] = got  # type: ignore[index]
                elif prior != got:
                    conflict = True
                    break
            if not conflict:
                out.append(fresh)
    return out


def _compare(left: Term, op: str, right: Term) -> bool:
    if isinstance(left, Literal) and isinstance(right, Literal):
        lt, rt = left.datatype, right.datatype
        a: object
        b: object
        if lt in (Datatype.INTEGER, Datatype.DECIMAL) and rt in (Datatype.INTEGER, Datatype.DECIMAL):
            a, b = Decimal(left.lexical), Decimal(right.lexical)
        elif lt is Datatype.STRING and rt is Datatype.STRING:
            a, b = left.lexical, right.lexical
        elif lt is Datatype.DATETIME and rt is Datatype.DATETIME:
            if left.precision == "year" or right.precision == "year":
                a, b = left.year(), right.year()
            else:
                a, b = datetime_sort_value(left), datetime_sort_value(right)
        elif {lt, rt} == {Datatype.DATETIME, Datatype.INTEGER}:
            a, b = left.year(), right.year()
        else:
            raise EvaluationError(
                f"cannot compare a {lt.name.lower()} literal with a {rt.name.lower()} literal"
            )
        if op == "=":
            return a == b
        if op == "<":
            return a < b  # type: ignore[operator]
        return a > b  # type: ignore[operator]
    if op == "=" and not isinstance(left, Literal) and not isinstance(right, Literal):
        return left == right
    raise EvaluationError(f"cannot compare {left!r} with {right!r} using {op!r}")


def _eval_filter(store: Store, expr: Filter, row: dict[str, int]) -> bool:
    if isinstance(expr, Comparison):
        left = store.decode(row[expr.left.name]) if isinstance(expr.left, Var) else expr.left
        right = store.decode(row[expr.right.name]) if isinstance(expr.right, Var) else expr.right
        return _compare(left, expr.op, right)
    if isinstance(expr, AndFilter):
        return all(_eval_filter(store, part, row) for part in expr.parts)
    return any(_eval_filter(store, part, row) for part in expr.parts)


def _solve_block(store: Store, block: Block, schema: Schema) -> list[dict[str, int]]:
    """Distinct full rows of the block, in deterministic join order."""
    specs: list[Optional[tuple[_Slot, _Slot, _Slot]]] = []
    for gp in block.patterns:
        specs.append(_prepare_pattern(store, schema, gp.pattern))
    if any(spec is None for spec in specs):
        return []
    pending: list[tuple[Filter, frozenset[str]]] = [
        (gp.guard, filter_variables(gp.guard)) for gp in block.patterns if gp.guard is not None
    ]
    remaining = list(range(len(specs)))
    bound: set[str] = set()
    rows: list[dict[str, int]] = [{}]

    def rank(index: int) -> tuple[int, int, int]:
        spec = specs[index]
        assert spec is not None
        unbound = sum(1 for kind, name in spec if kind == "v" and name not in bound)
        probe = tuple(
            value if kind == "c" else None  # bound variables vary per row
            for kind, value in spec
        )
        return (unbound, store.match_count(*probe), index)  # type: ignore[arg-type]

    while remaining:
        best = min(remaining, key=rank)
        remaining.remove(best)
        spec = specs[best]
        assert spec is not None
        rows = _extend(store, rows, spec)
        bound |= _pattern_vars(spec)
        still: list[tuple[Filter, frozenset[str]]] = []
        for guard, names in pending:
            if names <= bound:
                rows = [row for row in rows if _eval_filter(store, guard, row)]
            else:
                still.append((guard, names))
        pending = still
        if not rows:
            return []
    return rows


def _dedupe_on_projection(
    store: Store, block: Block, rows: Sequence[dict[str, int]]
) -> tuple[dict[str, Term], ...]:
    projected = [v.name for v in block.projected]
    seen: set[tuple[int, ...]] = set()
    out: list[dict[str, Term]] = []
    for row in rows:
        key = tuple(row[name] for name in projected)
        if key in seen:
            continue
        seen.add(key)
        out.append({name: store.decode(i) for name, i in row.items()})
    return tuple(out)


def evaluate_block(store: Store, block: Block, schema: Schema | None = None) -> tuple[dict[str, Term], ...]:
    """Rows of one block: full bindings, deduplicated on the projection.

    The result is a set (order is deterministic for a given store).  An
    empty result is an empty tuple, never an error.
    """
    schema = schema or SCHEMA
    rows = _solve_block(store, block, schema)
    return _dedupe_on_projection(store, block, rows)


def _projected_by(script: Script) -> dict[str, int]:
    out: dict[str, int] = {}
    for index, block in enumerate(script.blocks):
        for var in block.projected:
            out[var.name] = index
    return out


def _render_aggregate(agg: Aggregate) -> str:
    if isinstance(agg, CountOf):
        return f"COUNT(?{agg.var.name})"
    return f"({_render_aggregate(agg.numerator)} / {_render_aggregate(agg.denominator)})"


def _aggregate_exact(agg: Aggregate, counts: dict[str, int]) -> Decimal:
    if isinstance(agg, CountOf):
        return Decimal(counts[agg.var.name])
    numerator = _aggregate_exact(agg.numerator, counts)
    denominator = _aggregate_exact(agg.denominator, counts)
    if denominator == 0:
        raise EvaluationError(f"division by zero in {_render_aggregate(agg)}")
    return numerator / denominator


def _aggregate_literal(agg: Aggregate, counts: dict[str, int]) -> Literal:
    if isinstance(agg, CountOf):
        return Literal(str(counts[agg.var.name]), Datatype.INTEGER)
    value = _aggregate_exact(agg, counts).quantize(QUANTUM, rounding=ROUND_HALF_EVEN)
    return Literal(str(value), Datatype.DECIMAL)


def execute_script(store: Store, script: Script, schema: Schema | None = None) -> ExecutionReport:
    """Evaluate all blocks, then apply INSERT templates in order.

    Set semantics make re-runs of placeholder-free scripts no-ops; each run
    mints fresh blanks for placeholders.  Raises :class:`EvaluationError` on
    filter type clashes, division by zero, or templates that resolve to an
    invalid triple; nothing is half-applied before the failing template, in
    the sense that earlier templates' inserts remain (the report says what
    landed).
    """
    schema = schema or SCHEMA
    solved = [_solve_block(store, block, schema) for block in script.blocks]
    projected_by = _projected_by(script)
    counts = {name: len(solved[index]) for name, index in projected_by.items()}

    blanks: dict[str, Blank] = {}

    def blank_for(label: str) -> Blank:
        if label not in blanks:
            blanks[label] = store.fresh_blank()
        return blanks[label]

    def resolve(slot, row: Optional[dict[str, int]]) -> Term:
        if isinstance(slot, Var):
            assert row is not None
            return store.decode(row[slot.name])
        if isinstance(slot, Placeholder):
            return blank_for(slot.label)
        return slot

    new_triples: list[Triple] = []
    template_rows: list[int] = []
    inserted = 0
    for template in script.templates:
        aggregate = template.object if isinstance(template.object, (CountOf, RatioOf)) else None
        object_constant = _aggregate_literal(aggregate, counts) if aggregate is not None else None
        row_vars = template.row_variables()
        if row_vars:
            rows = solved[projected_by[row_vars[0].name]]
        else:
            rows = [None]  # type: ignore[list-item]
        template_rows.append(len(rows))
        for row in rows:
            subject = resolve(template.subject, row)
            predicate = resolve(template.predicate, row)
            if isinstance(subject, Literal):
                raise EvaluationError("template subject resolved to a literal")
            if not isinstance(predicate, Iri):
                raise EvaluationError(f"template predicate resolved to {predicate!r}, not an IRI")
            if object_constant is not None:
                obj = object_constant
            else:
                obj = resolve(template.object, row)
            if (
                isinstance(obj, Literal)
                and obj.datatype is Datatype.INTEGER
                and _datetime_ranged(schema, predicate)
            ):
                obj = _coerce_year(obj)
            triple = Triple(subject, predicate, obj)
            if store.insert(triple):
                inserted += 1
                new_triples.append(triple)

    bindings = tuple(
        _dedupe_on_projection(store, block, rows_)
        for block, rows_ in zip(script.blocks, solved)
    )
    return ExecutionReport(
        block_rows=tuple(len(r) for r in solved),
        template_rows=tuple(template_rows),
        inserted=inserted,
        new_triples=tuple(new_triples),
        created_blanks=blanks,
        bindings=bindings,
    )
