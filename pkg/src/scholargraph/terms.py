"""RDF term model: IRIs, typed literals, blank nodes, triples, namespaces.

Literals carry one of four datatype tags (string, integer, decimal,
datetime).  Datetime literals keep their precision in the lexical form:
``"2007"`` is a year, ``"2007-05-01"`` a date, ``"2007-05-01T10:30:00"`` a
timestamp.  Comparison and serialization code downstream rely on that shape,
so ``Literal`` validates it on construction; use the ``*_literal`` helpers
when building literals from raw application data.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass
from decimal import Decimal
from enum import IntEnum
from typing import Union

from .errors import ScholarGraphError

# Namespace bases.
MESUR = "http://www.mesur.org/schemas/2007-01/mesur#"
RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
OWL_NS = "http://www.w3.org/2002/07/owl#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"


class Datatype(IntEnum):
    """Datatype tag of a literal.  Order matters only for canonical sorting."""

    STRING = 0
    INTEGER = 1
    DECIMAL = 2
    DATETIME = 3


class TermError(ScholarGraphError):
    """A term or triple violated a structural invariant."""


_INTEGER_RE = re.compile(r"[+-]?[0-9]+\Z")
_DECIMAL_RE = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)\Z")
_YEAR_RE = re.compile(r"[0-9]{4}\Z")
_DATE_RE = re.compile(r"[0-9]{4}-[0-9]{2}-[0-9]{2}\Z")


def _valid_datetime_lexical(lex: str) -> bool:
    """True if ``lex`` is one of the three normalized datetime shapes."""
    if _YEAR_RE.match(lex):
        return True
    if _DATE_RE.match(lex):
        try:
            _dt.date.fromisoformat(lex)
        except ValueError:
            return False
        return True
    if len(lex) > 10 and lex[10] == "T":
        try:
            _dt.datetime.fromisoformat(lex)
        except ValueError:
            return False
        return True
    return False


@dataclass(frozen=True, slots=True)
class Iri:
    """An IRI reference.  Must be nonempty and contain no whitespace."""

    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise TermError("IRI must be nonempty")
        if any(c.isspace() for c in self.value):
            raise TermError(f"IRI contains whitespace: {self.value!r}")

    def __repr__(self) -> str:
        return f"<{self.value}>"


@dataclass(frozen=True, slots=True)
class Blank:
    """A blank node with a local label."""

    label: str

    def __post_init__(self) -> None:
        if not self.label:
            raise TermError("blank node label must be nonempty")
        if not re.match(r"[A-Za-z0-9_][A-Za-z0-9_.-]*\Z", self.label) or self.label.endswith("."):
            raise TermError(f"bad blank node label: {self.label!r}")

    def __repr__(self) -> str:
        return f"_:{self.label}"


@dataclass(frozen=True, slots=True)
class Literal:
    """A typed literal: lexical form plus datatype tag.

    Equality is lexical: ``Literal("2", INTEGER)`` and
    ``Literal("+2", INTEGER)`` are distinct terms.
    """

    lexical: str
    datatype: Datatype

    def __post_init__(self) -> None:
        dt = self.datatype
        if dt is Datatype.STRING:
            return
        if dt is Datatype.INTEGER:
            if not _INTEGER_RE.match(self.lexical):
                raise TermError(f"not an integer lexical form: {self.lexical!r}")
        elif dt is Datatype.DECIMAL:
            if not _DECIMAL_RE.match(self.lexical):
                raise TermError(f"not a decimal lexical form: {self.lexical!r}")
        elif dt is Datatype.DATETIME:
            if not _valid_datetime_lexical(self.lexical):
                raise TermError(
                    f"not a normalized ISO-8601 date/time: {self.lexical!r} "
                    "(expected YYYY, YYYY-MM-DD, or YYYY-MM-DDThh:mm:ss[...])"
                )
        else:  # pragma: no cover - enum is closed
            raise TermError(f"unknown datatype: {dt!r}")

    @property
    def precision(self) -> str:
        """For datetime literals: ``"year"``, ``"date"`` or ``"timestamp"``."""
        if self.datatype is not Datatype.DATETIME:
            raise TermError("precision is only defined for datetime literals")
        if len(self.lexical) == 4:
            return "year"
        if len(self.lexical) == 10:
            return "date"
        return "timestamp"

    def year(self) -> int:
        """Leading year of a datetime literal (also accepts integers)."""
        if self.datatype is Datatype.DATETIME:
            return int(self.lexical[:4])
        if self.datatype is Datatype.INTEGER:
            return int(self.lexical)
        raise TermError(f"no year in a {self.datatype.name.lower()} literal")

    def __repr__(self) -> str:
        if self.datatype is Datatype.STRING:
            return f'"{self.lexical}"'
        return f'"{self.lexical}"^^{self.datatype.name.lower()}'


Term = Union[Iri, Blank, Literal]


def string_literal(value: str) -> Literal:
    return Literal(value, Datatype.STRING)


def integer_literal(value: int | str) -> Literal:
    return Literal(str(value), Datatype.INTEGER)


def decimal_literal(value: Decimal | int | str) -> Literal:
    if not isinstance(value, Decimal):
        value = Decimal(str(value))
    return Literal(str(value), Datatype.DECIMAL)


def year_literal(year: int) -> Literal:
    if not 0 < year <= 9999:
        raise TermError(f"year out of range: {year}")
    return Literal(f"{year:04d}", Datatype.DATETIME)


def datetime_literal(lexical: str) -> Literal:
    """Normalize an ISO-8601-ish string into a datetime literal.

    Accepts a bare year, a date, or a timestamp with either 'T' or a single
    space between date and time ('Z' is folded to '+00:00').  The result is
    canonical: re-normalizing it is the identity.
    """
    lex = lexical.strip()
    if _YEAR_RE.match(lex):
        return Literal(lex, Datatype.DATETIME)
    if _DATE_RE.match(lex):
        try:
            _dt.date.fromisoformat(lex)
        except ValueError as exc:
            raise TermError(f"not an ISO-8601 date: {lexical!r}") from exc
        return Literal(lex, Datatype.DATETIME)
    if len(lex) > 10 and lex[10] in ("T", " "):
        candidate = lex[:10] + "T" + lex[11:].replace("Z", "+00:00")
        try:
            parsed = _dt.datetime.fromisoformat(candidate)
        except ValueError as exc:
            raise TermError(f"not an ISO-8601 date/time: {lexical!r}") from exc
        return Literal(parsed.isoformat(), Datatype.DATETIME)
    raise TermError(f"not an ISO-8601 date/time: {lexical!r}")


def datetime_sort_value(lit: Literal) -> tuple:
    """Chronological comparison key honoring the literal's precision.

    Year-precision values compare as bare years; finer values compare
    componentwise, so a date sorts before any timestamp within that date.
    """
    lex = lit.lexical
    if len(lex) == 4:
        return (int(lex),)
    if len(lex) == 10:
        d = _dt.date.fromisoformat(lex)
        return (d.year, d.month, d.day)
    t = _dt.datetime.fromisoformat(lex)
    return (t.year, t.month, t.day, t.hour, t.minute, t.second, t.microsecond)


@dataclass(frozen=True, slots=True)
class Triple:
    """One statement.  Subjects are IRIs or blanks, predicates are IRIs."""

    subject: Union[Iri, Blank]
    predicate: Iri
    object: Term

    def __post_init__(self) -> None:
        if isinstance(self.subject, Literal):
            raise TermError("literal in subject position")
        if not isinstance(self.subject, (Iri, Blank)):
            raise TermError(f"bad subject: {self.subject!r}")
        if not isinstance(self.predicate, Iri):
            raise TermError(f"predicate must be an IRI: {self.predicate!r}")
        if not isinstance(self.object, (Iri, Blank, Literal)):
            raise TermError(f"bad object: {self.object!r}")


def term_sort_key(term: Term) -> tuple:
    """Total deterministic order over terms: IRIs, then blanks, then literals."""
    if isinstance(term, Iri):
        return (0, term.value)
    if isinstance(term, Blank):
        return (1, term.label)
    return (2, int(term.datatype), term.lexical)


RDF_TYPE = Iri(RDF_NS + "type")

# Datatype IRIs understood by the N-Triples layer.
XSD_STRING = Iri(XSD_NS + "string")
XSD_INTEGER = Iri(XSD_NS + "integer")
XSD_DECIMAL = Iri(XSD_NS + "decimal")
XSD_DATETIME = Iri(XSD_NS + "dateTime")
XSD_DATE = Iri(XSD_NS + "date")
XSD_GYEAR = Iri(XSD_NS + "gYear")


class NamespaceError(ScholarGraphError):
    """Prefix registration or expansion failed."""


class UnknownPrefixError(NamespaceError):
    def __init__(self, prefix: str) -> None:
        super().__init__(f"unknown namespace prefix: {prefix!r}")
        self.prefix = prefix


class NamespaceTable:
    """Prefix-to-base mapping with expansion and longest-match compaction.

    Prefixes are unique; re-registering a prefix with a different base is an
    error, re-registering the same binding is a no-op.
    """

    _DEFAULTS = {
        "mesur": MESUR,
        "rdf": RDF_NS,
        "rdfs": RDFS_NS,
        "owl": OWL_NS,
        "xsd": XSD_NS,
    }

    def __init__(self, bindings: dict[str, str] | None = None, preload: bool = True) -> None:
        self._by_prefix: dict[str, str] = dict(self._DEFAULTS) if preload else {}
        for prefix, base in (bindings or {}).items():
            self.register(prefix, base)

    def register(self, prefix: str, base: str) -> None:
        if not prefix or not re.match(r"[A-Za-z][A-Za-z0-9_.-]*\Z", prefix):
            raise NamespaceError(f"bad namespace prefix: {prefix!r}")
        Iri(base)  # validates shape
        existing = self._by_prefix.get(prefix)
        if existing is not None and existing != base:
            raise NamespaceError(
                f"prefix {prefix!r} is already bound to {existing!r}"
            )
        self._by_prefix[prefix] = base

    def base(self, prefix: str) -> str:
        try:
            return self._by_prefix[prefix]
        except KeyError:
            raise UnknownPrefixError(prefix) from None

    def is_registered(self, prefix: str) -> bool:
        return prefix in self._by_prefix

    def expand(self, name: str) -> Iri:
        """Expand ``prefix:local`` to an IRI."""
        prefix, sep, local = name.partition(":")
        if not sep:
            raise NamespaceError(f"not a prefixed name: {name!r}")
        return Iri(self.base(prefix) + local)

    def compact(self, iri: Iri | str) -> str | None:
        """Compact an IRI to ``prefix:local`` using the longest matching base."""
        value = iri.value if isinstance(iri, Iri) else iri
        best: tuple[int, str] | None = None
        for prefix, base in self._by_prefix.items():
            if value.startswith(base) and (best is None or len(base) > best[0]):
                best = (len(base), prefix)
        if best is None:
            return None
        _, prefix = best
        return f"{prefix}:{value[len(self._by_prefix[prefix]):]}"

    def bindings(self) -> dict[str, str]:
        return dict(self._by_prefix)
