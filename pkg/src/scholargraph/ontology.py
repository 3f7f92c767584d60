"""Vocabulary and schema for the scholarly semantic network.

The class taxonomy and property catalog are compiled in rather than parsed
from an ontology file: the schema is small, versioned with the code, and the
tests assert structural invariants (inverse symmetry, domain/range sanity)
directly against this catalog.  :func:`build_schema` is pure, so building it
twice yields identical content; the module-level :data:`SCHEMA` is the shared
instance.

Instance validation is advisory: it reports violations, it never mutates the
store.  Predicates outside the ``mesur`` namespace are ignored (stores may
carry foreign vocabulary); ``mesur``-namespace predicates that the catalog
does not know are reported, since they are almost always typos.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Union

from .errors import ScholarGraphError
from .terms import (
    Blank,
    Datatype,
    Iri,
    Literal,
    MESUR,
    NamespaceTable,
    OWL_NS,
    RDF_TYPE,
    Term,
)

if TYPE_CHECKING:  # pragma: no cover
    from .store import Store

OWL_THING = Iri(OWL_NS + "Thing")

# -- classes ----------------------------------------------------------------

AGENT = Iri(MESUR + "Agent")
HUMAN = Iri(MESUR + "Human")
ORGANIZATION = Iri(MESUR + "Organization")

DOCUMENT = Iri(MESUR + "Document")
GROUP = Iri(MESUR + "Group")
UNIT = Iri(MESUR + "Unit")
JOURNAL = Iri(MESUR + "Journal")
PROCEEDINGS = Iri(MESUR + "Proceedings")
EDITED_BOOK = Iri(MESUR + "EditedBook")
ARTICLE = Iri(MESUR + "Article")
PREPRINT_ARTICLE = Iri(MESUR + "PreprintArticle")
BOOK = Iri(MESUR + "Book")

CONTEXT = Iri(MESUR + "Context")
EVENT = Iri(MESUR + "Event")
STATE = Iri(MESUR + "State")
PUBLISHES = Iri(MESUR + "Publishes")
USES = Iri(MESUR + "Uses")
WEIGHTED_RELATIONSHIP = Iri(MESUR + "WeightedRelationship")
AFFILIATION = Iri(MESUR + "Affiliation")
METRIC = Iri(MESUR + "Metric")
CITATION = Iri(MESUR + "Citation")
COAUTHOR = Iri(MESUR + "Coauthor")
NUMERIC_METRIC = Iri(MESUR + "NumericMetric")
NOMINAL_METRIC = Iri(MESUR + "NominalMetric")
IMPACT_FACTOR = Iri(MESUR + "ImpactFactor")
USAGE_IMPACT_FACTOR = Iri(MESUR + "UsageImpactFactor")

# -- properties: context (asserted on context nodes) ------------------------

HAS_UNIT = Iri(MESUR + "hasUnit")
HAS_GROUP = Iri(MESUR + "hasGroup")
HAS_AUTHOR = Iri(MESUR + "hasAuthor")
HAS_PUBLISHER = Iri(MESUR + "hasPublisher")
HAS_PROVIDER = Iri(MESUR + "hasProvider")
HAS_TIME = Iri(MESUR + "hasTime")
HAS_DOCUMENT = Iri(MESUR + "hasDocument")
HAS_USER = Iri(MESUR + "hasUser")
HAS_SESSION = Iri(MESUR + "hasSession")
HAS_ACCESS_TYPE = Iri(MESUR + "hasAccessType")
HAS_SOURCE = Iri(MESUR + "hasSource")
HAS_SINK = Iri(MESUR + "hasSink")
HAS_WEIGHT = Iri(MESUR + "hasWeight")
HAS_SOURCE_START_TIME = Iri(MESUR + "hasSourceStartTime")
HAS_SOURCE_END_TIME = Iri(MESUR + "hasSourceEndTime")
HAS_SINK_START_TIME = Iri(MESUR + "hasSinkStartTime")
HAS_SINK_END_TIME = Iri(MESUR + "hasSinkEndTime")
HAS_AFFILIATOR = Iri(MESUR + "hasAffiliator")
HAS_AFFILIATEE = Iri(MESUR + "hasAffiliatee")
HAS_OBJECT = Iri(MESUR + "hasObject")
HAS_START_TIME = Iri(MESUR + "hasStartTime")
HAS_END_TIME = Iri(MESUR + "hasEndTime")
HAS_NUMERIC_VALUE = Iri(MESUR + "hasNumericValue")

# -- properties: inferred (materialized between entities) -------------------

AUTHORED = Iri(MESUR + "authored")
AUTHORED_BY = Iri(MESUR + "authoredBy")
PUBLISHED = Iri(MESUR + "published")
PUBLISHED_BY = Iri(MESUR + "publishedBy")
USED = Iri(MESUR + "used")
USED_BY = Iri(MESUR + "usedBy")
CONTAINS = Iri(MESUR + "contains")
CONTAINED_IN = Iri(MESUR + "containedIn")
HAS_AFFILIATE = Iri(MESUR + "hasAffiliate")
HAS_AFFILIATION_PROP = Iri(MESUR + "hasAffiliation")

# -- properties: structural --------------------------------------------------

PART_OF = Iri(MESUR + "partOf")


class PropertyKind(Enum):
    CONTEXT = "context"
    INFERRED = "inferred"
    STRUCTURAL = "structural"


Range = Union[tuple[Iri, ...], Datatype]


@dataclass(frozen=True)
class ClassDef:
    iri: Iri
    parent: Iri  # OWL_THING for taxonomy roots


@dataclass(frozen=True)
class PropertyDef:
    iri: Iri
    kind: PropertyKind
    domain: Iri
    range: Range
    inverse: Iri | None = None


class UnknownClassError(ScholarGraphError):
    def __init__(self, iri: Iri) -> None:
        super().__init__(f"unknown class: <{iri.value}>")
        self.iri = iri


class UnknownNodeError(ScholarGraphError):
    def __init__(self, node: Term) -> None:
        super().__init__(f"node not present in store: {node!r}")
        self.node = node


_CLASS_PARENTS: tuple[tuple[Iri, Iri], ...] = (
    (AGENT, OWL_THING),
    (HUMAN, AGENT),
    (ORGANIZATION, AGENT),
    (DOCUMENT, OWL_THING),
    (GROUP, DOCUMENT),
    (UNIT, DOCUMENT),
    (JOURNAL, GROUP),
    (PROCEEDINGS, GROUP),
    (EDITED_BOOK, GROUP),
    (ARTICLE, UNIT),
    (PREPRINT_ARTICLE, UNIT),
    (BOOK, UNIT),
    (CONTEXT, OWL_THING),
    (EVENT, CONTEXT),
    (STATE, CONTEXT),
    (PUBLISHES, EVENT),
    (USES, EVENT),
    (WEIGHTED_RELATIONSHIP, STATE),
    (AFFILIATION, STATE),
    (METRIC, STATE),
    (CITATION, WEIGHTED_RELATIONSHIP),
    (COAUTHOR, WEIGHTED_RELATIONSHIP),
    (NUMERIC_METRIC, METRIC),
    (NOMINAL_METRIC, METRIC),
    (IMPACT_FACTOR, NUMERIC_METRIC),
    (USAGE_IMPACT_FACTOR, NUMERIC_METRIC),
)

_PROPERTIES: tuple[PropertyDef, ...] = (
    # Context properties.
    PropertyDef(HAS_UNIT, PropertyKind.CONTEXT, PUBLISHES, (UNIT,)),
    PropertyDef(HAS_GROUP, PropertyKind.CONTEXT, PUBLISHES, (GROUP,)),
    PropertyDef(HAS_AUTHOR, PropertyKind.CONTEXT, PUBLISHES, (AGENT,)),
    PropertyDef(HAS_PUBLISHER, PropertyKind.CONTEXT, PUBLISHES, (AGENT,)),
    PropertyDef(HAS_PROVIDER, PropertyKind.CONTEXT, EVENT, (ORGANIZATION,)),
    PropertyDef(HAS_TIME, PropertyKind.CONTEXT, EVENT, Datatype.DATETIME),
    PropertyDef(HAS_DOCUMENT, PropertyKind.CONTEXT, USES, (DOCUMENT,)),
    PropertyDef(HAS_USER, PropertyKind.CONTEXT, USES, (AGENT,)),
    PropertyDef(HAS_SESSION, PropertyKind.CONTEXT, USES, Datatype.STRING),
    PropertyDef(HAS_ACCESS_TYPE, PropertyKind.CONTEXT, USES, Datatype.STRING),
    PropertyDef(HAS_SOURCE, PropertyKind.CONTEXT, WEIGHTED_RELATIONSHIP, (AGENT, DOCUMENT)),
    PropertyDef(HAS_SINK, PropertyKind.CONTEXT, WEIGHTED_RELATIONSHIP, (AGENT, DOCUMENT)),
    PropertyDef(HAS_WEIGHT, PropertyKind.CONTEXT, WEIGHTED_RELATIONSHIP, Datatype.DECIMAL),
    PropertyDef(HAS_SOURCE_START_TIME, PropertyKind.CONTEXT, CITATION, Datatype.DATETIME),
    PropertyDef(HAS_SOURCE_END_TIME, PropertyKind.CONTEXT, CITATION, Datatype.DATETIME),
    PropertyDef(HAS_SINK_START_TIME, PropertyKind.CONTEXT, CITATION, Datatype.DATETIME),
    PropertyDef(HAS_SINK_END_TIME, PropertyKind.CONTEXT, CITATION, Datatype.DATETIME),
    PropertyDef(HAS_AFFILIATOR, PropertyKind.CONTEXT, AFFILIATION, (AGENT,)),
    PropertyDef(HAS_AFFILIATEE, PropertyKind.CONTEXT, AFFILIATION, (AGENT,)),
    PropertyDef(HAS_OBJECT, PropertyKind.CONTEXT, METRIC, (AGENT, DOCUMENT)),
    PropertyDef(HAS_START_TIME, PropertyKind.CONTEXT, STATE, Datatype.DATETIME),
    PropertyDef(HAS_END_TIME, PropertyKind.CONTEXT, STATE, Datatype.DATETIME),
    PropertyDef(HAS_NUMERIC_VALUE, PropertyKind.CONTEXT, NUMERIC_METRIC, Datatype.DECIMAL),
    # Inferred properties, in inverse pairs.
    PropertyDef(AUTHORED, PropertyKind.INFERRED, AGENT, (DOCUMENT,), AUTHORED_BY),
    PropertyDef(AUTHORED_BY, PropertyKind.INFERRED, DOCUMENT, (AGENT,), AUTHORED),
    PropertyDef(PUBLISHED, PropertyKind.INFERRED, AGENT, (DOCUMENT,), PUBLISHED_BY),
    PropertyDef(PUBLISHED_BY, PropertyKind.INFERRED, DOCUMENT, (AGENT,), PUBLISHED),
    PropertyDef(USED, PropertyKind.INFERRED, AGENT, (DOCUMENT,), USED_BY),
    PropertyDef(USED_BY, PropertyKind.INFERRED, DOCUMENT, (AGENT,), USED),
    PropertyDef(CONTAINS, PropertyKind.INFERRED, GROUP, (UNIT,), CONTAINED_IN),
    PropertyDef(CONTAINED_IN, PropertyKind.INFERRED, UNIT, (GROUP,), CONTAINS),
    PropertyDef(HAS_AFFILIATE, PropertyKind.INFERRED, AGENT, (AGENT,), HAS_AFFILIATION_PROP),
    PropertyDef(HAS_AFFILIATION_PROP, PropertyKind.INFERRED, AGENT, (AGENT,), HAS_AFFILIATE),
    # Structural.
    PropertyDef(PART_OF, PropertyKind.STRUCTURAL, GROUP, (GROUP,)),
)

# Minimum property requirements for context nodes, by class.
REQUIRED_PROPERTIES: dict[Iri, tuple[Iri, ...]] = {
    PUBLISHES: (HAS_UNIT, HAS_PROVIDER, HAS_TIME),
    USES: (HAS_DOCUMENT, HAS_USER, HAS_TIME),
    CITATION: (HAS_SOURCE, HAS_SINK),
    AFFILIATION: (HAS_AFFILIATOR, HAS_AFFILIATEE),
}

# Sibling classes an individual should not mix (reported as warnings).
DISJOINT_SETS: tuple[tuple[Iri, ...], ...] = (
    (AGENT, DOCUMENT, CONTEXT),
    (HUMAN, ORGANIZATION),
    (GROUP, UNIT),
)

# A Publishes whose unit is self-contained (preprint, book) takes no group.
GROUPLESS_UNIT_CLASSES: tuple[Iri, ...] = (PREPRINT_ARTICLE, BOOK)


class Schema:
    """Immutable class taxonomy plus property catalog with lookups."""

    def __init__(
        self,
        classes: Iterable[ClassDef],
        properties: Iterable[PropertyDef],
    ) -> None:
        self._classes: dict[Iri, ClassDef] = {}
        for cdef in classes:
            if cdef.iri in self._classes:
                raise ScholarGraphError(f"duplicate class: {cdef.iri!r}")
            self._classes[cdef.iri] = cdef
        self._properties: dict[Iri, PropertyDef] = {}
        for pdef in properties:
            if pdef.iri in self._properties:
                raise ScholarGraphError(f"duplicate property: {pdef.iri!r}")
            self._properties[pdef.iri] = pdef
        for cdef in self._classes.values():
            if cdef.parent != OWL_THING and cdef.parent not in self._classes:
                raise ScholarGraphError(f"unknown parent class: {cdef.parent!r}")
        for pdef in self._properties.values():
            if pdef.domain not in self._classes:
                raise ScholarGraphError(f"unknown domain: {pdef.domain!r}")
            if isinstance(pdef.range, tuple):
                for r in pdef.range:
                    if r not in self._classes:
                        raise ScholarGraphError(f"unknown range class: {r!r}")
            if pdef.inverse is not None and pdef.inverse not in self._properties:
                raise ScholarGraphError(f"unknown inverse: {pdef.inverse!r}")

    def is_class(self, iri: Iri) -> bool:
        return iri in self._classes

    def is_property(self, iri: Iri) -> bool:
        return iri in self._properties

    def class_def(self, iri: Iri) -> ClassDef:
        try:
            return self._classes[iri]
        except KeyError:
            raise UnknownClassError(iri) from None

    def property_def(self, iri: Iri) -> PropertyDef:
        try:
            return self._properties[iri]
        except KeyError:
            raise ScholarGraphError(f"unknown property: <{iri.value}>") from None

    def classes(self) -> tuple[ClassDef, ...]:
        return tuple(self._classes.values())

    def properties(self) -> tuple[PropertyDef, ...]:
        return tuple(self._properties.values())

    def superclasses(self, iri: Iri) -> tuple[Iri, ...]:
        """The class itself, its ancestors in order, and owl:Thing last."""
        chain = [iri]
        current = self.class_def(iri)
        while current.parent != OWL_THING:
            chain.append(current.parent)
            current = self.class_def(current.parent)
        chain.append(OWL_THING)
        return tuple(chain)

    def is_subclass(self, sub: Iri, sup: Iri) -> bool:
        """Reflexive subclass test.  owl:Thing is everyone's superclass."""
        if sub == OWL_THING:
            if sup != OWL_THING:
                self.class_def(sup)  # raises on unknown classes
            return sup == OWL_THING
        if sup == OWL_THING:
            self.class_def(sub)
            return True
        return sup in self.superclasses(sub)

    def literal_properties(self) -> dict[Iri, Datatype]:
        """Predicates allowed to carry a literal object, with its datatype."""
        return {
            p.iri: p.range for p in self._properties.values() if isinstance(p.range, Datatype)
        }


def build_schema() -> Schema:
    """Construct the compiled-in schema.  Pure: repeated builds are equal."""
    return Schema(
        classes=[ClassDef(iri, parent) for iri, parent in _CLASS_PARENTS],
        properties=_PROPERTIES,
    )


SCHEMA = build_schema()


def export_catalog(schema: Schema | None = None, namespaces: NamespaceTable | None = None) -> str:
    """Render the schema as a deterministic, line-oriented catalog.

    One line per fact.  Grammar of each line:

    - ``class <curie> subClassOf <curie>``
    - ``property <curie> kind=<k> domain=<curie> range=<spec> [inverse=<curie>]``
    - ``requires <class-curie> <prop-curie>...``
    - ``disjoint <curie>...``
    - ``restriction Publishes-without-group-for <curie>...``
    """
    schema = schema or SCHEMA
    nt = namespaces or NamespaceTable()

    def c(iri: Iri) -> str:
        return nt.compact(iri) or f"<{iri.value}>"

    lines: list[str] = []
    for cdef in sorted(schema.classes(), key=lambda d: d.iri.value):
        parent = "owl:Thing" if cdef.parent == OWL_THING else c(cdef.parent)
        lines.append(f"class {c(cdef.iri)} subClassOf {parent}")
    for pdef in sorted(schema.properties(), key=lambda d: d.iri.value):
        if isinstance(pdef.range, Datatype):
            rng = pdef.range.name.lower()
        else:
            rng = "|".join(c(r) for r in pdef.range)
        line = (
            f"property {c(pdef.iri)} kind={pdef.kind.value} "
            f"domain={c(pdef.domain)} range={rng}"
        )
        if pdef.inverse is not None:
            line += f" inverse={c(pdef.inverse)}"
        lines.append(line)
    for cls in sorted(REQUIRED_PROPERTIES, key=lambda i: i.value):
        props = " ".join(c(p) for p in REQUIRED_PROPERTIES[cls])
        lines.append(f"requires {c(cls)} {props}")
    for group in DISJOINT_SETS:
        lines.append("disjoint " + " ".join(c(i) for i in group))
    lines.append(
        "restriction Publishes-without-group-for "
        + " ".join(c(i) for i in GROUPLESS_UNIT_CLASSES)
    )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Violation:
    node: Term
    kind: str  # unknown-class | unknown-property | domain | range | missing-required | group-restriction | disjoint
    severity: str  # "error" or "warning"
    message: str


def declared_types(store: "Store", node: Term) -> tuple[Iri, ...]:
    """rdf:type objects of ``node`` that are IRIs, in deterministic order."""
    out = []
    for triple in store.match_terms(node, RDF_TYPE, None):
        if isinstance(triple.object, Iri):
            out.append(triple.object)
    return tuple(out)


def type_closure(store: "Store", node: Term, schema: Schema | None = None) -> set[Iri]:
    """Declared classes of ``node`` plus all their schema ancestors."""
    schema = schema or SCHEMA
    closure: set[Iri] = set()
    for cls in declared_types(store, node):
        if schema.is_class(cls):
            closure.update(schema.superclasses(cls))
        else:
            closure.add(cls)
    closure.discard(OWL_THING)
    return closure


def _range_accepts_literal(rng: Datatype, lit: Literal) -> bool:
    if rng is lit.datatype:
        return True
    # A decimal-ranged property tolerates integer lexical forms.
    return rng is Datatype.DECIMAL and lit.datatype is Datatype.INTEGER


def validate_instance(store: "Store", node: Term, schema: Schema | None = None) -> list[Violation]:
    """Check one node against the schema; returns violations, worst first.

    The node must appear in at least one triple.  Checks: declared classes
    exist, property domains and ranges hold, required context properties are
    present, self-contained units carry no group, disjoint siblings are not
    mixed (warning).
    """
    schema = schema or SCHEMA
    if not store.appears(node):
        raise UnknownNodeError(node)

    violations: list[Violation] = []
    closure = type_closure(store, node, schema)

    for cls in declared_types(store, node):
        if not schema.is_class(cls):
            violations.append(
                Violation(node, "unknown-class", "error", f"declared type <{cls.value}> is not a schema class")
            )

    known_closure = {c for c in closure if schema.is_class(c)}

    for group in DISJOINT_SETS:
        hit = [c for c in group if c in known_closure]
        if len(hit) > 1:
            names = ", ".join(f"<{c.value}>" for c in hit)
            violations.append(
                Violation(node, "disjoint", "warning", f"disjoint classes on one node: {names}")
            )

    seen_predicates: set[Iri] = set()
    for triple in store.match_terms(node, None, None):
        pred = triple.predicate
        if pred == RDF_TYPE:
            continue
        seen_predicates.add(pred)
        if not schema.is_property(pred):
            if pred.value.startswith(MESUR):
                violations.append(
                    Violation(node, "unknown-property", "error", f"<{pred.value}> is not in the property catalog")
                )
            continue
        pdef = schema.property_def(pred)
        if pdef.domain not in known_closure:
            violations.append(
                Violation(
                    node,
                    "domain",
                    "error",
                    f"<{pred.value}> requires the subject to be a <{pdef.domain.value}>",
                )
            )
        obj = triple.object
        if isinstance(pdef.range, Datatype):
            if not isinstance(obj, Literal) or not _range_accepts_literal(pdef.range, obj):
                violations.append(
                    Violation(
                        node,
                        "range",
                        "error",
                        f"<{pred.value}> expects a {pdef.range.name.lower()} literal, got {obj!r}",
                    )
                )
        else:
            if isinstance(obj, Literal):
                violations.append(
                    Violation(node, "range", "error", f"<{pred.value}> expects a resource, got a literal")
                )
            else:
                obj_closure = type_closure(store, obj, schema)
                if not any(r in obj_closure for r in pdef.range):
                    allowed = " or ".join(f"<{r.value}>" for r in pdef.range)
                    violations.append(
                        Violation(node, "range", "error", f"object of <{pred.value}> must be typed {allowed}")
                    )

    for cls, required in REQUIRED_PROPERTIES.items():
        if cls in known_closure:
            for prop in required:
                if prop not in seen_predicates:
                    violations.append(
                        Violation(node, "missing-required", "error", f"<{cls.value}> node lacks <{prop.value}>")
                    )

    if PUBLISHES in known_closure:
        groupless = False
        for triple in store.match_terms(node, HAS_UNIT, None):
            unit_types = type_closure(store, triple.object, schema)
            if any(c in unit_types for c in GROUPLESS_UNIT_CLASSES):
                groupless = True
                break
        if groupless and next(iter(store.match_terms(node, HAS_GROUP, None)), None) is not None:
            violations.append(
                Violation(
                    node,
                    "group-restriction",
                    "error",
                    "Publishes of a self-contained unit (preprint, book) must not carry hasGroup",
                )
            )

    order = {"error": 0, "warning": 1}
    violations.sort(key=lambda v: (order[v.severity], v.kind, v.message))
    return violations


def validate_all(store: "Store", schema: Schema | None = None) -> list[Violation]:
    """Validate every subject that carries an rdf:type declaration."""
    schema = schema or SCHEMA
    out: list[Violation] = []
    seen: set[Term] = set()
    for triple in store.match_terms(None, RDF_TYPE, None):
        node = triple.subject
        if node in seen:
            continue
        seen.add(node)
        out.extend(validate_instance(store, node, schema))
    return out
