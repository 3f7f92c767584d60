"""Keyed record store for the literals kept out of the triple store.

Bibliographic and usage records live in a small SQLite file; only the
identifiers, times, and group/agent relationships are projected into the
semantic network.  Titles, author names, pages, volumes and issues never
become triples: queries that need them resolve back through the doc_id
bridge (see :func:`Sidecar.resolve`).

Ingestion reads UTF-8 TSV with one header line.  Rows that violate a key
constraint or carry an unparseable time are rejected individually and
reported with their line number; the rest of the batch still loads.

Everything minted by :meth:`Sidecar.map_to_graph` is a deterministic IRI
derived from record keys (and the provider IRI for name-scoped agents), so
re-running the mapping is idempotent and two runs over equal sidecars
produce identical graphs.
"""

from __future__ import annotations

import hashlib
import sqlite3
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Optional, Union
from urllib.parse import quote

from .errors import ScholarGraphError
from .ontology import (
    AFFILIATION,
    ARTICLE,
    CITATION,
    GROUP,
    HAS_ACCESS_TYPE,
    HAS_AFFILIATEE,
    HAS_AFFILIATOR,
    HAS_AUTHOR,
    HAS_DOCUMENT,
    HAS_GROUP,
    HAS_PROVIDER,
    HAS_PUBLISHER,
    HAS_SESSION,
    HAS_SINK,
    HAS_SOURCE,
    HAS_TIME,
    HAS_UNIT,
    HAS_USER,
    HAS_WEIGHT,
    HUMAN,
    JOURNAL,
    ORGANIZATION,
    PART_OF,
    PUBLISHES,
    SCHEMA,
    Schema,
    USES,
)
from .store import Store
from .terms import (
    Datatype,
    Iri,
    Literal,
    RDF_TYPE,
    TermError,
    Triple,
    datetime_literal,
    string_literal,
)

SIDECAR_VERSION = 1
DEFAULT_PROVIDER = Iri("urn:mesur:provider:default")

BIBLIO_COLUMNS = (
    "doc_id",
    "title",
    "authors",
    "collection",
    "publisher",
    "date",
    "start_page",
    "end_page",
    "volume",
    "issue",
    "doi",
)
USAGE_COLUMNS = ("event_id", "time", "agent", "session", "affiliation", "access_type", "doc_id")
CITATION_COLUMNS = ("citing_doc_id", "cited_doc_id")

_SCHEMA_SQL = """
CREATE TABLE biblio (
    doc_id TEXT PRIMARY KEY,
    title TEXT,
    authors TEXT,
    collection TEXT,
    publisher TEXT,
    date TEXT,
    start_page TEXT,
    end_page TEXT,
    volume TEXT,
    issue TEXT,
    doi TEXT UNIQUE
);
CREATE TABLE usage_events (
    event_id TEXT PRIMARY KEY,
    time TEXT NOT NULL,
    agent TEXT,
    session TEXT,
    affiliation TEXT,
    access_type TEXT,
    doc_id TEXT NOT NULL REFERENCES biblio(doc_id)
);
CREATE INDEX usage_events_doc ON usage_events(doc_id);
CREATE TABLE citation_pairs (
    citing_doc_id TEXT NOT NULL REFERENCES biblio(doc_id),
    cited_doc_id TEXT NOT NULL REFERENCES biblio(doc_id),
    PRIMARY KEY (citing_doc_id, cited_doc_id)
);
CREATE TABLE id_map (
    kind TEXT NOT NULL,
    key TEXT NOT NULL,
    iri TEXT NOT NULL,
    PRIMARY KEY (kind, key),
    UNIQUE (kind, iri)
);
"""


class SidecarError(ScholarGraphError):
    """Malformed input stream or incompatible sidecar file."""


class UnknownIdError(SidecarError):
    def __init__(self, key: str) -> None:
        super().__init__(f"unknown identifier: {key!r}")
        self.key = key


@dataclass
class IngestReport:
    loaded: int = 0
    rejected: int = 0
    problems: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, line: int, reason: str) -> None:
        self.rejected += 1
        self.problems.append((line, reason))


@dataclass
class MapReport:
    """Contexts newly created by one mapping run (0 on a re-run)."""

    publishes: int = 0
    uses: int = 0
    citations: int = 0
    affiliations: int = 0

    @property
    def total(self) -> int:
        return self.publishes + self.uses + self.citations + self.affiliations


@dataclass
class Resolution:
    doc_id: str
    iri: str
    record: dict[str, Optional[str]]


def _hash16(text: str) -> str:
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]


def _normalize_name(name: str) -> str:
    return " ".join(name.split()).casefold()


def _quote(value: str) -> str:
    return quote(value, safe="/.:_-+()")


def unit_iri(doc_id: str, doi: Optional[str]) -> Iri:
    if doi:
        return Iri("urn:doi:" + _quote(doi))
    return Iri("urn:mesur:doc:" + _quote(doc_id))


def _valid_time(value: str) -> bool:
    try:
        datetime_literal(value)
    except TermError:
        return False
    return True


def _read_tsv(
    lines: Union[IO[str], Iterable[str]],
    allowed: tuple[str, ...],
    required: tuple[str, ...],
) -> Iterator[tuple[int, Optional[dict[str, Optional[str]]], Optional[str]]]:
    """Yield (line number, row dict, problem).  Exactly one of row/problem
    is set per data line.  An entirely empty stream yields nothing."""
    iterator = iter(lines)
    header_line = next(iterator, None)
    if header_line is None:
        return
    names = [part.strip() for part in header_line.rstrip("\r\n").split("\t")]
    if len(set(names)) != len(names):
        raise SidecarError("duplicate column in header")
    unknown = [n for n in names if n not in allowed]
    if unknown:
        raise SidecarError(f"unknown column(s) in header: {', '.join(unknown)}")
    missing = [n for n in required if n not in names]
    if missing:
        raise SidecarError(f"missing required column(s): {', '.join(missing)}")
    for number, raw in enumerate(iterator, start=2):
        line = raw.rstrip("\r\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != len(names):
            yield number, None, f"expected {len(names)} fields, got {len(parts)}"
            continue
        row = {name: (value if value != "" else None) for name, value in zip(names, parts)}
        yield number, row, None


class Sidecar:
    """One SQLite file holding biblio, usage, citation and id-map tables."""

    def __init__(self, path: str = ":memory:") -> None:
        self.path = path
        self._db = sqlite3.connect(path)
        self._db.execute("PRAGMA foreign_keys = ON")
        version = self._db.execute("PRAGMA user_version").fetchone()[0]
        if version == 0:
            tables = self._db.execute(
                "SELECT count(*) FROM sqlite_master WHERE type = 'table'"
            ).fetchone()[0]
            if tables:
                raise SidecarError(f"{path}: not a sidecar file")
            self._db.executescript(_SCHEMA_SQL)
            self._db.execute(f"PRAGMA user_version = {SIDECAR_VERSION}")
            self._db.commit()
        elif version != SIDECAR_VERSION:
            raise SidecarError(
                f"{path}: sidecar format version {version} is not supported "
                f"(expected {SIDECAR_VERSION})"
            )

    def close(self) -> None:
        self._db.close()

    def __enter__(self) -> "Sidecar":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    # -- ingestion -------------------------------------------------------------

    def ingest_biblio(self, lines: Union[IO[str], Iterable[str]]) -> IngestReport:
        report = IngestReport()
        cursor = self._db.cursor()
        for number, row, problem in _read_tsv(lines, BIBLIO_COLUMNS, ("doc_id",)):
            if problem is not None:
                report.reject(number, problem)
                continue
            assert row is not None
            doc_id = row.get("doc_id")
            if not doc_id:
                report.reject(number, "missing doc_id")
                continue
            if cursor.execute("SELECT 1 FROM biblio WHERE doc_id = ?", (doc_id,)).fetchone():
                report.reject(number, f"duplicate doc_id {doc_id!r}")
                continue
            doi = row.get("doi")
            if doi and cursor.execute("SELECT 1 FROM biblio WHERE doi = ?", (doi,)).fetchone():
                report.reject(number, f"duplicate doi {doi!r}")
                continue
            date = row.get("date")
            if date and not _valid_time(date):
                report.reject(number, f"unparseable date {date!r}")
                continue
            cursor.execute(
                "INSERT INTO biblio (doc_id, title, authors, collection, publisher, date,"
                " start_page, end_page, volume, issue, doi)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                tuple(row.get(name) for name in BIBLIO_COLUMNS),
            )
            report.loaded += 1
        self._db.commit()
        return report

    def ingest_usage(self, lines: Union[IO[str], Iterable[str]]) -> IngestReport:
        report = IngestReport()
        cursor = self._db.cursor()
        for number, row, problem in _read_tsv(
            lines, USAGE_COLUMNS, ("event_id", "time", "doc_id")
        ):
            if problem is not None:
                report.reject(number, problem)
                continue
            assert row is not None
            event_id = row.get("event_id")
            if not event_id:
                report.reject(number, "missing event_id")
                continue
            time = row.get("time")
            if not time or not _valid_time(time):
                report.reject(number, f"unparseable time {time!r}")
                continue
            doc_id = row.get("doc_id")
            if not doc_id or not cursor.execute(
                "SELECT 1 FROM biblio WHERE doc_id = ?", (doc_id,)
            ).fetchone():
                report.reject(number, f"doc_id {doc_id!r} does not resolve")
                continue
            if cursor.execute(
                "SELECT 1 FROM usage_events WHERE event_id = ?", (event_id,)
            ).fetchone():
                report.reject(number, f"duplicate event_id {event_id!r}")
                continue
            cursor.execute(
                "INSERT INTO usage_events (event_id, time, agent, session, affiliation,"
                " access_type, doc_id) VALUES (?, ?, ?, ?, ?, ?, ?)",
                tuple(row.get(name) for name in USAGE_COLUMNS),
            )
            report.loaded += 1
        self._db.commit()
        return report

    def ingest_citations(self, lines: Union[IO[str], Iterable[str]]) -> IngestReport:
        report = IngestReport()
        cursor = self._db.cursor()
        for number, row, problem in _read_tsv(lines, CITATION_COLUMNS, CITATION_COLUMNS):
            if problem is not None:
                report.reject(number, problem)
                continue
            assert row is not None
            citing = row.get("citing_doc_id")
            cited = row.get("cited_doc_id")
            bad = None
            for label, value in (("citing_doc_id", citing), ("cited_doc_id", cited)):
                if not value or not cursor.execute(
                    "SELECT 1 FROM biblio WHERE doc_id = ?", (value,)
                ).fetchone():
                    bad = f"{label} {value!r} does not resolve"
                    break
            if bad:
                report.reject(number, bad)
                continue
            if cursor.execute(
                "SELECT 1 FROM citation_pairs WHERE citing_doc_id = ? AND cited_doc_id = ?",
                (citing, cited),
            ).fetchone():
                report.reject(number, f"duplicate citation pair {citing!r} -> {cited!r}")
                continue
            cursor.execute(
                "INSERT INTO citation_pairs (citing_doc_id, cited_doc_id) VALUES (?, ?)",
                (citing, cited),
            )
            report.loaded += 1
        self._db.commit()
        return report

    # -- inspection -------------------------------------------------------------

    def counts(self) -> dict[str, int]:
        out = {}
        for name, table in (
            ("biblio", "biblio"),
            ("usage", "usage_events"),
            ("citations", "citation_pairs"),
            ("id_map", "id_map"),
        ):
            out[name] = self._db.execute(f"SELECT count(*) FROM {table}").fetchone()[0]
        return out

    def doc_ids(self) -> list[str]:
        rows = self._db.execute("SELECT doc_id FROM biblio ORDER BY doc_id").fetchall()
        return [row[0] for row in rows]

    def _biblio_row(self, doc_id: str) -> Optional[dict[str, Optional[str]]]:
        columns = ", ".join(BIBLIO_COLUMNS)
        row = self._db.execute(
            f"SELECT {columns} FROM biblio WHERE doc_id = ?", (doc_id,)
        ).fetchone()
        if row is None:
            return None
        return dict(zip(BIBLIO_COLUMNS, row))

    # -- mapping into the triple store -------------------------------------------

    def _agent_iri(self, kind: str, name: str, provider: Iri) -> Iri:
        digest = _hash16(f"{kind}|{_normalize_name(name)}|{provider.value}")
        base = "urn:mesur:agent:" if kind == "human" else "urn:mesur:org:"
        return Iri(base + digest)

    def _group_iris(self, collection: str, year: str, provider: Iri) -> tuple[Iri, Iri]:
        norm = _normalize_name(collection)
        root = Iri("urn:mesur:group:" + _hash16(f"root|{norm}|{provider.value}"))
        edition = Iri("urn:mesur:group:ed:" + _hash16(f"{norm}|{year}|{provider.value}"))
        return root, edition

    def _remember(self, cursor: sqlite3.Cursor, kind: str, key: str, iri: Iri) -> None:
        cursor.execute(
            "INSERT INTO id_map (kind, key, iri) VALUES (?, ?, ?)"
            " ON CONFLICT (kind, key) DO UPDATE SET iri = excluded.iri",
            (kind, key, iri.value),
        )

    def map_to_graph(
        self,
        store: Store,
        provider: Union[Iri, str] = DEFAULT_PROVIDER,
        affiliations: bool = False,
    ) -> MapReport:
        """Project every record into the store as MESUR contexts.

        Only identifiers, group/agent links and times cross over; no title,
        author-name, or page literal ever does.  Counts report contexts
        whose type triple was newly inserted, so a second run reports 0.
        """
        provider = Iri(provider) if isinstance(provider, str) else provider
        report = MapReport()
        cursor = self._db.cursor()
        store.insert(Triple(provider, RDF_TYPE, ORGANIZATION))

        for row in cursor.execute(
            "SELECT doc_id, authors, collection, publisher, date, doi"
            " FROM biblio ORDER BY doc_id"
        ).fetchall():
            doc_id, authors, collection, publisher, date, doi = row
            unit = unit_iri(doc_id, doi)
            ctx = Iri("urn:mesur:ctx:pub:" + _hash16(f"{doc_id}|{provider.value}"))
            if store.insert(Triple(ctx, RDF_TYPE, PUBLISHES)):
                report.publishes += 1
            store.insert(Triple(ctx, HAS_UNIT, unit))
            store.insert(Triple(unit, RDF_TYPE, ARTICLE))
            store.insert(Triple(ctx, HAS_PROVIDER, provider))
            if date:
                store.insert(Triple(ctx, HAS_TIME, datetime_literal(date)))
            if collection:
                year = date.split("-")[0] if date else ""
                root, edition = self._group_iris(collection, year, provider)
                store.insert(Triple(root, RDF_TYPE, JOURNAL))
                store.insert(Triple(edition, RDF_TYPE, GROUP))
                store.insert(Triple(edition, PART_OF, root))
                store.insert(Triple(ctx, HAS_GROUP, edition))
            if publisher:
                org = self._agent_iri("org", publisher, provider)
                store.insert(Triple(org, RDF_TYPE, ORGANIZATION))
                store.insert(Triple(ctx, HAS_PUBLISHER, org))
            for name in (authors or "").split("|"):
                if not name.strip():
                    continue
                human = self._agent_iri("human", name, provider)
                store.insert(Triple(human, RDF_TYPE, HUMAN))
                store.insert(Triple(ctx, HAS_AUTHOR, human))
            self._remember(cursor, "doc", doc_id, unit)

        doc_iris: dict[str, Iri] = {
            key: Iri(value)
            for key, value in cursor.execute(
                "SELECT key, iri FROM id_map WHERE kind = 'doc'"
            ).fetchall()
        }

        for row in cursor.execute(
            "SELECT event_id, time, agent, session, affiliation, access_type, doc_id"
            " FROM usage_events ORDER BY event_id"
        ).fetchall():
            event_id, time, agent, session, affiliation, access_type, doc_id = row
            unit = doc_iris[doc_id]
            ctx = Iri("urn:mesur:ctx:use:" + _hash16(f"{event_id}|{provider.value}"))
            if store.insert(Triple(ctx, RDF_TYPE, USES)):
                report.uses += 1
            store.insert(Triple(ctx, HAS_DOCUMENT, unit))
            store.insert(Triple(ctx, HAS_TIME, datetime_literal(time)))
            store.insert(Triple(ctx, HAS_PROVIDER, provider))
            user: Optional[Iri] = None
            if agent:
                user = self._agent_iri("human", agent, provider)
                store.insert(Triple(user, RDF_TYPE, HUMAN))
                store.insert(Triple(ctx, HAS_USER, user))
            if session:
                store.insert(Triple(ctx, HAS_SESSION, string_literal(session)))
            if access_type:
                store.insert(Triple(ctx, HAS_ACCESS_TYPE, string_literal(access_type)))
            self._remember(cursor, "event", event_id, ctx)
            if affiliations and affiliation and user is not None:
                org = self._agent_iri("org", affiliation, provider)
                aff = Iri(
                    "urn:mesur:ctx:aff:"
                    + _hash16(f"{event_id}|{_normalize_name(affiliation)}|{provider.value}")
                )
                store.insert(Triple(org, RDF_TYPE, ORGANIZATION))
                if store.insert(Triple(aff, RDF_TYPE, AFFILIATION)):
                    report.affiliations += 1
                store.insert(Triple(aff, HAS_AFFILIATOR, org))
                store.insert(Triple(aff, HAS_AFFILIATEE, user))
                store.insert(Triple(aff, HAS_TIME, datetime_literal(time)))

        for citing, cited in cursor.execute(
            "SELECT citing_doc_id, cited_doc_id FROM citation_pairs"
            " ORDER BY citing_doc_id, cited_doc_id"
        ).fetchall():
            ctx = Iri(
                "urn:mesur:ctx:cite:" + _hash16(f"{citing}|{cited}|{provider.value}")
            )
            if store.insert(Triple(ctx, RDF_TYPE, CITATION)):
                report.citations += 1
            store.insert(Triple(ctx, HAS_SOURCE, doc_iris[citing]))
            store.insert(Triple(ctx, HAS_SINK, doc_iris[cited]))
            store.insert(Triple(ctx, HAS_WEIGHT, Literal("1.0", Datatype.DECIMAL)))

        self._db.commit()
        return report

    # -- resolution ---------------------------------------------------------------

    def resolve(self, key: str) -> Resolution:
        """Accepts a doc_id or a minted unit IRI; returns both plus the record."""
        row = self._db.execute(
            "SELECT key, iri FROM id_map WHERE kind = 'doc' AND key = ?", (key,)
        ).fetchone()
        if row is None:
            row = self._db.execute(
                "SELECT key, iri FROM id_map WHERE kind = 'doc' AND iri = ?", (key,)
            ).fetchone()
        if row is None:
            raise UnknownIdError(key)
        doc_id, iri = row
        record = self._biblio_row(doc_id)
        if record is None:
            raise UnknownIdError(key)
        return Resolution(doc_id=doc_id, iri=iri, record=record)

    def resolve_event(self, key: str) -> tuple[str, str]:
        """Accepts an event_id or a Uses-context IRI; returns (event_id, IRI)."""
        row = self._db.execute(
            "SELECT key, iri FROM id_map WHERE kind = 'event' AND (key = ? OR iri = ?)",
            (key, key),
        ).fetchone()
        if row is None:
            raise UnknownIdError(key)
        return (row[0], row[1])


def literal_audit(store: Store, schema: Schema = SCHEMA) -> list[Triple]:
    """Triples whose literal object is not licensed by the schema.

    The permitted set is exactly the literal-ranged properties (times,
    weights, session/access-type strings, metric values); anything else,
    for example a smuggled title or author name, is reported.
    """
    allowed = schema.literal_properties()
    offending = []
    for triple in store.triples():
        obj = triple.object
        if not isinstance(obj, Literal):
            continue
        expected = allowed.get(triple.predicate)
        if expected is None:
            offending.append(triple)
            continue
        if obj.datatype == expected:
            continue
        if expected == Datatype.DECIMAL and obj.datatype == Datatype.INTEGER:
            continue
        if expected == Datatype.DATETIME and obj.datatype == Datatype.INTEGER:
            continue
        offending.append(triple)
    return offending
