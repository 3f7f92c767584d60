"""Operator command line for the store, sidecar, rules and metrics.

Configuration precedence, highest first: command-line flags, then the
SCHOLARGRAPH_STORE / SCHOLARGRAPH_SIDECAR environment variables, then an
optional JSON config file (--config), then built-in defaults.

Mutating subcommands take an advisory lock (`<store>.lock`) so two
processes cannot write the same store files; the materialization ledger is
kept next to the snapshot as `<store>.ledger` and loaded/saved with it.

Exit codes: 0 success, 1 domain or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from decimal import Decimal
from typing import Iterator, Optional, Sequence

from .errors import ScholarGraphError
from .inference import InferenceEngine, RULE_SCRIPTS
from .metrics import impact_factor, usage_impact_factor
from .ntriples import serialize_term, serialize_triple, write_ntriples
from .ontology import SCHEMA, export_catalog, validate_all
from .queryl import execute_script, parse_script
from .sidecar import DEFAULT_PROVIDER, Sidecar, literal_audit
from .store import Store
from .terms import Iri, NamespaceTable, RDF_TYPE, term_sort_key

log = logging.getLogger("scholargraph")

DEFAULT_STORE = "scholargraph.store"
DEFAULT_SIDECAR = "scholargraph.sidecar"


class Config:
    __slots__ = ("store", "sidecar", "provider", "namespaces", "precision")

    def __init__(
        self,
        store: str,
        sidecar: str,
        provider: str,
        namespaces: dict[str, str],
        precision: int,
    ) -> None:
        self.store = store
        self.sidecar = sidecar
        self.provider = provider
        self.namespaces = namespaces
        self.precision = precision

    def namespace_table(self) -> NamespaceTable:
        table = NamespaceTable()
        for prefix, iri in self.namespaces.items():
            table.register(prefix, iri)
        return table


def _load_config(args: argparse.Namespace) -> Config:
    file_cfg: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fp:
            file_cfg = json.load(fp)
        if not isinstance(file_cfg, dict):
            raise ScholarGraphError(f"{args.config}: config must be a JSON object")
    store = (
        args.store
        or os.environ.get("SCHOLARGRAPH_STORE")
        or file_cfg.get("store")
        or DEFAULT_STORE
    )
    sidecar = (
        args.sidecar
        or os.environ.get("SCHOLARGRAPH_SIDECAR")
        or file_cfg.get("sidecar")
        or DEFAULT_SIDECAR
    )
    provider = args.provider or file_cfg.get("provider") or DEFAULT_PROVIDER.value
    if "://" not in provider and ":" not in provider:
        raise ScholarGraphError(f"provider IRI must be absolute: {provider!r}")
    namespaces = dict(file_cfg.get("namespaces") or {})
    for pair in args.namespace or []:
        prefix, _, iri = pair.partition("=")
        if not prefix or not iri:
            raise ScholarGraphError(f"--namespace needs prefix=iri, got {pair!r}")
        namespaces[prefix] = iri
    precision = int(file_cfg.get("precision", 6))
    if not 0 < precision <= 28:
        raise ScholarGraphError(f"precision out of range: {precision}")
    return Config(store, sidecar, provider, namespaces, precision)


@contextmanager
def _writer_lock(store_path: str) -> Iterator[None]:
    lock_path = store_path + ".lock"
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ScholarGraphError(
            f"{lock_path}: another process holds the store lock"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode("ascii"))
        os.close(fd)
        yield
    finally:
        os.unlink(lock_path)


def _ledger_path(cfg: Config) -> str:
    return cfg.store + ".ledger"


def _open_store(cfg: Config) -> Store:
    if os.path.exists(cfg.store):
        log.info("loading store %s", cfg.store)
        return Store.load(cfg.store)
    log.info("starting with an empty store (no %s yet)", cfg.store)
    return Store()


def _open_engine(cfg: Config, store: Store) -> InferenceEngine:
    engine = InferenceEngine(store, namespaces=cfg.namespace_table())
    path = _ledger_path(cfg)
    if os.path.exists(path):
        engine.load_ledger(path)
    return engine


def _save_state(cfg: Config, store: Store, engine: Optional[InferenceEngine] = None) -> None:
    store.save(cfg.store)
    if engine is not None:
        engine.save_ledger(_ledger_path(cfg))


def _emit(args: argparse.Namespace, human: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    if args.format == "tsv":
        for row in rows:
            sys.stdout.write("\t".join(row) + "\n")
    else:
        for line in human:
            sys.stdout.write(line + "\n")


def _report_problems(problems: Sequence[tuple[int, str]]) -> None:
    for line, reason in problems:
        sys.stderr.write(f"line {line}: rejected: {reason}\n")


# -- subcommand handlers --------------------------------------------------------


def _ingest(args: argparse.Namespace, cfg: Config, table: str) -> int:
    with Sidecar(cfg.sidecar) as sidecar:
        method = {
            "biblio": sidecar.ingest_biblio,
            "usage": sidecar.ingest_usage,
            "citations": sidecar.ingest_citations,
        }[table]
        if args.input == "-":
            report = method(sys.stdin)
        else:
            with open(args.input, "r", encoding="utf-8") as fp:
                report = method(fp)
    _report_problems(report.problems)
    _emit(
        args,
        [f"loaded {report.loaded} record(s), rejected {report.rejected}"],
        [[str(report.loaded), str(report.rejected)]],
    )
    return 0


def cmd_ingest_biblio(args: argparse.Namespace, cfg: Config) -> int:
    return _ingest(args, cfg, "biblio")


def cmd_ingest_usage(args: argparse.Namespace, cfg: Config) -> int:
    return _ingest(args, cfg, "usage")


def cmd_ingest_citations(args: argparse.Namespace, cfg: Config) -> int:
    return _ingest(args, cfg, "citations")


def cmd_map(args: argparse.Namespace, cfg: Config) -> int:
    with _writer_lock(cfg.store):
        store = _open_store(cfg)
        with Sidecar(cfg.sidecar) as sidecar:
            report = sidecar.map_to_graph(
                store, provider=cfg.provider, affiliations=args.affiliations
            )
        _save_state(cfg, store)
    _emit(
        args,
        [
            f"publishes contexts created: {report.publishes}",
            f"uses contexts created: {report.uses}",
            f"citation contexts created: {report.citations}",
            f"affiliation contexts created: {report.affiliations}",
            f"store now holds {len(store)} triple(s)",
        ],
        [
            ["publishes", str(report.publishes)],
            ["uses", str(report.uses)],
            ["citations", str(report.citations)],
            ["affiliations", str(report.affiliations)],
        ],
    )
    return 0


def cmd_validate(args: argparse.Namespace, cfg: Config) -> int:
    store = _open_store(cfg)
    violations = validate_all(store)
    audit = literal_audit(store)
    human = []
    rows = []
    for v in violations:
        human.append(f"{v.severity}: {serialize_term(v.node)}: {v.kind}: {v.message}")
        rows.append([v.severity, serialize_term(v.node), v.kind, v.message])
    for triple in audit:
        message = f"literal not licensed by the vocabulary: {serialize_triple(triple)}"
        human.append(f"error: {serialize_term(triple.subject)}: stray-literal: {message}")
        rows.append(["error", serialize_term(triple.subject), "stray-literal", message])
    if not human:
        human = ["no violations"]
    _emit(args, human, rows)
    errors = sum(1 for v in violations if v.severity == "error") + len(audit)
    return 1 if errors else 0


def cmd_query(args: argparse.Namespace, cfg: Config) -> int:
    if args.file == "-":
        text = sys.stdin.read()
    else:
        with open(args.file, "r", encoding="utf-8") as fp:
            text = fp.read()
    script = parse_script(text, cfg.namespace_table())
    mutates = bool(script.templates)

    def run(store: Store) -> tuple:
        report = execute_script(store, script)
        return report

    if mutates:
        with _writer_lock(cfg.store):
            store = _open_store(cfg)
            report = run(store)
            _save_state(cfg, store)
    else:
        store = _open_store(cfg)
        report = run(store)

    human: list[str] = []
    rows: list[list[str]] = []
    for index, block in enumerate(script.blocks):
        names = [var.name for var in block.projected]
        header = "\t".join("?" + n for n in names)
        human.append(f"block {index + 1}: {header}")
        printable = sorted(
            report.bindings[index],
            key=lambda row: tuple(term_sort_key(row[n]) for n in names),
        )
        for row in printable:
            rendered = [serialize_term(row[n]) for n in names]
            human.append("\t".join(rendered))
            rows.append([str(index + 1)] + rendered)
        human.append(f"({len(printable)} row(s), {report.block_rows[index]} full match(es))")
    if mutates:
        human.append(f"inserted {report.inserted} new triple(s)")
        rows.append(["inserted", str(report.inserted)])
    _emit(args, human, rows)
    return 0


def cmd_infer(args: argparse.Namespace, cfg: Config) -> int:
    with _writer_lock(cfg.store):
        store = _open_store(cfg)
        engine = _open_engine(cfg, store)
        if args.all:
            counts = engine.run_all()
        elif args.rule:
            counts = {args.rule: engine.run_rule(args.rule)}
        else:
            raise ScholarGraphError("infer needs --rule NAME or --all")
        _save_state(cfg, store, engine)
    human = [f"{name}: {count} new triple(s)" for name, count in counts.items()]
    human.append(f"total: {sum(counts.values())}")
    rows = [[name, str(count)] for name, count in counts.items()]
    _emit(args, human, rows)
    return 0


def cmd_retract(args: argparse.Namespace, cfg: Config) -> int:
    with _writer_lock(cfg.store):
        store = _open_store(cfg)
        engine = _open_engine(cfg, store)
        if args.all:
            removed = engine.retract_all()
            label = "all rules"
        elif args.rule:
            removed = engine.retract_rule(args.rule)
            label = args.rule
        else:
            raise ScholarGraphError("retract needs --rule NAME or --all")
        _save_state(cfg, store, engine)
    _emit(
        args,
        [f"retracted {removed} triple(s) from {label}"],
        [[label, str(removed)]],
    )
    return 0


def _parse_window(text: Optional[str]) -> Optional[tuple[int, int]]:
    if text is None:
        return None
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ScholarGraphError(f"--window needs START:END, got {text!r}")
    try:
        return (int(lo), int(hi))
    except ValueError:
        raise ScholarGraphError(f"--window needs integer years, got {text!r}") from None


def cmd_metric(args: argparse.Namespace, cfg: Config) -> int:
    window = _parse_window(args.window)
    compute = {"if": impact_factor, "uif": usage_impact_factor}[args.kind]
    with _writer_lock(cfg.store):
        store = _open_store(cfg)
        engine = _open_engine(cfg, store)
        result = compute(
            store,
            Iri(args.object),
            args.year,
            window=window,
            engine=engine,
            transitive=not args.direct_only,
        )
        _save_state(cfg, store, engine)
    shown = result.value.quantize(Decimal(1).scaleb(-cfg.precision)) if cfg.precision != 6 else result.value
    _emit(
        args,
        [
            f"{result.metric} of {serialize_term(result.object)} for {result.year} "
            f"(window {result.window[0]}..{result.window[1]}): {shown}",
            f"numerator {result.numerator}, denominator {result.denominator}",
            f"node {serialize_term(result.node)}",
        ],
        [
            [
                result.metric.replace(" ", "-"),
                result.object.value,
                str(result.year),
                str(result.numerator),
                str(result.denominator),
                str(shown),
            ]
        ],
    )
    return 0


def cmd_export(args: argparse.Namespace, cfg: Config) -> int:
    store = _open_store(cfg)
    triples = sorted(
        store.triples(),
        key=lambda t: (
            term_sort_key(t.subject),
            term_sort_key(t.predicate),
            term_sort_key(t.object),
        ),
    )
    if args.output == "-":
        count = write_ntriples(triples, sys.stdout.buffer)
    else:
        with open(args.output, "wb") as fp:
            count = write_ntriples(triples, fp)
    sys.stderr.write(f"exported {count} triple(s)\n")
    return 0


def cmd_catalog(args: argparse.Namespace, cfg: Config) -> int:
    sys.stdout.write(export_catalog())
    return 0


def cmd_stats(args: argparse.Namespace, cfg: Config) -> int:
    store = _open_store(cfg)
    engine = _open_engine(cfg, store)
    pairs: list[tuple[str, int]] = [
        ("triples", len(store)),
        ("terms", store.term_count()),
    ]
    classes: dict[str, int] = {}
    for triple in store.match_terms(None, RDF_TYPE, None):
        if isinstance(triple.object, Iri):
            classes[triple.object.value] = classes.get(triple.object.value, 0) + 1
    for iri in sorted(classes):
        pairs.append((f"class {iri}", classes[iri]))
    for name in engine.ledger_rules():
        pairs.append((f"ledger {name}", len(engine.ledger_entries(name))))
    human = [f"{key}: {value}" for key, value in pairs]
    rows = [[key, str(value)] for key, value in pairs]
    _emit(args, human, rows)
    return 0


# -- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scholargraph",
        description="Scholarly semantic-network store: ingest, map, query, infer, measure.",
    )
    parser.add_argument("--store", help=f"store snapshot path (default {DEFAULT_STORE})")
    parser.add_argument("--sidecar", help=f"record store path (default {DEFAULT_SIDECAR})")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--provider", help="provider IRI minted into mapped contexts")
    parser.add_argument(
        "--namespace",
        action="append",
        metavar="PREFIX=IRI",
        help="extra namespace binding for scripts (repeatable)",
    )
    parser.add_argument(
        "--format",
        choices=("human", "tsv"),
        default="human",
        help="report format on stdout",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)

    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("ingest-biblio", cmd_ingest_biblio, "load bibliographic records from TSV")
    p.add_argument("--input", default="-", help="TSV file ('-' for stdin)")
    p = add("ingest-usage", cmd_ingest_usage, "load usage events from TSV")
    p.add_argument("--input", default="-", help="TSV file ('-' for stdin)")
    p = add("ingest-citations", cmd_ingest_citations, "load citation pairs from TSV")
    p.add_argument("--input", default="-", help="TSV file ('-' for stdin)")

    p = add("map", cmd_map, "project sidecar records into the triple store")
    p.add_argument(
        "--affiliations",
        action="store_true",
        help="also mint Affiliation contexts from usage affiliation strings",
    )

    add("validate", cmd_validate, "check instances against the vocabulary")

    p = add("query", cmd_query, "parse and run a script (SELECT/INSERT)")
    p.add_argument("--file", default="-", help="script file ('-' for stdin)")

    p = add("infer", cmd_infer, "run materialization rules")
    p.add_argument("--rule", help=f"rule name ({', '.join(sorted(RULE_SCRIPTS))})")
    p.add_argument("--all", action="store_true", help="run every registered rule")

    p = add("retract", cmd_retract, "remove exactly what a rule materialized")
    p.add_argument("--rule", help="rule name")
    p.add_argument("--all", action="store_true", help="retract every rule")

    p = add("metric", cmd_metric, "compute a journal metric and write its node")
    p.add_argument("kind", choices=("if", "uif"), help="if = impact factor, uif = usage impact factor")
    p.add_argument("--object", required=True, help="group IRI the metric is about")
    p.add_argument("--year", type=int, required=True, help="target year")
    p.add_argument("--window", help="publication window START:END (default year-2:year-1)")
    p.add_argument(
        "--direct-only",
        action="store_true",
        help="treat partOf as one hop instead of its closure",
    )

    p = add("export", cmd_export, "write the store as sorted N-Triples")
    p.add_argument("--output", default="-", help="output file ('-' for stdout)")

    add("catalog", cmd_catalog, "print the built-in vocabulary")
    add("stats", cmd_stats, "triple, class and ledger counts")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=max(logging.WARNING - 10 * args.verbose, logging.DEBUG),
        format="%(levelname)s %(message)s",
    )
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = _load_config(args)
        return args.func(args, cfg)
    except ScholarGraphError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
