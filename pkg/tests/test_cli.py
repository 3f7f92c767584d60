"""End-to-end command-line tests driving main() in a temp directory."""

import os

import pytest

from scholargraph.cli import main
from scholargraph.ontology import (
    HAS_GROUP,
    HAS_UNIT,
    JOURNAL,
    PART_OF,
    RDF_TYPE,
)
from scholargraph.store import Store
from scholargraph.terms import Iri, Triple

BIBLIO = (
    "doc_id\ttitle\tauthors\tcollection\tpublisher\tdate\tdoi\n"
    "doc-1\tFirst paper\tA. Author|B. Author\tJ\tPress\t2005\t\n"
    "doc-2\tSecond paper\tB. Author\tJ\tPress\t2005\t\n"
    "doc-3\tCiting paper\tC. Author\tOther J\tPress\t2007\t\n"
)
USAGE = (
    "event_id\ttime\tagent\tsession\tdoc_id\n"
    "ev-1\t2007-03-04 10:00:00\treader-1\ts1\tdoc-1\n"
    "ev-2\t2007-05-06 11:00:00\treader-2\ts2\tdoc-2\n"
)
CITATIONS = "citing_doc_id\tcited_doc_id\ndoc-3\tdoc-1\n"


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name, text in (
        ("biblio.tsv", BIBLIO),
        ("usage.tsv", USAGE),
        ("citations.tsv", CITATIONS),
    ):
        (tmp_path / name).write_text(text, encoding="utf-8")
    return tmp_path


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def load_everything(capsys):
    for table, source in (
        ("ingest-biblio", "biblio.tsv"),
        ("ingest-usage", "usage.tsv"),
        ("ingest-citations", "citations.tsv"),
    ):
        code, _, _ = run(capsys, table, "--input", source)
        assert code == 0
    code, _, _ = run(capsys, "map")
    assert code == 0


def journal_root(store_path="scholargraph.store"):
    store = Store.load(store_path)
    unit = Iri("urn:mesur:doc:doc-1")
    for root in store.subjects(RDF_TYPE, JOURNAL):
        for edition in store.subjects(PART_OF, root):
            for ctx in store.subjects(HAS_GROUP, edition):
                if store.contains(Triple(ctx, HAS_UNIT, unit)):
                    return root
    raise AssertionError("mapped journal root not found")


# -- pipeline ------------------------------------------------------------------


def test_ingest_reports_counts(workdir, capsys):
    code, out, err = run(capsys, "ingest-biblio", "--input", "biblio.tsv")
    assert code == 0
    assert "loaded 3 record(s), rejected 0" in out
    assert err == ""


def test_ingest_reports_rejects_on_stderr(workdir, capsys):
    (workdir / "bad.tsv").write_text(
        "doc_id\tdate\ndoc-9\t2006\ndoc-9\t2006\n", encoding="utf-8"
    )
    code, out, err = run(capsys, "ingest-biblio", "--input", "bad.tsv")
    assert code == 0
    assert "loaded 1 record(s), rejected 1" in out
    assert "line 3: rejected: duplicate doc_id 'doc-9'" in err


def test_map_creates_the_store_file(workdir, capsys):
    load_everything(capsys)
    assert os.path.exists("scholargraph.store")
    assert os.path.exists("scholargraph.sidecar")
    code, out, _ = run(capsys, "map")
    assert code == 0
    assert "publishes contexts created: 0" in out  # idempotent second run


def test_validate_passes_on_mapped_data(workdir, capsys):
    load_everything(capsys)
    code, out, _ = run(capsys, "validate")
    assert code == 0


def test_query_selects_rows(workdir, capsys):
    load_everything(capsys)
    (workdir / "q.q").write_text(
        "SELECT ?u WHERE (?p rdf:type mesur:Publishes) (?p mesur:hasUnit ?u) .",
        encoding="utf-8",
    )
    code, out, _ = run(capsys, "query", "--file", "q.q")
    assert code == 0
    assert "(3 row(s), 3 full match(es))" in out
    assert "<urn:mesur:doc:doc-1>" in out


def test_query_with_insert_mutates_and_persists(workdir, capsys):
    load_everything(capsys)
    (workdir / "mark.q").write_text(
        "SELECT ?u WHERE (?p rdf:type mesur:Publishes) (?p mesur:hasUnit ?u)"
        " INSERT < ?u rdf:type mesur:Document > .",
        encoding="utf-8",
    )
    code, out, _ = run(capsys, "query", "--file", "mark.q")
    assert code == 0
    assert "inserted 3 new triple(s)" in out
    code, out, _ = run(capsys, "query", "--file", "mark.q")
    assert "inserted 0 new triple(s)" in out


def test_infer_retract_round_trip_restores_the_export(workdir, capsys):
    load_everything(capsys)
    code, _, _ = run(capsys, "export", "--output", "before.nt")
    assert code == 0
    code, out, _ = run(capsys, "infer", "--all")
    assert code == 0
    assert "total:" in out
    assert os.path.exists("scholargraph.store.ledger")
    code, out, _ = run(capsys, "stats")
    assert "ledger authored_by" in out
    code, out, _ = run(capsys, "retract", "--all")
    assert code == 0
    code, _, _ = run(capsys, "export", "--output", "after.nt")
    assert code == 0
    before = (workdir / "before.nt").read_bytes()
    after = (workdir / "after.nt").read_bytes()
    assert before == after


def test_metric_values_through_the_pipeline(workdir, capsys):
    load_everything(capsys)
    root = journal_root()
    code, out, _ = run(
        capsys, "metric", "if", "--object", root.value, "--year", "2007"
    )
    assert code == 0
    assert "impact factor" in out
    assert "numerator 1, denominator 2" in out
    assert "0.500000" in out
    code, out, _ = run(
        capsys, "metric", "uif", "--object", root.value, "--year", "2007"
    )
    assert code == 0
    assert "numerator 2, denominator 2" in out
    assert "1.000000" in out


def test_metric_window_flag(workdir, capsys):
    load_everything(capsys)
    root = journal_root()
    code, out, _ = run(
        capsys, "metric", "if",
        "--object", root.value, "--year", "2007", "--window", "2004:2006",
    )
    assert code == 0
    assert "(window 2004..2006)" in out
    code, _, err = run(
        capsys, "metric", "if",
        "--object", root.value, "--year", "2007", "--window", "banana",
    )
    assert code == 1
    assert "--window needs" in err


def test_metric_failure_modes_exit_one(workdir, capsys):
    load_everything(capsys)
    code, _, err = run(
        capsys, "metric", "if", "--object", "urn:x:nowhere", "--year", "2007"
    )
    assert code == 1
    assert "error:" in err
    root = journal_root()
    code, _, err = run(
        capsys, "metric", "if",
        "--object", root.value, "--year", "2007", "--window", "1990:1991",
    )
    assert code == 1
    assert "undefined" in err


# -- errors and exit codes --------------------------------------------------------


def test_no_subcommand_is_a_usage_error(workdir, capsys):
    code, _, err = run(capsys)
    assert code == 2
    assert "usage:" in err


def test_unknown_subcommand_exits_two(workdir, capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_query_parse_errors_exit_one_with_position(workdir, capsys):
    load_everything(capsys)
    (workdir / "broken.q").write_text(
        "SELECT ?x WHERE (?x mesur.hasSource ?y) .", encoding="utf-8"
    )
    code, _, err = run(capsys, "query", "--file", "broken.q")
    assert code == 1
    assert "bare name 'mesur.hasSource'" in err
    assert "(line 1, column 21)" in err


def test_infer_needs_a_rule_or_all(workdir, capsys):
    load_everything(capsys)
    code, _, err = run(capsys, "infer")
    assert code == 1
    assert "infer needs --rule NAME or --all" in err
    code, _, err = run(capsys, "infer", "--rule", "nonsense")
    assert code == 1
    assert "nonsense" in err


def test_lock_contention_fails_cleanly(workdir, capsys):
    load_everything(capsys)
    lock = workdir / "scholargraph.store.lock"
    lock.write_text("12345\n", encoding="utf-8")
    code, _, err = run(capsys, "map")
    assert code == 1
    assert "another process holds the store lock" in err
    lock.unlink()
    code, _, _ = run(capsys, "map")
    assert code == 0


def test_crashed_commands_release_the_lock(workdir, capsys):
    # parses fine, takes the writer lock, then dies evaluating 3/0
    load_everything(capsys)
    (workdir / "broken.q").write_text(
        "SELECT ?x WHERE (?x rdf:type mesur:Article)"
        " SELECT ?y WHERE (?y rdf:type mesur:EditedBook)"
        " INSERT < _1 mesur:hasNumericValue (COUNT(?x) / COUNT(?y)) > .",
        encoding="utf-8",
    )
    code, _, err = run(capsys, "query", "--file", "broken.q")
    assert code == 1
    assert "division by zero" in err
    assert not os.path.exists("scholargraph.store.lock")


# -- configuration ------------------------------------------------------------------


def test_store_location_precedence(workdir, capsys, monkeypatch):
    flag_store = Store()
    flag_store.insert(Triple(Iri("urn:x:flag"), RDF_TYPE, JOURNAL))
    flag_store.save("flag.store")
    env_store = Store()
    for n in range(2):
        env_store.insert(Triple(Iri(f"urn:x:env:{n}"), RDF_TYPE, JOURNAL))
    env_store.save("env.store")
    (workdir / "cfg.json").write_text('{"store": "cfg.store"}', encoding="utf-8")
    cfg_store = Store()
    for n in range(3):
        cfg_store.insert(Triple(Iri(f"urn:x:cfg:{n}"), RDF_TYPE, JOURNAL))
    cfg_store.save("cfg.store")

    code, out, _ = run(capsys, "--config", "cfg.json", "stats")
    assert "triples: 3" in out

    monkeypatch.setenv("SCHOLARGRAPH_STORE", "env.store")
    code, out, _ = run(capsys, "--config", "cfg.json", "stats")
    assert "triples: 2" in out

    code, out, _ = run(
        capsys, "--store", "flag.store", "--config", "cfg.json", "stats"
    )
    assert "triples: 1" in out


def test_namespace_flag_feeds_the_query_parser(workdir, capsys):
    load_everything(capsys)
    (workdir / "lanl.q").write_text(
        "SELECT ?x WHERE (lanl:marko mesur:hasCoauthor ?x) .", encoding="utf-8"
    )
    code, _, err = run(capsys, "query", "--file", "lanl.q")
    assert code == 1
    assert "unknown namespace prefix 'lanl'" in err
    code, out, _ = run(
        capsys,
        "--namespace", "lanl=http://library.lanl.gov/",
        "query", "--file", "lanl.q",
    )
    assert code == 0
    assert "(0 row(s), 0 full match(es))" in out


def test_tsv_format_is_machine_readable_and_stable(workdir, capsys):
    load_everything(capsys)
    (workdir / "q.q").write_text(
        "SELECT ?u WHERE (?p rdf:type mesur:Publishes) (?p mesur:hasUnit ?u) .",
        encoding="utf-8",
    )
    outputs = []
    for _ in range(2):
        code, out, _ = run(capsys, "--format", "tsv", "query", "--file", "q.q")
        assert code == 0
        outputs.append(out)
    assert outputs[0] == outputs[1]
    lines = outputs[0].splitlines()
    assert len(lines) == 3
    assert all(line.startswith("1\t") for line in lines)

    code, out, _ = run(capsys, "--format", "tsv", "ingest-biblio", "--input", "biblio.tsv")
    assert out.splitlines()[-1] == "0\t3"  # re-ingest: all three are duplicates now


def test_catalog_prints_the_vocabulary(workdir, capsys):
    code, out, _ = run(capsys, "catalog")
    assert code == 0
    assert "Journal" in out
    assert "hasNumericValue" in out


def test_export_writes_sorted_ntriples(workdir, capsys):
    load_everything(capsys)
    code, out, err = run(capsys, "export")
    assert code == 0
    assert "exported" in err
    lines = [line for line in out.splitlines() if line]
    assert lines == sorted(lines)
    assert all(line.endswith(" .") for line in lines)
