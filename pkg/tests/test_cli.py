import json
import subprocess
import sys

import pytest

from metaportal.cli import main
from metaportal.corpus import load_corpus, record_line, write_corpus

from helpers import FIXTURES, make_record
from oracles import naive_coverage

GOLDEN_REPORT = FIXTURES / "golden" / "coverage_report.tsv"
FIXTURE_CORPUS = FIXTURES / "corpus" / "fixture_corpus.ndjson"

SOURCES = [
    ("ncbi-sra", "sra", None),
    ("zenodo", "zenodo", None),
    ("immport", "immport", "immport.rules"),
    ("ncbi-geo", "geo", "geo.rules"),
    ("accessclinicaldata", "accessclinicaldata", "accessclinicaldata.rules"),
]


def run_chain(workdir) -> tuple:
    """harvest every fixture source -> concatenate -> augment -> report."""
    partials = []
    for slug, subdir, rules in SOURCES:
        out = workdir / f"{slug}.ndjson"
        argv = [
            "harvest", "--source", slug, "--in", str(FIXTURES / subdir),
            "--out", str(out), "--registry", str(FIXTURES / "registry.tsv"),
        ]
        if rules:
            argv += ["--rules", str(FIXTURES / "rules" / rules)]
        assert main(argv) == 0
        partials.append(out)
    merged = workdir / "all.ndjson"
    merged.write_bytes(b"".join(p.read_bytes() for p in partials))
    enriched = workdir / "enriched.ndjson"
    report = workdir / "report.tsv"
    assert main([
        "augment", "--in", str(merged), "--out", str(enriched),
        "--stages", "standardize,citation,textmine,topics",
        "--lexicons", str(FIXTURES / "lexicons"),
        "--annotations", str(FIXTURES / "annotations"),
        "--corrections", str(FIXTURES / "corrections.tsv"),
        "--report", str(report),
    ]) == 0
    return enriched, report


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    return run_chain(tmp_path_factory.mktemp("chain"))


class TestFullChain:
    def test_reproduces_golden_coverage_report_byte_for_byte(self, chain):
        _, report = chain
        assert report.read_bytes() == GOLDEN_REPORT.read_bytes()

    def test_golden_numbers_survive_independent_recount(self, chain):
        enriched, report = chain
        recount = naive_coverage(load_corpus(enriched))
        lines = {row.split("\t")[0]: row.split("\t")[1:]
                 for row in report.read_text().split("\n\n")[0].splitlines()[1:]}
        for field, (filled, _) in recount.items():
            assert int(lines[field][-1]) == filled

    def test_index_check_passes(self, chain):
        enriched, _ = chain
        assert main(["index", "--in", str(enriched), "--check"]) == 0

    def test_validate_clean(self, chain):
        enriched, _ = chain
        assert main(["validate", "--in", str(enriched)]) == 0

    def test_report_subcommand_prints_current_column(self, chain, capsys):
        enriched, _ = chain
        assert main(["report", "--in", str(enriched)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("# of records with\tcurrent\n")
        assert "\nspecies\t8\n" in out

    def test_rerun_is_byte_identical(self, chain, tmp_path):
        enriched, _ = chain
        again = tmp_path / "again.ndjson"
        assert main([
            "augment", "--in", str(enriched), "--out", str(again),
            "--stages", "standardize,citation,textmine,topics",
            "--lexicons", str(FIXTURES / "lexicons"),
            "--annotations", str(FIXTURES / "annotations"),
            "--corrections", str(FIXTURES / "corrections.tsv"),
        ]) == 0
        assert again.read_bytes() == enriched.read_bytes()


class TestValidate:
    def test_good_corpus_exit_0(self, tmp_path):
        corpus = tmp_path / "good.ndjson"
        write_corpus([make_record("v_1")], corpus)
        assert main(["validate", "--in", str(corpus)]) == 0

    def test_bad_corpus_exit_1_and_names_offender(self, tmp_path, capsys):
        corpus = tmp_path / "bad.ndjson"
        record = make_record("v_bad")
        record["name"] = ""
        corpus.write_text(record_line(record) + "\n")
        assert main(["validate", "--in", str(corpus)]) == 1
        err = capsys.readouterr().err
        assert "v_bad" in err
        assert "name: required, empty" in err

    def test_duplicate_ids_detected(self, tmp_path, capsys):
        corpus = tmp_path / "dup.ndjson"
        corpus.write_text(record_line(make_record("d_1")) + "\n" + record_line(make_record("d_1")) + "\n")
        assert main(["validate", "--in", str(corpus)]) == 1
        assert "duplicate _id" in capsys.readouterr().err

    def test_unreadable_file_exit_1(self, tmp_path):
        assert main(["validate", "--in", str(tmp_path / "missing.ndjson")]) == 1


class TestUsageErrors:
    def test_wrong_stage_order_exit_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["augment", "--in", "x", "--out", "y",
                  "--stages", "citation,standardize", "--lexicons", "z"])
        assert exc.value.code == 2
        assert "order" in capsys.readouterr().err

    def test_unknown_stage_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["augment", "--in", "x", "--out", "y", "--stages", "llm", "--lexicons", "z"])
        assert exc.value.code == 2

    def test_citation_without_annotations_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["augment", "--in", "x", "--out", "y", "--stages", "citation", "--lexicons", "z"])
        assert exc.value.code == 2

    def test_missing_required_flag_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["harvest", "--source", "zenodo"])
        assert exc.value.code == 2


class TestSearch:
    def test_stdout_is_ndjson(self, capsys):
        assert main(["search", "--in", str(FIXTURE_CORPUS), "--q", "Zika virus"]) == 0
        captured = capsys.readouterr()
        lines = [l for l in captured.out.splitlines() if l]
        assert lines
        for line in lines:
            hit = json.loads(line)
            assert {"_id", "score", "record"} <= set(hit)
        assert "total=" in captured.err

    def test_filters_flag(self, capsys):
        assert main([
            "search", "--in", str(FIXTURE_CORPUS), "--q", "Zika virus",
            "--filters", "species.label:Homo sapiens,measurementTechnique.label:Proteomics",
        ]) == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l]
        assert len(lines) == 1
        assert json.loads(lines[0])["_id"] == "massive_MSV000090001"

    def test_advanced_flag(self, capsys):
        assert main([
            "search", "--in", str(FIXTURE_CORPUS),
            "--advanced", "healthCondition:malaria OR healthCondition:tuberculosis",
        ]) == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l]
        assert len(lines) == 2

    def test_bad_query_exit_1(self, capsys):
        assert main(["search", "--in", str(FIXTURE_CORPUS), "--advanced", "(bad"]) == 1
        assert "search failed" in capsys.readouterr().err


class TestHarvestErrors:
    def test_unknown_slug_exit_1(self, tmp_path, capsys):
        assert main([
            "harvest", "--source", "nonexistent", "--in", str(FIXTURES / "sra"),
            "--out", str(tmp_path / "o.ndjson"), "--registry", str(FIXTURES / "registry.tsv"),
        ]) == 1
        assert "unknown source slug" in capsys.readouterr().err

    def test_bad_rules_target_exit_1(self, tmp_path, capsys):
        rules = tmp_path / "bad.rules"
        rules.write_text("species -> specie term_wrap\n")
        assert main([
            "harvest", "--source", "immport", "--in", str(FIXTURES / "immport"),
            "--out", str(tmp_path / "o.ndjson"), "--registry", str(FIXTURES / "registry.tsv"),
            "--rules", str(rules),
        ]) == 1
        assert "specie" in capsys.readouterr().err


class TestIndexCommand:
    def test_duplicate_ids_fail_build(self, tmp_path, capsys):
        corpus = tmp_path / "dup.ndjson"
        corpus.write_text(record_line(make_record("d_1")) + "\n" + record_line(make_record("d_1")) + "\n")
        assert main(["index", "--in", str(corpus)]) == 1
        assert "d_1" in capsys.readouterr().err

    def test_fixture_corpus_checks_clean(self):
        assert main(["index", "--in", str(FIXTURE_CORPUS), "--check"]) == 0


class TestEntryPoint:
    def test_console_subprocess_exit_codes(self, tmp_path):
        good = subprocess.run(
            [sys.executable, "-m", "metaportal", "validate", "--in", str(FIXTURE_CORPUS)],
            capture_output=True, text=True,
        )
        assert good.returncode == 0
        bad = subprocess.run(
            [sys.executable, "-m", "metaportal", "validate", "--in", str(tmp_path / "nope.ndjson")],
            capture_output=True, text=True,
        )
        assert bad.returncode == 1
        usage = subprocess.run(
            [sys.executable, "-m", "metaportal", "augment", "--in", "x", "--out", "y",
             "--stages", "topics,standardize", "--lexicons", "z"],
            capture_output=True, text=True,
        )
        assert usage.returncode == 2

    def test_version_flag(self):
        result = subprocess.run(
            [sys.executable, "-m", "metaportal", "--version"],
            capture_output=True, text=True,
        )
        assert result.returncode == 0
        assert result.stdout.startswith("metaportal ")

    def test_search_stdout_stays_clean_in_subprocess(self):
        result = subprocess.run(
            [sys.executable, "-m", "metaportal", "search", "--in", str(FIXTURE_CORPUS),
             "--q", "malaria"],
            capture_output=True, text=True,
        )
        assert result.returncode == 0
        for line in filter(None, result.stdout.splitlines()):
            json.loads(line)
