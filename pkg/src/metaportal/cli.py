"""Command-line entry point: harvest -> augment -> index -> serve, plus
search/report/validate utilities.

Exit codes: 0 success, 1 data errors, 2 usage errors. Diagnostics go to
stderr; data goes to stdout or the named output files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import CorpusError, load_corpus, load_registry
from .harvesters import ConfigurationError, harvest_batch, load_mapping_rules
from .query import QuerySyntaxError, canonical_echo
from .schema import PIPELINE_STAGES, Stage, validate_record


def _stderr(*parts) -> None:
    print(*parts, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metaportal",
                                     description="dataset metadata harmonization and search")
    parser.add_argument("--version", action="version", version=f"metaportal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    harvest = sub.add_parser("harvest", help="parse one source's exports into a corpus")
    harvest.add_argument("--source", required=True, help="source slug from the registry")
    harvest.add_argument("--in", dest="input", required=True, help="directory of raw documents")
    harvest.add_argument("--out", required=True, help="corpus file to write")
    harvest.add_argument("--registry", required=True, help="source registry file")
    harvest.add_argument("--rules", help="mapping rules file for structured sources")
    harvest.add_argument("--jobs", type=int, default=None, help="parallel parse workers")
    harvest.set_defaults(func=cmd_harvest)

    augment = sub.add_parser("augment", help="run enrichment stages over a corpus")
    augment.add_argument("--in", dest="input", required=True)
    augment.add_argument("--out", required=True)
    augment.add_argument("--stages", required=True,
                         help="comma list in pipeline order: standardize,citation,textmine,topics")
    augment.add_argument("--lexicons", required=True, help="lexicon directory")
    augment.add_argument("--annotations", help="publication annotations directory")
    augment.add_argument("--corrections", help="corrections file")
    augment.add_argument("--report", help="coverage report file to write")
    augment.set_defaults(func=cmd_augment)

    index = sub.add_parser("index", help="build the search index from a corpus")
    index.add_argument("--in", dest="input", required=True)
    index.add_argument("--check", action="store_true",
                       help="self-verify postings and facets against a recount")
    index.set_defaults(func=cmd_index)

    search = sub.add_parser("search", help="one-shot query against a corpus")
    search.add_argument("--in", dest="input", required=True)
    search.add_argument("--q", help="basic free-text query")
    search.add_argument("--advanced", help="advanced boolean query")
    search.add_argument("--filters", default="", help="field:value pairs, comma separated")
    search.add_argument("--from", dest="from_", type=int, default=0)
    search.add_argument("--size", type=int, default=10)
    search.set_defaults(func=cmd_search)

    serve = sub.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--config", help="config file (default: $PORTAL_CONFIG)")
    serve.set_defaults(func=cmd_serve)

    report = sub.add_parser("report", help="print a corpus's coverage table")
    report.add_argument("--in", dest="input", required=True)
    report.set_defaults(func=cmd_report)

    validate = sub.add_parser("validate", help="validate a corpus; nonzero exit on any error")
    validate.add_argument("--in", dest="input", required=True)
    validate.set_defaults(func=cmd_validate)
    return parser


def cmd_harvest(args, parser) -> int:
    try:
        registry = load_registry(args.registry)
        rules = load_mapping_rules(args.rules) if args.rules else None
        stats = harvest_batch(args.input, args.source, registry, args.out,
                              rules=rules, jobs=args.jobs)
    except (CorpusError, ConfigurationError, ValueError, OSError) as exc:
        _stderr(f"harvest failed: {exc}")
        return 1
    _stderr(f"harvested {args.source}: parsed={stats.parsed} rejected={stats.rejected}")
    for reason in stats.reject_reasons:
        _stderr(f"  rejected {reason}")
    return 0


def _parse_stages(raw: str, parser) -> list[Stage]:
    tokens = [t for t in raw.split(",") if t]
    valid = {s.value: s for s in PIPELINE_STAGES}
    stages = []
    for token in tokens:
        if token not in valid:
            parser.error(f"unknown stage {token!r}; choose from {','.join(valid)}")
        stages.append(valid[token])
    ranks = [s.rank for s in stages]
    if ranks != sorted(ranks) or len(set(ranks)) != len(ranks):
        parser.error(f"stages must follow the pipeline order {','.join(valid)} without repeats")
    return stages


def cmd_augment(args, parser) -> int:
    from .augment import load_annotations_dir, run_pipeline_files
    from .lexicons import load_corrections, load_lexicon_dir

    stages = _parse_stages(args.stages, parser)
    if Stage.CITATION in stages and not args.annotations:
        parser.error("--annotations is required for the citation stage")
    try:
        lexicons = load_lexicon_dir(args.lexicons)
        annotations = load_annotations_dir(args.annotations) if args.annotations else None
        corrections = load_corrections(args.corrections) if args.corrections else None
        run_pipeline_files(args.input, args.out, stages, lexicons, annotations,
                           corrections, report_path=args.report)
    except (CorpusError, ValueError, OSError) as exc:
        _stderr(f"augment failed: {exc}")
        return 1
    _stderr(f"augmented {args.input} -> {args.out} ({args.stages})")
    return 0


def cmd_index(args, parser) -> int:
    from .index import IndexBuildError, build_index

    try:
        records = load_corpus(args.input)
        index = build_index(records)
    except (CorpusError, IndexBuildError, OSError) as exc:
        _stderr(f"index failed: {exc}")
        return 1
    _stderr(f"indexed {index.n} records")
    if args.check:
        problems = index.self_check()
        if problems:
            for problem in problems:
                _stderr(f"self-check: {problem}")
            return 1
        _stderr("self-check passed")
    return 0


def cmd_search(args, parser) -> int:
    from .index import build_index

    if args.q is not None and args.advanced is not None:
        parser.error("use at most one of --q and --advanced")
    try:
        records = load_corpus(args.input)
        index = build_index(records)
        ast, _ = canonical_echo(args.q, args.advanced)
        filters = []
        for piece in filter(None, args.filters.split(",")):
            field, sep, value = piece.partition(":")
            if not sep:
                _stderr(f"bad filter {piece!r}: expected field:value")
                return 1
            filters.append((field, value))
        total, hits, _ = index.execute(ast, filters, args.from_, args.size)
    except (CorpusError, QuerySyntaxError, ValueError, OSError) as exc:
        _stderr(f"search failed: {exc}")
        return 1
    _stderr(f"total={total}")
    for hit in hits:
        line = json.dumps({"_id": hit._id, "score": hit.score, "record": hit.record},
                          sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        print(line)
    return 0


def cmd_serve(args, parser) -> int:
    from .api import serve

    serve(args.config)
    return 0


def cmd_report(args, parser) -> int:
    from .augment import coverage_column

    try:
        records = load_corpus(args.input)
    except (CorpusError, OSError) as exc:
        _stderr(f"report failed: {exc}")
        return 1
    sys.stdout.write(coverage_column(records).to_tsv())
    return 0


def cmd_validate(args, parser) -> int:
    try:
        records = load_corpus(args.input)
    except (CorpusError, OSError) as exc:
        _stderr(f"validate failed: {exc}")
        return 1
    failures = 0
    seen_ids: set[str] = set()
    for record in records:
        rid = record.get("_id", "<missing _id>")
        if rid in seen_ids:
            _stderr(f"{rid}: duplicate _id")
            failures += 1
        seen_ids.add(rid)
        report = validate_record(record)
        for error in report.errors:
            _stderr(f"{rid}: {error}")
        failures += len(report.errors)
    _stderr(f"validated {len(records)} records: {failures} errors")
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())
