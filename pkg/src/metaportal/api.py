"""Stateless HTTP service over an atomically swapped index snapshot.

Handlers read ``holder.current`` exactly once, so queries in flight during a
reload finish on the snapshot they started with. Response bodies are JSON
with alphabetically ordered keys, bit-identical for a fixed snapshot apart
from ``took_ms``.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import unquote_plus

from fastapi import FastAPI, Request, Response
from pydantic import BaseModel

from .augment import CoverageReport
from .corpus import SourceRegistry, load_corpus, load_registry
from .index import IndexBuildError, SearchIndex, build_index
from .query import QuerySyntaxError, canonical_echo
from .schema import FACET_FIELDS, QUERY_FIELDS

DEFAULT_FACETS = (
    "species.label",
    "infectiousAgent.label",
    "healthCondition.label",
    "measurementTechnique.label",
    "includedInDataCatalog.name",
    "conditionsOfAccess",
    "topicCategory.label",
    "funding.identifier",
)

DEFAULT_CONFIG = {
    "listen": "127.0.0.1:8080",
    "corpus": None,
    "registry": None,
    "report": None,
    "admin_enabled": False,
    "cors_origin": None,
    "bm25": {},
}


@dataclass
class Snapshot:
    index: SearchIndex
    report: CoverageReport | None = None


class SnapshotHolder:
    """One mutable reference; reassignment is the whole swap."""

    def __init__(self):
        self.current: Snapshot | None = None

    def swap(self, snapshot: Snapshot) -> None:
        self.current = snapshot


def load_config(path: str | None = None) -> dict:
    config = dict(DEFAULT_CONFIG)
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            config.update(json.load(fh))
    return config


def _respond(payload: dict, status: int = 200) -> Response:
    body = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return Response(content=body, status_code=status, media_type="application/json")


def _error(status: int, code: str, message: str, **extra) -> Response:
    return _respond({"error": {"code": code, "message": message, **extra}}, status)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, **extra):
        self.response_args = (status, code, message)
        self.extra = extra


def parse_filters(raw_query: str) -> list[tuple[str, str]]:
    """Decode ``filters=field:value,...`` pairs from the raw query string;
    commas inside values survive when percent-encoded."""
    filters = []
    for param in raw_query.split("&"):
        key, _, value = param.partition("=")
        if unquote_plus(key) != "filters":
            continue
        for piece in value.split(","):
            decoded = unquote_plus(piece)
            if not decoded:
                continue
            field, sep, filter_value = decoded.partition(":")
            if not sep or not field or not filter_value:
                raise ApiError(400, "invalid_filter", f"expected field:value, got {decoded!r}")
            filters.append((field, filter_value))
    return filters


def _int_param(request: Request, name: str, default: int) -> int:
    raw = request.query_params.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ApiError(400, "invalid_parameter", f"{name} must be an integer") from None


class ReloadRequest(BaseModel):
    corpus: str
    report: str | None = None


def build_snapshot(corpus_path: str, report_path: str | None = None,
                   bm25: dict | None = None) -> Snapshot:
    records = load_corpus(corpus_path)
    bm25 = bm25 or {}
    index = build_index(
        records,
        k1=bm25.get("k1", 1.2),
        b=bm25.get("b", 0.75),
        boosts=bm25.get("boosts"),
    )
    report = None
    if report_path:
        report = CoverageReport.from_tsv(Path(report_path).read_text(encoding="utf-8"))
    return Snapshot(index, report)


def create_app(config: dict | None = None) -> FastAPI:
    config = {**DEFAULT_CONFIG, **(config or {})}
    app = FastAPI(title="metaportal", docs_url=None, redoc_url=None)
    holder = SnapshotHolder()
    registry = SourceRegistry([])
    if config.get("registry"):
        registry = load_registry(config["registry"])
    if config.get("corpus"):
        holder.swap(build_snapshot(config["corpus"], config.get("report"), config.get("bm25")))
    app.state.holder = holder
    app.state.registry = registry
    app.state.config = config

    if config.get("cors_origin"):
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[config["cors_origin"]],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return _error(*exc.response_args, **exc.extra)

    def snapshot_or_503() -> Snapshot:
        snapshot = holder.current
        if snapshot is None:
            raise ApiError(503, "no_snapshot", "no index snapshot loaded yet")
        return snapshot

    @app.get("/v1/query")
    def query(request: Request):
        started = time.perf_counter()
        snapshot = snapshot_or_503()
        params = request.query_params
        q = params.get("q")
        advanced = params.get("advanced_query")
        if q is not None and advanced is not None:
            raise ApiError(400, "invalid_request", "use at most one of q and advanced_query")
        from_ = _int_param(request, "from", 0)
        size = _int_param(request, "size", 10)
        facet_size = _int_param(request, "facet_size", 10)
        if not 1 <= size <= 1000:
            raise ApiError(400, "invalid_parameter", "size must be between 1 and 1000")
        if from_ < 0:
            raise ApiError(400, "invalid_parameter", "from must be non-negative")
        try:
            ast, echo = canonical_echo(q, advanced)
        except QuerySyntaxError as exc:
            raise ApiError(400, "query_syntax", exc.message, position=exc.position) from None
        filters = parse_filters(request.scope.get("query_string", b"").decode("utf-8", "replace"))
        facet_fields = DEFAULT_FACETS
        if params.get("facets") is not None:
            facet_fields = tuple(f for f in params["facets"].split(",") if f)
        for field, _ in filters:
            if field not in FACET_FIELDS:
                raise ApiError(400, "unknown_field", f"unknown facet field: {field}")
        for field in facet_fields:
            if field not in FACET_FIELDS:
                raise ApiError(400, "unknown_field", f"not a facet field: {field}")
        try:
            total, hits, _ = snapshot.index.execute(ast, filters, from_, size)
            facets = snapshot.index.facet_counts(ast, filters, facet_fields, facet_size)
        except ValueError as exc:
            raise ApiError(400, "invalid_request", str(exc)) from None
        return _respond({
            "took_ms": int((time.perf_counter() - started) * 1000),
            "total": total,
            "from": from_,
            "size": size,
            "query_echo": echo,
            "hits": [{"_id": h._id, "score": h.score, "record": h.record} for h in hits],
            "facets": {
                field: [{"value": c.value, "count": c.count} for c in counts]
                for field, counts in facets.items()
            },
        })

    @app.get("/v1/dataset/{record_id}")
    def dataset(record_id: str):
        started = time.perf_counter()
        snapshot = snapshot_or_503()
        record = snapshot.index.get(record_id)
        if record is None:
            raise ApiError(404, "not_found", f"no dataset with _id {record_id!r}")
        return _respond({
            "took_ms": int((time.perf_counter() - started) * 1000),
            "record": record,
        })

    @app.get("/v1/sources")
    def sources():
        started = time.perf_counter()
        return _respond({
            "took_ms": int((time.perf_counter() - started) * 1000),
            "sources": [
                {
                    "slug": e.slug,
                    "name": e.name,
                    "type": e.type,
                    "research_domain": e.research_domain,
                    "access": e.access,
                }
                for e in registry.sorted_by_name()
            ],
        })

    @app.get("/v1/coverage")
    def coverage():
        started = time.perf_counter()
        snapshot = snapshot_or_503()
        if snapshot.report is None:
            raise ApiError(404, "no_report", "no coverage report accompanies this snapshot")
        report = snapshot.report
        return _respond({
            "took_ms": int((time.perf_counter() - started) * 1000),
            "report": {
                "stages": report.stages,
                "total_records": report.total_records,
                "records_with": report.records_with,
                "distinct_values": report.distinct_values,
            },
        })

    @app.get("/v1/fields")
    def fields():
        started = time.perf_counter()
        return _respond({
            "took_ms": int((time.perf_counter() - started) * 1000),
            "fields": dict(sorted(QUERY_FIELDS.items())),
            "facet_fields": list(FACET_FIELDS),
        })

    @app.post("/v1/admin/reload")
    def reload(body: ReloadRequest):
        started = time.perf_counter()
        if not config.get("admin_enabled"):
            raise ApiError(403, "admin_disabled", "admin endpoints are disabled by config")
        try:
            snapshot = build_snapshot(body.corpus, body.report, config.get("bm25"))
        except (OSError, ValueError, IndexBuildError) as exc:
            raise ApiError(400, "reload_failed", str(exc)) from None
        holder.swap(snapshot)
        return _respond({
            "took_ms": int((time.perf_counter() - started) * 1000),
            "records": snapshot.index.n,
        })

    return app


def serve(config_path: str | None = None) -> None:
    """Run the service with uvicorn; config comes from --config or PORTAL_CONFIG."""
    import os

    import uvicorn

    config = load_config(config_path or os.environ.get("PORTAL_CONFIG"))
    host, _, port = config["listen"].partition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port or 8080),
                log_level="warning")
