"""Newline-delimited corpus files and the source-registry table."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

RESEARCH_DOMAINS = ("IID", "Generalist", "Unspecified")
REGISTRY_HEADER = ["slug", "name", "type", "research_domain", "access"]


class CorpusError(ValueError):
    """Raised for unreadable corpus or registry files."""


def record_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_corpus(records: Iterable[dict], path: str | Path) -> int:
    """Write records sorted by _id, one JSON object per line. Returns the count."""
    ordered = sorted(records, key=lambda r: r.get("_id", ""))
    with open(path, "w", encoding="utf-8") as fh:
        for record in ordered:
            fh.write(record_line(record))
            fh.write("\n")
    return len(ordered)


def read_corpus(path: str | Path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: not valid JSON ({exc.msg})") from None


def load_corpus(path: str | Path) -> list[dict]:
    return list(read_corpus(path))


@dataclass(frozen=True)
class SourceRegistryEntry:
    slug: str
    name: str
    type: str
    research_domain: str
    access: str


class SourceRegistry:
    def __init__(self, entries: list[SourceRegistryEntry]):
        self.entries = entries
        self.by_slug = {e.slug: e for e in entries}
        duplicates = [s for s in self.by_slug if sum(1 for e in entries if e.slug == s) > 1]
        if duplicates:
            raise CorpusError(f"duplicate registry slug: {duplicates[0]}")

    def __contains__(self, slug: str) -> bool:
        return slug in self.by_slug

    def __getitem__(self, slug: str) -> SourceRegistryEntry:
        return self.by_slug[slug]

    def sorted_by_name(self) -> list[SourceRegistryEntry]:
        return sorted(self.entries, key=lambda e: e.name)


def load_registry(path: str | Path) -> SourceRegistry:
    """Load the tab-separated source registry (header: slug name type research_domain access)."""
    from .schema import ACCESS_LEVELS

    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        return SourceRegistry([])
    header = lines[0].split("\t")
    if header != REGISTRY_HEADER:
        raise CorpusError(f"{path}: bad registry header {header!r}")
    for lineno, line in enumerate(lines[1:], start=2):
        cols = line.split("\t")
        if len(cols) != len(REGISTRY_HEADER):
            raise CorpusError(f"{path}:{lineno}: expected {len(REGISTRY_HEADER)} columns")
        slug, name, type_, domain, access = cols
        if slug != slug.lower() or " " in slug:
            raise CorpusError(f"{path}:{lineno}: slug must be lowercase and URL-safe")
        if domain not in RESEARCH_DOMAINS:
            raise CorpusError(f"{path}:{lineno}: unknown research_domain {domain!r}")
        if access not in ACCESS_LEVELS:
            raise CorpusError(f"{path}:{lineno}: unknown access {access!r}")
        entries.append(SourceRegistryEntry(slug, name, type_, domain, access))
    return SourceRegistry(entries)
