"""Per-source parsers turning repository exports into harmonized records.

Structured sources are driven by mapping-rule files (one rule per line,
``source_path -> target_field [transform]``) so that adding a source does not
require new code. SRA-style XML and generalist JSON deposits have dedicated
parsers.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import SourceRegistry, write_corpus
from .schema import (
    FIELDS,
    QUERY_FIELDS,
    Stage,
    canonicalize_record,
    collapse_ws,
    field_is_empty,
    make_record_id,
    normalize_date,
    term_ref,
    validate_record,
)

FORMAT_XML = "xml"
FORMAT_STRUCTURED_TEXT = "structured_text"
FORMAT_STRUCTURED_RECORD = "structured_record"

_SUFFIX_FORMATS = {".xml": FORMAT_XML, ".txt": FORMAT_STRUCTURED_TEXT, ".json": FORMAT_STRUCTURED_RECORD}

TRANSFORMS = ("identity", "split_list", "date_normalize", "term_wrap")

_LIST_OF_OBJECTS = {
    "person_list", "funding_list", "distribution_list", "place_list",
    "org_list", "citation_list", "ref_list", "term_list",
}
_DICT_KINDS = {"catalog", "org", "temporal"}


class ParseError(ValueError):
    """A single document could not be parsed; the batch continues."""


class ConfigurationError(ValueError):
    """A mapping-rule problem that invalidates the whole batch."""


@dataclass(frozen=True)
class RawSourceDocument:
    source_slug: str
    native_id: str
    payload: bytes
    format: str


@dataclass(frozen=True)
class MappingRule:
    source_path: str
    target_field: str
    transform: str = "identity"
    optional: bool = False


@dataclass
class HarvestStats:
    parsed: int = 0
    rejected: int = 0
    reject_reasons: list[str] = field(default_factory=list)


_RULE_RE = re.compile(r"^(?P<path>\S+)\s*(?:->|→)\s*(?P<target>\S+)(?:\s+(?P<transform>\S+))?$")


def load_mapping_rules(path: str | Path) -> list[MappingRule]:
    rules = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            m = _RULE_RE.match(line)
            if not m:
                raise ConfigurationError(f"{path}:{lineno}: cannot parse rule {line!r}")
            source_path, target, transform = m.group("path"), m.group("target"), m.group("transform") or "identity"
            optional = source_path.endswith("?")
            if optional:
                source_path = source_path[:-1]
            rules.append(MappingRule(source_path, target, transform, optional))
    validate_rules(rules)
    return rules


def validate_rules(rules: list[MappingRule]) -> None:
    """Fail fast on bad targets or transforms, before any record is touched."""
    for rule in rules:
        base = rule.target_field.split(".", 1)[0]
        if base not in FIELDS or FIELDS[base].tier == "internal":
            raise ConfigurationError(f"unknown target field: {rule.target_field}")
        if "." in rule.target_field and rule.target_field not in QUERY_FIELDS:
            raise ConfigurationError(f"unknown target field: {rule.target_field}")
        if rule.transform not in TRANSFORMS:
            raise ConfigurationError(f"unknown transform: {rule.transform}")


_TAG_RE = re.compile(rb"<(/?)([A-Za-z_][\w.-]*)((?:[^>\"']|\"[^\"]*\"|'[^']*')*?)(/?)>")


def _deepest_unclosed_element(payload: bytes) -> str | None:
    stack: list[str] = []
    for m in _TAG_RE.finditer(payload):
        if m.group(4) == b"/":
            continue
        name = m.group(2).decode("utf-8", "replace")
        if m.group(1):
            while stack:
                if stack.pop() == name:
                    break
        else:
            stack.append(name)
    return stack[-1] if stack else None


def _byte_offset(payload: bytes, line: int, column: int) -> int:
    lines = payload.split(b"\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + column


def _parse_xml(payload: bytes) -> ET.Element:
    try:
        return ET.fromstring(payload)
    except ET.ParseError as exc:
        line, column = exc.position
        offset = _byte_offset(payload, line, column)
        detail = f"XML parse error at byte {offset}: {exc.msg.split(':')[0]}"
        unclosed = _deepest_unclosed_element(payload)
        if unclosed and ("no element found" in exc.msg or "unclosed" in exc.msg):
            detail += f" (unclosed element {unclosed!r})"
        raise ParseError(detail) from None


def _xml_text(root: ET.Element, tag: str) -> str:
    node = root.find(f".//{tag}")
    return collapse_ws(node.text) if node is not None and node.text else ""


def _stamp_provenance(record: dict) -> dict:
    provenance = {
        name: Stage.INGEST.value
        for name in record
        if not name.startswith("_") and not field_is_empty(record, name)
    }
    if provenance:
        record["_provenance"] = provenance
    return record


def parse_sra_xml(doc: RawSourceDocument) -> dict:
    """Map an SRA-style experiment package: study title, organism, and
    sequencing strategy become name, species, and measurementTechnique."""
    root = _parse_xml(doc.payload)
    accession = root.get("accession") or _xml_text(root, "PRIMARY_ID") or doc.native_id
    record: dict = {
        "_id": make_record_id(doc.source_slug, accession),
        "identifier": accession,
        "includedInDataCatalog": {"name": "NCBI SRA"},
        "url": f"https://www.ncbi.nlm.nih.gov/sra/{accession}",
    }
    if title := _xml_text(root, "STUDY_TITLE"):
        record["name"] = title
    if abstract := _xml_text(root, "STUDY_ABSTRACT"):
        record["description"] = abstract
    if organism := _xml_text(root, "SCIENTIFIC_NAME"):
        record["species"] = [term_ref(organism)]
    technique = _xml_text(root, "LIBRARY_STRATEGY") or _xml_text(root, "INSTRUMENT_MODEL")
    if technique:
        record["measurementTechnique"] = [term_ref(technique)]
    return _stamp_provenance(record)


def parse_generalist(doc: RawSourceDocument, catalog_name: str) -> dict:
    """Minimal mapping for generalist deposits: common standardized fields
    only; everything else is left for augmentation."""
    try:
        payload = json.loads(doc.payload)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise ParseError("expected a JSON object")
    native_id = payload.get("id")
    if native_id in (None, ""):
        raise ParseError("missing native identifier")
    native_id = str(native_id)
    doi = str(payload.get("doi") or "")
    record: dict = {
        "_id": make_record_id(doc.source_slug, native_id),
        "identifier": doi or native_id,
        "includedInDataCatalog": {"name": catalog_name},
    }
    if doi:
        record["doi"] = doi
    if title := payload.get("title"):
        record["name"] = str(title)
    if description := payload.get("description"):
        record["description"] = str(description)
    if url := payload.get("url"):
        record["url"] = str(url)
    elif doi:
        record["url"] = f"https://doi.org/{doi}"
    creators = payload.get("creators") or []
    authors = []
    for creator in creators:
        if isinstance(creator, str):
            authors.append({"name": creator})
        elif isinstance(creator, dict) and creator.get("name"):
            entry = {"name": str(creator["name"])}
            if creator.get("affiliation"):
                entry["affiliation"] = str(creator["affiliation"])
            authors.append(entry)
    if authors:
        record["author"] = authors
    keywords = payload.get("keywords")
    if isinstance(keywords, str):
        keywords = [k.strip() for k in keywords.split(",") if k.strip()]
    if keywords:
        record["keywords"] = [str(k) for k in keywords]
    if license_ := payload.get("license"):
        record["license"] = str(license_)
    return _stamp_provenance(record)


def _resolve_path(payload, path: str):
    value = payload
    for part in path.split("."):
        if isinstance(value, dict):
            value = value.get(part)
        else:
            return None
        if value is None:
            return None
    return value


def _as_text_list(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value if v not in (None, "")]
    return [str(value)]


def _apply_transform(rule: MappingRule, value) -> list[str]:
    values = _as_text_list(value)
    if rule.transform == "split_list":
        split = []
        for v in values:
            split.extend(p.strip() for p in re.split(r"[;,]", v) if p.strip())
        values = split
    elif rule.transform == "date_normalize":
        try:
            values = [normalize_date(v) for v in values]
        except ValueError as exc:
            raise ParseError(f"{rule.source_path}: {exc}") from None
    return values


def _nest(leaf_path: str, value: str) -> dict:
    parts = leaf_path.split(".")
    out: dict = {parts[-1]: value}
    for part in reversed(parts[:-1]):
        out = {part: out}
    return out


def _assign(record: dict, target: str, values: list[str]) -> None:
    if not values:
        return
    base, _, leaf = target.partition(".")
    kind = FIELDS[base].kind
    if leaf:
        if kind in _LIST_OF_OBJECTS:
            record.setdefault(base, []).extend(_nest(leaf, v) for v in values)
        elif kind in _DICT_KINDS:
            record.setdefault(base, {})[leaf] = values[0]
        return
    if kind == "term_list":
        record.setdefault(base, []).extend(term_ref(v) for v in values)
    elif kind == "text_list":
        record.setdefault(base, []).extend(values)
    elif kind == "bool":
        record[base] = values[0].lower() in ("true", "1", "yes")
    else:
        if len(values) > 1:
            raise ParseError(f"multiple values for scalar field {base}")
        record[base] = values[0]


def _parse_structured_text(payload: bytes) -> dict:
    """``key: value`` lines; repeated keys accumulate into lists."""
    out: dict = {}
    for line in payload.decode("utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ParseError(f"not a key: value line: {line!r}")
        key, value = key.strip(), value.strip()
        if key in out:
            existing = out[key]
            out[key] = existing + [value] if isinstance(existing, list) else [existing, value]
        else:
            out[key] = value
    return out


def parse_structured_source(doc: RawSourceDocument, rules: list[MappingRule]) -> dict:
    """Apply a mapping-rule list to a structured payload, in rule order."""
    validate_rules(rules)
    if doc.format == FORMAT_STRUCTURED_TEXT:
        payload = _parse_structured_text(doc.payload)
    else:
        try:
            payload = json.loads(doc.payload)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not valid JSON: {exc.msg}") from None
        if not isinstance(payload, dict):
            raise ParseError("expected a JSON object")
    record: dict = {}
    for rule in rules:
        value = _resolve_path(payload, rule.source_path)
        if value in (None, "", []):
            if rule.optional:
                continue
            raise ParseError(f"missing required path {rule.source_path!r}")
        _assign(record, rule.target_field, _apply_transform(rule, value))
    native_id = record.get("identifier") or doc.native_id
    if not native_id:
        raise ParseError("missing native identifier")
    record["_id"] = make_record_id(doc.source_slug, str(native_id))
    return _stamp_provenance(record)


def _parse_document(doc: RawSourceDocument, registry: SourceRegistry,
                    rules: list[MappingRule] | None) -> dict:
    if rules is not None:
        record = parse_structured_source(doc, rules)
    elif doc.format == FORMAT_XML:
        record = parse_sra_xml(doc)
    else:
        record = parse_generalist(doc, registry[doc.source_slug].name)
    entry = registry[doc.source_slug]
    provenance = record.setdefault("_provenance", {})
    if field_is_empty(record, "includedInDataCatalog"):
        record["includedInDataCatalog"] = {"name": entry.name}
        provenance["includedInDataCatalog"] = Stage.INGEST.value
    if field_is_empty(record, "conditionsOfAccess"):
        record["conditionsOfAccess"] = entry.access
        provenance["conditionsOfAccess"] = Stage.INGEST.value
    return record


def harvest_batch(input_dir: str | Path, source_slug: str, registry: SourceRegistry,
                  out_path: str | Path, rules: list[MappingRule] | None = None,
                  jobs: int | None = None) -> HarvestStats:
    """Parse every document under input_dir; valid records land in the corpus
    (canonicalized, sorted by _id), the rest are counted with reasons."""
    if source_slug not in registry:
        raise ValueError(f"unknown source slug: {source_slug}")
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise ValueError(f"not a readable directory: {input_dir}")
    if rules is not None:
        validate_rules(rules)
    files = sorted(p for p in input_dir.iterdir() if p.suffix in _SUFFIX_FORMATS)

    def load_and_parse(path: Path) -> tuple[Path, dict | None, str | None]:
        doc = RawSourceDocument(source_slug, path.stem, path.read_bytes(), _SUFFIX_FORMATS[path.suffix])
        try:
            return path, _parse_document(doc, registry, rules), None
        except ParseError as exc:
            return path, None, str(exc)

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(load_and_parse, files))
    else:
        results = [load_and_parse(path) for path in files]

    stats = HarvestStats()
    records: dict[str, dict] = {}
    for path, record, error in results:
        if error is not None:
            stats.rejected += 1
            stats.reject_reasons.append(f"{path.name}: {error}")
            continue
        report = validate_record(record)
        if not report.ok:
            stats.rejected += 1
            stats.reject_reasons.append(f"{path.name}: {report.errors[0]}")
            continue
        record = canonicalize_record(record)
        if record["_id"] in records:
            stats.rejected += 1
            stats.reject_reasons.append(f"{path.name}: duplicate _id {record['_id']}")
            continue
        records[record["_id"]] = record
        stats.parsed += 1
    write_corpus(records.values(), out_path)
    return stats
