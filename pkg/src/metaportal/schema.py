"""Harmonized dataset record model: schema registry, validation, canonicalization.

A record is a plain dict using the schema's exact field names, so it
round-trips through NDJSON without translation. Empty fields are simply
absent. ``_provenance`` maps field name -> the pipeline stage that wrote it.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field as dc_field
from datetime import date
from urllib.parse import urlsplit

CURIE_RE = re.compile(r"^[A-Za-z]+:[A-Za-z0-9._-]+$")
GRANT_RE = re.compile(r"^[A-Z0-9]{3}[A-Z]{2}[0-9]{6}")
DATE_RE = re.compile(r"^(\d{4})(?:-(\d{2}))?(?:-(\d{2}))?$")

ONTOLOGIES = ("NCBITaxon", "MONDO", "HPO", "DOID", "NCIT", "EDAM")
CLASSIFICATIONS = ("Host", "Pathogen", "Ambiguous")
ACCESS_LEVELS = ("Open", "Registered", "Controlled", "Varied", "Unknown")


class Stage(str, enum.Enum):
    """Pipeline stage that wrote a field value; ordered by pipeline position."""

    INGEST = "ingest"
    STANDARDIZE = "standardize"
    CITATION = "citation"
    TEXT_MINING = "textmine"
    TOPICS = "topics"

    @property
    def rank(self) -> int:
        return _STAGE_ORDER.index(self)


_STAGE_ORDER = [Stage.INGEST, Stage.STANDARDIZE, Stage.CITATION, Stage.TEXT_MINING, Stage.TOPICS]

# Stages selectable on the command line, excluding the implicit ingest baseline.
PIPELINE_STAGES = _STAGE_ORDER[1:]


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: str
    tier: str  # required | recommended | optional | internal


def _specs(tier: str, kind: str, *names: str) -> list[FieldSpec]:
    return [FieldSpec(n, kind, tier) for n in names]


FIELDS: dict[str, FieldSpec] = {
    s.name: s
    for s in (
        _specs("required", "text", "name", "description", "identifier")
        + _specs("required", "url", "url")
        + _specs("required", "catalog", "includedInDataCatalog")
        + _specs("recommended", "person_list", "author")
        + _specs("recommended", "funding_list", "funding")
        + _specs("recommended", "term_list", "measurementTechnique", "healthCondition", "infectiousAgent", "species")
        + _specs("recommended", "distribution_list", "distribution")
        + _specs("recommended", "text_list", "variableMeasured", "keywords")
        + _specs("recommended", "text", "doi", "license", "usageInfo")
        + _specs("recommended", "temporal", "temporalCoverage")
        + _specs("recommended", "place_list", "spatialCoverage")
        + _specs("recommended", "access", "conditionsOfAccess")
        + _specs("recommended", "org", "sdPublisher")
        + _specs("recommended", "date", "dateCreated", "dateModified", "datePublished")
        + _specs("recommended", "citation_list", "citation")
        + _specs("recommended", "ref_list", "isBasedOn", "citedBy")
        + _specs("optional", "ref_list", "hasPart", "isPartOf", "isRelatedTo", "isSimilarTo", "sameAs", "isBasisFor")
        + _specs("optional", "text", "nctid", "version", "abstract")
        + _specs("optional", "bool", "isAccessibleForFree")
        + _specs("optional", "org_list", "sourceOrganization")
        + _specs("optional", "term_list", "topicCategory")
        + _specs("internal", "text", "_id")
        + _specs("internal", "provenance", "_provenance")
    )
}

REQUIRED_FIELDS = [n for n, s in FIELDS.items() if s.tier == "required"] + ["_id"]
RECOMMENDED_FIELDS = [n for n, s in FIELDS.items() if s.tier == "recommended"]
TERM_LIST_FIELDS = [n for n, s in FIELDS.items() if s.kind == "term_list"]

# Flattened query paths per field kind: (suffix, value type). The advanced
# query language addresses records through these dotted paths.
_KIND_PATHS: dict[str, list[tuple[str, str]]] = {
    "text": [("", "text")],
    "url": [("", "text")],
    "text_list": [("", "text")],
    "date": [("", "date")],
    "bool": [("", "text")],
    "access": [("", "text")],
    "term_list": [("", "text")],
    "person_list": [(".name", "text"), (".affiliation", "text")],
    "funding_list": [(".identifier", "text"), (".funder.name", "text")],
    "catalog": [(".name", "text")],
    "distribution_list": [(".contentUrl", "text"), (".encodingFormat", "text"), (".dateModified", "date")],
    "temporal": [(".start", "date"), (".end", "date")],
    "place_list": [(".name", "text")],
    "org": [(".name", "text")],
    "org_list": [(".name", "text")],
    "citation_list": [(".pmid", "text"), (".doi", "text"), (".name", "text")],
    "ref_list": [(".identifier", "text")],
}

QUERY_FIELDS: dict[str, str] = {
    spec.name + suffix: value_type
    for spec in FIELDS.values()
    if spec.tier != "internal"
    for suffix, value_type in _KIND_PATHS[spec.kind]
}

DATE_QUERY_FIELDS = frozenset(p for p, t in QUERY_FIELDS.items() if t == "date")

# Fields searched by fieldless (free-text) terms, with BM25 boosts.
FULLTEXT_FIELDS = (
    "name",
    "description",
    "abstract",
    "keywords",
    "variableMeasured",
    "measurementTechnique",
    "healthCondition",
    "infectiousAgent",
    "species",
    "topicCategory",
)
FIELD_BOOSTS = {"name": 3.0, "keywords": 2.0}

FACET_FIELDS = (
    "species.label",
    "infectiousAgent.label",
    "healthCondition.label",
    "measurementTechnique.label",
    "includedInDataCatalog.name",
    "conditionsOfAccess",
    "topicCategory.label",
    "funding.identifier",
    "dateCreated",
    "dateModified",
    "datePublished",
    "temporalCoverage.start",
    "temporalCoverage.end",
)


def term_ref(raw_text: str, curie: str | None = None, label: str | None = None,
             synonyms: list[str] | None = None, ontology: str | None = None,
             classification: str | None = None) -> dict:
    """Build a TermRef dict, omitting unset parts."""
    ref: dict = {"raw_text": raw_text}
    if curie:
        ref["curie"] = curie
    if label:
        ref["label"] = label
    if synonyms:
        ref["synonyms"] = list(synonyms)
    if ontology:
        ref["ontology"] = ontology
    if classification:
        ref["classification"] = classification
    return ref


def collapse_ws(text: str) -> str:
    return " ".join(text.split())


def normalize_date(value: str) -> str:
    """Normalize a (possibly partial) date to YYYY-MM-DD.

    Accepts YYYY, YYYY-MM, YYYY-MM-DD, and timestamp strings with a leading
    date part; partial dates are zero-padded to the first day. Raises
    ValueError for anything that is not a valid calendar date.
    """
    value = value.strip()
    if "T" in value:
        value = value.split("T", 1)[0]
    m = DATE_RE.match(value)
    if not m:
        raise ValueError(f"invalid date: {value!r}")
    year, month, day = int(m.group(1)), int(m.group(2) or 1), int(m.group(3) or 1)
    try:
        return date(year, month, day).isoformat()
    except ValueError:
        raise ValueError(f"invalid date: {value!r}") from None


def is_calendar_date(value) -> bool:
    if not isinstance(value, str) or not re.match(r"^\d{4}-\d{2}-\d{2}$", value):
        return False
    try:
        date.fromisoformat(value)
        return True
    except ValueError:
        return False


def make_record_id(source_slug: str, native_id: str) -> str:
    """Build the ``<slug>_<native_id>`` corpus key; reversible even when the
    native id itself contains underscores."""
    encoded = native_id.replace("%", "%25").replace("_", "%5F")
    return f"{source_slug}_{encoded}"


def split_record_id(record_id: str) -> tuple[str, str]:
    slug, _, encoded = record_id.partition("_")
    return slug, encoded.replace("%5F", "_").replace("%25", "%")


def field_is_empty(record: dict, field: str) -> bool:
    """True when a field (or the ``funding.identifier`` virtual path) holds no value."""
    if field == "funding.identifier":
        return not any(entry.get("identifier") for entry in record.get("funding", []))
    value = record.get(field)
    if isinstance(value, bool):
        return False
    return not value


@dataclass
class ValidationReport:
    errors: list[str] = dc_field(default_factory=list)
    warnings: list[str] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _check_text(report: ValidationReport, path: str, value) -> None:
    if not isinstance(value, str):
        report.errors.append(f"{path}: expected text")


def _check_date(report: ValidationReport, path: str, value) -> None:
    if not is_calendar_date(value):
        report.errors.append(f"{path}: invalid ISO-8601")


def _check_term(report: ValidationReport, path: str, ref) -> None:
    if not isinstance(ref, dict):
        report.errors.append(f"{path}: expected term object")
        return
    curie = ref.get("curie")
    if curie is not None and not CURIE_RE.match(str(curie)):
        report.errors.append(f"{path}: invalid curie")
    if curie and not ref.get("label"):
        report.errors.append(f"{path}: curie without label")
    ontology = ref.get("ontology")
    if bool(ontology) != bool(curie):
        report.errors.append(f"{path}: ontology present iff curie present")
    if ontology and ontology not in ONTOLOGIES:
        report.errors.append(f"{path}: unknown ontology")
    classification = ref.get("classification")
    if classification and classification not in CLASSIFICATIONS:
        report.errors.append(f"{path}: unknown classification")


def _check_obj_list(report: ValidationReport, field: str, value, checker) -> None:
    if not isinstance(value, list):
        report.errors.append(f"{field}: expected list")
        return
    for i, entry in enumerate(value):
        checker(f"{field}[{i}]", entry)


def validate_record(record: dict) -> ValidationReport:
    """Check a record against the schema; problems become report entries, never raises."""
    report = ValidationReport()
    if not isinstance(record, dict):
        report.errors.append("record: expected object")
        return report

    for key in record:
        if key not in FIELDS:
            report.errors.append(f"{key}: unknown field")

    for name in REQUIRED_FIELDS:
        if field_is_empty(record, name):
            report.errors.append(f"{name}: required, empty")
    for name in RECOMMENDED_FIELDS:
        if name not in record or field_is_empty(record, name):
            report.warnings.append(f"{name} missing")

    for name, value in record.items():
        spec = FIELDS.get(name)
        if spec is None or value in (None, "", [], {}):
            continue
        kind = spec.kind
        if kind in ("text", "date"):
            _check_text(report, name, value)
            if kind == "date" and isinstance(value, str):
                _check_date(report, name, value)
        elif kind == "url":
            _check_text(report, name, value)
            if isinstance(value, str):
                parts = urlsplit(value)
                if parts.scheme not in ("http", "https", "ftp") or not parts.netloc:
                    report.errors.append(f"{name}: not an absolute URL")
        elif kind == "text_list":
            if not isinstance(value, list):
                report.errors.append(f"{name}: expected list")
            else:
                for i, item in enumerate(value):
                    _check_text(report, f"{name}[{i}]", item)
        elif kind == "bool":
            if not isinstance(value, bool):
                report.errors.append(f"{name}: expected boolean")
        elif kind == "access":
            if value not in ACCESS_LEVELS:
                report.errors.append(f"{name}: unknown value")
        elif kind == "term_list":
            _check_obj_list(report, name, value, lambda p, e: _check_term(report, p, e))
        elif kind == "person_list":
            def check_person(path, entry):
                if not isinstance(entry, dict) or not entry.get("name"):
                    report.errors.append(f"{path}: missing name")
            _check_obj_list(report, name, value, check_person)
        elif kind == "funding_list":
            def check_funding(path, entry):
                if not isinstance(entry, dict):
                    report.errors.append(f"{path}: expected object")
                    return
                grant = entry.get("identifier")
                if grant and not GRANT_RE.match(grant):
                    report.warnings.append(f"funding.identifier {grant!r}: not a grant-number pattern")
            _check_obj_list(report, name, value, check_funding)
        elif kind == "catalog":
            if not isinstance(value, dict) or not value.get("name"):
                report.errors.append(f"{name}: missing name")
        elif kind == "distribution_list":
            def check_dist(path, entry):
                if not isinstance(entry, dict):
                    report.errors.append(f"{path}: expected object")
                    return
                if entry.get("dateModified"):
                    _check_date(report, f"{path}.dateModified", entry["dateModified"])
            _check_obj_list(report, name, value, check_dist)
        elif kind == "temporal":
            if not isinstance(value, dict):
                report.errors.append(f"{name}: expected object")
            else:
                for part in ("start", "end"):
                    if value.get(part):
                        _check_date(report, f"{name}.{part}", value[part])
                start, end = value.get("start"), value.get("end")
                if is_calendar_date(start) and is_calendar_date(end) and start > end:
                    report.errors.append(f"{name}: start after end")
        elif kind in ("place_list", "org_list"):
            def check_named(path, entry):
                if not isinstance(entry, dict) or not entry.get("name"):
                    report.errors.append(f"{path}: missing name")
            _check_obj_list(report, name, value, check_named)
        elif kind == "org":
            if not isinstance(value, dict) or not value.get("name"):
                report.errors.append(f"{name}: missing name")
        elif kind == "citation_list":
            def check_citation(path, entry):
                if not isinstance(entry, dict):
                    report.errors.append(f"{path}: expected object")
            _check_obj_list(report, name, value, check_citation)
        elif kind == "ref_list":
            def check_ref(path, entry):
                if not isinstance(entry, dict) or not entry.get("identifier"):
                    report.errors.append(f"{path}: missing identifier")
            _check_obj_list(report, name, value, check_ref)
        elif kind == "provenance":
            if not isinstance(value, dict):
                report.errors.append(f"{name}: expected object")
            else:
                stage_tokens = {s.value for s in Stage}
                for fld, stage in value.items():
                    if fld not in FIELDS and fld != "funding.identifier":
                        report.errors.append(f"_provenance.{fld}: unknown field")
                    if stage not in stage_tokens:
                        report.errors.append(f"_provenance.{fld}: unknown stage")
    return report


def _canonical_value(kind: str, value):
    if kind in ("text", "url", "date"):
        return collapse_ws(value) if isinstance(value, str) else value
    if kind == "text_list":
        return [collapse_ws(v) if isinstance(v, str) else v for v in value]
    if kind == "term_list":
        out = []
        for ref in value:
            ref = dict(ref)
            for key in ("raw_text", "curie", "label", "ontology", "classification"):
                if isinstance(ref.get(key), str):
                    ref[key] = collapse_ws(ref[key])
            if isinstance(ref.get("synonyms"), list):
                ref["synonyms"] = [collapse_ws(s) if isinstance(s, str) else s for s in ref["synonyms"]]
            out.append(ref)
        return out
    if kind in ("catalog", "org", "temporal"):
        return {k: collapse_ws(v) if isinstance(v, str) else v for k, v in value.items()}
    if kind in ("person_list", "funding_list", "distribution_list", "place_list",
                "org_list", "citation_list", "ref_list"):
        out = []
        for entry in value:
            entry = dict(entry)
            for k, v in entry.items():
                if isinstance(v, str):
                    entry[k] = collapse_ws(v)
                elif isinstance(v, dict):
                    entry[k] = {kk: collapse_ws(vv) if isinstance(vv, str) else vv for kk, vv in v.items()}
            out.append(entry)
        return out
    return value


def canonicalize_record(record: dict) -> dict:
    """Return the whitespace-normalized, keyword-deduplicated form of a valid record.

    Idempotent; rejects records that do not validate cleanly.
    """
    report = validate_record(record)
    if not report.ok:
        raise ValueError(f"cannot canonicalize invalid record: {report.errors[0]}")
    out = {}
    for name, value in record.items():
        spec = FIELDS[name]
        value = _canonical_value(spec.kind, value)
        if name == "keywords":
            seen: set[str] = set()
            deduped = []
            for kw in value:
                key = kw.lower()
                if key not in seen:
                    seen.add(key)
                    deduped.append(kw)
            value = deduped
        if isinstance(value, bool) or value not in (None, "", [], {}):
            out[name] = value
    return out


def _write_funding_identifiers(record: dict, grants: list[str]) -> dict:
    funding = [dict(entry) for entry in record.get("funding", [])]
    existing = {entry.get("identifier") for entry in funding}
    funding.extend({"identifier": g} for g in grants if g not in existing)
    record["funding"] = funding
    return record


def set_field(record: dict, field: str, value, stage: Stage) -> dict:
    """Write a field at a pipeline stage without ever reducing completeness.

    Empty fields accept any stage; a non-empty field is only rewritten by the
    standardization stage replacing an ingest-time value (synonym merging).
    Returns a new record; the input is not modified.
    """
    if field not in FIELDS and field != "funding.identifier":
        raise ValueError(f"unknown field: {field}")
    is_empty_value = not isinstance(value, bool) and not value
    if is_empty_value:
        return record
    provenance = dict(record.get("_provenance", {}))
    current_stage = provenance.get(field, Stage.INGEST.value)
    if not field_is_empty(record, field):
        standardize_rewrite = stage is Stage.STANDARDIZE and current_stage == Stage.INGEST.value
        if not standardize_rewrite:
            return record
    out = dict(record)
    if field == "funding.identifier":
        _write_funding_identifiers(out, list(value))
    else:
        out[field] = value
    provenance[field] = stage.value
    out["_provenance"] = provenance
    return out
