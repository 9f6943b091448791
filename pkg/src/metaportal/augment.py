"""Staged metadata enrichment: organism standardization and host/pathogen
delineation, disease-ontology cascade mapping, citation-linked augmentation,
dictionary text mining, topic classification, and coverage reporting.

Stages only ever fill empty fields (standardization may rewrite ingest-time
raw values), so completeness is monotone and a second pipeline run is a
no-op.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import write_corpus
from .lexicons import (
    CorrectionsList,
    DISEASE_CASCADE,
    LexiconSet,
    OntologyLexicon,
    TaxonomyLexicon,
    lineage_contains,
    lookup_ontology_term,
    lookup_organism,
    normalize_term,
)
from .schema import (
    PIPELINE_STAGES,
    Stage,
    collapse_ws,
    field_is_empty,
    term_ref,
)
from .schema import set_field as write_field

logger = logging.getLogger(__name__)

HOST_CLADES = ("Vertebrata", "Arthropoda", "Viridiplantae")
BASE_PATHOGEN_CLADES = ("Bacteria", "Viruses")
# protozoa have no single clade; reviewed default list, extendable via config
DEFAULT_PROTOZOAN_CLADES = ("Apicomplexa", "Euglenozoa", "Fungi")

COVERAGE_FIELDS = ("species", "infectiousAgent", "healthCondition", "funding.identifier")


# -- organisms --------------------------------------------------------------

def standardize_organism(raw: dict, taxonomy: TaxonomyLexicon) -> dict:
    """Resolve a raw organism mention against the taxonomy; unresolved
    mentions pass through unchanged."""
    if raw.get("curie"):
        return raw
    entry = lookup_organism(taxonomy, raw.get("raw_text", ""))
    if entry is None:
        return raw
    return term_ref(
        raw.get("raw_text", ""),
        curie=f"NCBITaxon:{entry.taxid}",
        label=entry.scientific_name,
        synonyms=list(entry.synonyms),
        ontology="NCBITaxon",
        classification=raw.get("classification"),
    )


def delineate_host_pathogen(term: dict, taxonomy: TaxonomyLexicon, overrides: dict[int, str],
                            protozoan_clades: tuple[str, ...] = DEFAULT_PROTOZOAN_CLADES) -> str:
    """Classify a taxonomy-resolved organism as Host, Pathogen, or Ambiguous.

    The override table wins; otherwise vertebrates, arthropods, and plants
    are hosts, and bacteria, viruses, and the configured protozoan clades
    are pathogens.
    """
    curie = term.get("curie") or ""
    if not curie.startswith("NCBITaxon:"):
        raise ValueError(f"not a taxonomy term: {curie or term.get('raw_text')!r}")
    taxid = int(curie.split(":", 1)[1])
    entry = taxonomy.get(taxid)
    if entry is None:
        raise ValueError(f"unresolvable taxid: {taxid}")
    if taxid in overrides:
        return overrides[taxid]
    if any(lineage_contains(entry, clade) for clade in HOST_CLADES):
        return "Host"
    if any(lineage_contains(entry, clade) for clade in BASE_PATHOGEN_CLADES + tuple(protozoan_clades)):
        return "Pathogen"
    return "Ambiguous"


def _dedupe_terms(terms: list[dict]) -> list[dict]:
    seen: set[str] = set()
    out = []
    for ref in terms:
        key = ref.get("curie") or normalize_term(ref.get("raw_text", ""))
        if key not in seen:
            seen.add(key)
            out.append(ref)
    return out


def split_organism_field(record: dict, taxonomy: TaxonomyLexicon, overrides: dict[int, str]) -> dict:
    """Route mixed organism mentions: hosts stay in species, pathogens move
    to infectiousAgent. A species list that would become empty keeps its
    classified entries (completeness never decreases)."""
    species = record.get("species") or []
    if not species:
        return record
    kept, routed = [], []
    for ref in species:
        standardized = standardize_organism(ref, taxonomy)
        if standardized.get("curie", "").startswith("NCBITaxon:"):
            classification = delineate_host_pathogen(standardized, taxonomy, overrides)
            standardized = {**standardized, "classification": classification}
            if classification == "Pathogen":
                routed.append(standardized)
                continue
        kept.append(standardized)
    new_species = kept if kept else routed
    if new_species != species:
        record = write_field(record, "species", new_species, Stage.STANDARDIZE)
    if routed:
        merged = _dedupe_terms(list(record.get("infectiousAgent") or []) + routed)
        if merged != (record.get("infectiousAgent") or []):
            record = write_field(record, "infectiousAgent", merged, Stage.STANDARDIZE)
    return record


# -- diseases ---------------------------------------------------------------

def map_health_condition(raw: dict, diseases: OntologyLexicon,
                         cascade: tuple[str, ...] = DISEASE_CASCADE) -> dict:
    """First hit along the MONDO > HPO > DOID > NCIT cascade wins; misses
    pass through unchanged."""
    if raw.get("curie"):
        return raw
    text = raw.get("raw_text", "")
    for ontology in cascade:
        term = lookup_ontology_term(diseases, text, ontology)
        if term is not None:
            return term_ref(text, curie=term.curie, label=term.label,
                            synonyms=list(term.synonyms), ontology=term.ontology)
    return raw


# -- citation-linked augmentation --------------------------------------------

@dataclass
class PublicationAnnotations:
    pmid: str
    diseases: list[str] = dc_field(default_factory=list)
    organisms: list[str] = dc_field(default_factory=list)
    grants: list[str] = dc_field(default_factory=list)


def load_annotations_file(path: str | Path) -> PublicationAnnotations:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].strip():
        raise ValueError(f"{path}: first line must be the pmid")
    annotations = PublicationAnnotations(pmid=lines[0].strip())
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        kind, sep, surface = line.partition("\t")
        if not sep or not surface.strip():
            raise ValueError(f"{path}:{lineno}: expected 'kind<TAB>surface'")
        surface = surface.strip()
        if kind == "disease":
            annotations.diseases.append(surface)
        elif kind == "organism":
            annotations.organisms.append(surface)
        elif kind == "grant":
            annotations.grants.append(surface)
        else:
            raise ValueError(f"{path}:{lineno}: unknown annotation kind {kind!r}")
    return annotations


def load_annotations_dir(path: str | Path) -> dict[str, PublicationAnnotations]:
    annotations = {}
    for file in sorted(Path(path).glob("*.txt")):
        ann = load_annotations_file(file)
        annotations[ann.pmid] = ann
    return annotations


def _record_tokens(record: dict) -> list[str]:
    text = f"{record.get('name', '')} {record.get('description', '')}"
    return normalize_term(text).split()


def _phrase_at(tokens: list[str], needle: list[str]) -> bool:
    span = len(needle)
    if not span:
        return False
    return any(tokens[i : i + span] == needle for i in range(len(tokens) - span + 1))


def _mentioned(record_tokens: list[str], surface: str) -> bool:
    return _phrase_at(record_tokens, normalize_term(surface).split())


def _classify_organism(ref: dict, taxonomy: TaxonomyLexicon, overrides: dict[int, str],
                       corrections: CorrectionsList | None = None) -> tuple[str, dict] | None:
    """Standardize one organism mention and pick its destination field; None
    when the corrections list suppresses it."""
    standardized = standardize_organism(ref, taxonomy)
    target = "species"
    if standardized.get("curie", "").startswith("NCBITaxon:"):
        classification = delineate_host_pathogen(standardized, taxonomy, overrides)
        standardized = {**standardized, "classification": classification}
        if classification == "Pathogen":
            target = "infectiousAgent"
    if corrections is not None:
        surface = normalize_term(standardized.get("raw_text", ""))
        if corrections.is_suppressed(surface, target):
            return None
        remap = corrections.remap(surface, target)
        if remap and remap.startswith("NCBITaxon:"):
            entry = taxonomy.get(int(remap.split(":", 1)[1]))
            if entry is not None:
                standardized = term_ref(standardized.get("raw_text", ""), curie=remap,
                                        label=entry.scientific_name, synonyms=list(entry.synonyms),
                                        ontology="NCBITaxon",
                                        classification=standardized.get("classification"))
    return target, standardized


def _write_routed(record: dict, routed: dict[str, list[dict]], stage: Stage) -> dict:
    for target, refs in routed.items():
        if refs and field_is_empty(record, target):
            record = write_field(record, target, _dedupe_terms(refs), stage)
    return record


def augment_from_citation(record: dict, annotations: PublicationAnnotations,
                          lexicons: LexiconSet) -> dict:
    """Enrich a record from its linked publication's annotations. Disease and
    organism terms must occur in the record's own name or description; grant
    numbers are exempt from that filter."""
    pmids = {c.get("pmid") for c in record.get("citation") or []}
    if annotations.pmid not in pmids:
        logger.warning("annotations for pmid %s do not match record %s",
                       annotations.pmid, record.get("_id"))
        return record
    tokens = _record_tokens(record)
    surviving = [s for s in annotations.diseases if _mentioned(tokens, s)]
    if surviving and field_is_empty(record, "healthCondition"):
        mapped = _dedupe_terms([map_health_condition(term_ref(s), lexicons.diseases) for s in surviving])
        record = write_field(record, "healthCondition", mapped, Stage.CITATION)
    routed: dict[str, list[dict]] = {"species": [], "infectiousAgent": []}
    for surface in annotations.organisms:
        if _mentioned(tokens, surface):
            result = _classify_organism(term_ref(surface), lexicons.taxonomy, lexicons.overrides)
            if result is not None:
                routed[result[0]].append(result[1])
    record = _write_routed(record, routed, Stage.CITATION)
    if annotations.grants:
        record = write_field(record, "funding.identifier", list(annotations.grants), Stage.CITATION)
    return record


# -- dictionary text mining ---------------------------------------------------

class ConceptScanner:
    """Longest-non-overlapping dictionary scan over normalized tokens.

    The dictionary is every taxonomy name and disease label/synonym, plus
    corrected (remapped) surfaces; each normalized phrase knows which kinds
    of concept it can denote.
    """

    def __init__(self, lexicons: LexiconSet, corrections: CorrectionsList | None = None):
        self.phrases: dict[tuple[str, ...], set[str]] = {}
        for key in lexicons.taxonomy.name_keys():
            self._add(key, "organism")
        for ontology in DISEASE_CASCADE:
            for key in lexicons.diseases.name_keys(ontology):
                self._add(key, "disease")
        if corrections is not None:
            for surface, field_name in corrections.remapped:
                kind = "disease" if field_name == "healthCondition" else "organism"
                self._add(normalize_term(surface), kind)
        self.max_len = max((len(p) for p in self.phrases), default=0)

    def _add(self, normalized: str, kind: str) -> None:
        tokens = tuple(normalized.split())
        if tokens:
            self.phrases.setdefault(tokens, set()).add(kind)

    def scan(self, text: str) -> list[tuple[str, set[str]]]:
        """(surface, kinds) pairs, longest match first at each position."""
        original = collapse_ws(text.replace("-", " ").replace(".", " ").replace("_", " ")).split()
        normalized = [t.lower() for t in original]
        found = []
        i, n = 0, len(normalized)
        while i < n:
            matched = None
            for length in range(min(self.max_len, n - i), 0, -1):
                kinds = self.phrases.get(tuple(normalized[i : i + length]))
                if kinds:
                    matched = (" ".join(original[i : i + length]), kinds, length)
                    break
            if matched:
                found.append((matched[0], matched[1]))
                i += matched[2]
            else:
                i += 1
        return found


def extract_concepts(record: dict, lexicons: LexiconSet,
                     corrections: CorrectionsList | None = None,
                     scanner: ConceptScanner | None = None) -> dict:
    """Mine name+description for organisms and diseases; corrections suppress
    or remap surfaces; results fill empty fields only."""
    corrections = corrections or CorrectionsList()
    scanner = scanner or ConceptScanner(lexicons, corrections)
    text = f"{record.get('name', '')} {record.get('description', '')}"
    diseases: list[dict] = []
    routed: dict[str, list[dict]] = {"species": [], "infectiousAgent": []}
    for surface, kinds in scanner.scan(text):
        key = normalize_term(surface)
        if "disease" in kinds:
            if not corrections.is_suppressed(key, "healthCondition"):
                remap = corrections.remap(key, "healthCondition")
                if remap:
                    term = lexicons.diseases.get(remap)
                    mapped = (term_ref(surface, curie=remap, label=term.label,
                                       synonyms=list(term.synonyms), ontology=term.ontology)
                              if term else term_ref(surface, curie=remap, label=surface,
                                                    ontology=remap.split(":")[0]))
                else:
                    mapped = map_health_condition(term_ref(surface), lexicons.diseases)
                if mapped.get("curie"):
                    diseases.append(mapped)
        if "organism" in kinds:
            result = _classify_organism(term_ref(surface), lexicons.taxonomy,
                                        lexicons.overrides, corrections)
            if result is not None:
                routed[result[0]].append(result[1])
    record = _write_routed(record, routed, Stage.TEXT_MINING)
    if diseases and field_is_empty(record, "healthCondition"):
        record = write_field(record, "healthCondition", _dedupe_terms(diseases), Stage.TEXT_MINING)
    return record


# -- topic classification ------------------------------------------------------

DEFAULT_TOPIC_RULES = {
    "rna seq": "EDAM:topic_3308",
    "rnaseq": "EDAM:topic_3308",
    "scrna seq": "EDAM:topic_3308",
    "single cell rna seq": "EDAM:topic_3308",
    "expression profiling by high throughput sequencing": "EDAM:topic_3308",
    "mass spectrometry": "EDAM:topic_0121",
    "proteomic profiling": "EDAM:topic_0121",
    "elisa": "EDAM:topic_0804",
    "flow cytometry": "EDAM:topic_0804",
    "immunophenotyping": "EDAM:topic_0804",
    "cytof": "EDAM:topic_0804",
    "wgs": "EDAM:topic_3168",
    "whole genome sequencing": "EDAM:topic_3168",
    "amplicon sequencing": "EDAM:topic_3168",
    "16s rrna sequencing": "EDAM:topic_3174",
    "shotgun metagenomic sequencing": "EDAM:topic_3174",
    "microbiome": "EDAM:topic_3174",
}


class KeywordTopicClassifier:
    """Deterministic default: keyword and technique phrases hit a rule table,
    then the topic ontology's labels and synonyms."""

    def __init__(self, edam: OntologyLexicon, rules: dict[str, str] | None = None):
        self.edam = edam
        self.rules = DEFAULT_TOPIC_RULES if rules is None else rules

    def _candidates(self, record: dict) -> list[str]:
        candidates = list(record.get("keywords") or [])
        for ref in record.get("measurementTechnique") or []:
            candidates.extend(filter(None, [ref.get("raw_text"), ref.get("label")]))
            candidates.extend(ref.get("synonyms") or [])
        return candidates

    def classify(self, record: dict) -> list[dict]:
        topics: dict[str, dict] = {}
        for candidate in self._candidates(record):
            curie = self.rules.get(normalize_term(candidate))
            term = self.edam.get(curie) if curie else lookup_ontology_term(self.edam, candidate, "EDAM")
            if term is not None:
                topics.setdefault(term.curie, term_ref(candidate, curie=term.curie, label=term.label,
                                                       synonyms=list(term.synonyms), ontology="EDAM"))
        return [topics[curie] for curie in sorted(topics)]


def classify_topics(record: dict, classifier) -> dict:
    """Fill topicCategory from the pluggable classifier; classifier failures
    leave the record unchanged."""
    if not field_is_empty(record, "topicCategory"):
        return record
    try:
        topics = classifier.classify(record)
    except Exception:
        logger.warning("topic classifier failed for %s", record.get("_id"), exc_info=True)
        return record
    if topics:
        record = write_field(record, "topicCategory", topics, Stage.TOPICS)
    return record


# -- hierarchical agreement -----------------------------------------------------

def _pair_credit(a: str, b: str, edam: OntologyLexicon) -> float:
    if a == b:
        return 1.0
    down = edam.ancestor_distance(a, b)
    up = edam.ancestor_distance(b, a)
    distances = [d for d in (down, up) if d is not None]
    return 1.0 / (1.0 + min(distances)) if distances else 0.0


def hierarchical_agreement(predicted: set[str], gold: set[str], edam: OntologyLexicon) -> float:
    """Set agreement with partial credit 1/(1+d) for ancestor pairs at DAG
    distance d, over the optimal one-to-one matching, scaled by the larger
    set's size. Symmetric; 1.0 on identical sets; exact-match ratio when the
    ontology is flat."""
    pred, gold_list = sorted(predicted), sorted(gold)
    for curie in (*pred, *gold_list):
        if edam.get(curie) is None:
            raise ValueError(f"unresolved curie: {curie}")
    if not pred and not gold_list:
        return 1.0
    if not pred or not gold_list:
        return 0.0
    credit = np.array([[_pair_credit(p, g, edam) for g in gold_list] for p in pred])
    rows, cols = linear_sum_assignment(credit, maximize=True)
    total = credit[rows, cols].sum()
    return float(total / max(len(pred), len(gold_list)))


# -- coverage reporting ----------------------------------------------------------

@dataclass
class CoverageReport:
    stages: list[str] = dc_field(default_factory=list)
    total_records: dict[str, int] = dc_field(default_factory=dict)
    records_with: dict[str, dict[str, int]] = dc_field(
        default_factory=lambda: {f: {} for f in COVERAGE_FIELDS})
    distinct_values: dict[str, dict[str, int]] = dc_field(
        default_factory=lambda: {f: {} for f in COVERAGE_FIELDS})

    def add_column(self, stage: str, records: list[dict]) -> None:
        self.stages.append(stage)
        self.total_records[stage] = len(records)
        for field_name in COVERAGE_FIELDS:
            filled = 0
            distinct: set[str] = set()
            for record in records:
                if field_is_empty(record, field_name):
                    continue
                filled += 1
                distinct.update(_distinct_keys(record, field_name))
            self.records_with[field_name][stage] = filled
            self.distinct_values[field_name][stage] = len(distinct)

    def to_tsv(self) -> str:
        lines = ["\t".join(["# of records with", *self.stages])]
        for field_name in COVERAGE_FIELDS:
            row = self.records_with[field_name]
            lines.append("\t".join([field_name, *(str(row[s]) for s in self.stages)]))
        lines.append("\t".join(["total_records", *(str(self.total_records[s]) for s in self.stages)]))
        lines.append("")
        lines.append("\t".join(["# of different", *self.stages]))
        for field_name in COVERAGE_FIELDS:
            row = self.distinct_values[field_name]
            lines.append("\t".join([field_name, *(str(row[s]) for s in self.stages)]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> "CoverageReport":
        blocks = text.strip().split("\n\n")
        if len(blocks) != 2:
            raise ValueError("expected two coverage blocks")
        report = cls()
        head_rows = [line.split("\t") for line in blocks[0].splitlines()]
        report.stages = head_rows[0][1:]
        for row in head_rows[1:]:
            values = dict(zip(report.stages, map(int, row[1:])))
            if row[0] == "total_records":
                report.total_records = values
            else:
                report.records_with[row[0]] = values
        for row in (line.split("\t") for line in blocks[1].splitlines()[1:]):
            report.distinct_values[row[0]] = dict(zip(report.stages, map(int, row[1:])))
        return report


def _distinct_keys(record: dict, field_name: str) -> set[str]:
    if field_name == "funding.identifier":
        return {collapse_ws(e["identifier"]) for e in record.get("funding", []) if e.get("identifier")}
    keys = set()
    for ref in record.get(field_name) or []:
        key = ref.get("curie") or normalize_term(ref.get("raw_text", ""))
        if key:
            keys.add(key)
    return keys


def coverage_column(records: list[dict], stage: str = "current") -> CoverageReport:
    report = CoverageReport()
    report.add_column(stage, records)
    return report


# -- pipeline -------------------------------------------------------------------

def check_stage_order(stages: list[Stage]) -> None:
    ranks = [s.rank for s in stages]
    if len(set(ranks)) != len(ranks) or ranks != sorted(ranks):
        raise ValueError("stages must follow the pipeline order without repeats")


def _standardize_record(record: dict, lexicons: LexiconSet) -> dict:
    record = split_organism_field(record, lexicons.taxonomy, lexicons.overrides)
    agents = record.get("infectiousAgent") or []
    standardized_agents = []
    for ref in agents:
        standardized = standardize_organism(ref, lexicons.taxonomy)
        if standardized.get("curie", "").startswith("NCBITaxon:") and not standardized.get("classification"):
            classification = delineate_host_pathogen(standardized, lexicons.taxonomy, lexicons.overrides)
            standardized = {**standardized, "classification": classification}
        standardized_agents.append(standardized)
    if standardized_agents != agents:
        record = write_field(record, "infectiousAgent", standardized_agents, Stage.STANDARDIZE)
    conditions = record.get("healthCondition") or []
    mapped = [map_health_condition(ref, lexicons.diseases) for ref in conditions]
    if mapped != conditions:
        record = write_field(record, "healthCondition", mapped, Stage.STANDARDIZE)
    return record


def run_pipeline(records: list[dict], stages: list[Stage], lexicons: LexiconSet | None = None,
                 annotations: dict[str, PublicationAnnotations] | None = None,
                 corrections: CorrectionsList | None = None,
                 classifier=None) -> tuple[list[dict], CoverageReport]:
    """Apply the requested stages in order to every record; returns the
    enriched corpus (sorted by _id) and the per-stage coverage report."""
    check_stage_order(stages)
    if any(s in (Stage.STANDARDIZE, Stage.TEXT_MINING, Stage.TOPICS) for s in stages) and lexicons is None:
        raise ValueError("lexicons are required for the requested stages")
    if Stage.CITATION in stages and annotations is None:
        raise ValueError("annotations are required for the citation stage")
    if Stage.TOPICS in stages and classifier is None:
        classifier = KeywordTopicClassifier(lexicons.edam)
    records = sorted(records, key=lambda r: r.get("_id", ""))
    report = CoverageReport()
    report.add_column(Stage.INGEST.value, records)
    scanner = None
    for stage in stages:
        if stage is Stage.STANDARDIZE:
            records = [_standardize_record(r, lexicons) for r in records]
        elif stage is Stage.CITATION:
            out = []
            for record in records:
                for citation in record.get("citation") or []:
                    ann = annotations.get(citation.get("pmid", ""))
                    if ann is not None:
                        record = augment_from_citation(record, ann, lexicons)
                out.append(record)
            records = out
        elif stage is Stage.TEXT_MINING:
            if scanner is None:
                scanner = ConceptScanner(lexicons, corrections)
            records = [extract_concepts(r, lexicons, corrections, scanner) for r in records]
        elif stage is Stage.TOPICS:
            records = [classify_topics(r, classifier) for r in records]
        report.add_column(stage.value, records)
    return records, report


def run_pipeline_files(in_path, out_path, stages, lexicons, annotations=None,
                       corrections=None, classifier=None, report_path=None):
    from .corpus import load_corpus

    records, report = run_pipeline(load_corpus(in_path), stages, lexicons, annotations,
                                   corrections, classifier)
    write_corpus(records, out_path)
    if report_path:
        Path(report_path).write_text(report.to_tsv(), encoding="utf-8")
    return report
