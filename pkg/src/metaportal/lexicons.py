"""Bundled reference vocabularies: taxonomy with lineages, ontology subsets,
host/pathogen overrides, and the corrections list.

All lexicons are immutable after load; lookups are exact over normalized
strings (no fuzzy matching).
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

_PUNCT = re.compile(r"[-._]+")
_WS = re.compile(r"\s+")

TAXONOMY_HEADER = ["taxid", "scientific_name", "rank", "lineage", "synonyms"]
ONTOLOGY_HEADER = ["curie", "label", "ontology", "parents", "synonyms"]
CORRECTIONS_HEADER = ["surface_text", "field", "action", "curie"]
OVERRIDES_HEADER = ["taxid", "classification"]

DISEASE_CASCADE = ("MONDO", "HPO", "DOID", "NCIT")


class LexiconError(ValueError):
    """Malformed lexicon file."""


def normalize_term(text: str) -> str:
    """Case- and punctuation-insensitive key: hyphens, periods, and
    underscores become spaces, runs of whitespace collapse."""
    return _WS.sub(" ", _PUNCT.sub(" ", text.lower())).strip()


@dataclass(frozen=True)
class TaxonEntry:
    taxid: int
    scientific_name: str
    rank: str
    lineage: tuple[tuple[int, str], ...]  # root-to-parent (taxid, name) pairs
    common_names: tuple[str, ...] = ()
    synonyms: tuple[str, ...] = ()

    def all_names(self) -> list[str]:
        return [self.scientific_name, *self.common_names, *self.synonyms]


def _read_rows(path: str | Path, header: list[str]) -> list[tuple[int, list[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0].split("\t") != header:
        raise LexiconError(f"{path}: expected header {chr(9).join(header)!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) > len(header):
            raise LexiconError(f"{path}:{lineno}: expected {len(header)} columns, got {len(cols)}")
        # editors commonly strip trailing tabs; treat absent trailing columns as empty
        cols += [""] * (len(header) - len(cols))
        rows.append((lineno, cols))
    return rows


class TaxonomyLexicon:
    def __init__(self, entries: dict[int, TaxonEntry], warnings: list[str]):
        self.entries = entries
        self.warnings = warnings
        self._by_name: dict[str, int] = {}
        for taxid in sorted(entries):
            for name in entries[taxid].all_names():
                key = normalize_term(name)
                if not key:
                    continue
                if key in self._by_name:
                    if self._by_name[key] != taxid:
                        warnings.append(
                            f"name {name!r} maps to taxids {self._by_name[key]} and {taxid};"
                            f" keeping {min(self._by_name[key], taxid)}"
                        )
                        self._by_name[key] = min(self._by_name[key], taxid)
                else:
                    self._by_name[key] = taxid

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, taxid: int) -> TaxonEntry | None:
        return self.entries.get(taxid)

    def find(self, text: str) -> TaxonEntry | None:
        taxid = self._by_name.get(normalize_term(text))
        return self.entries.get(taxid) if taxid is not None else None

    def name_keys(self) -> dict[str, int]:
        return dict(self._by_name)


def load_taxonomy(path: str | Path) -> TaxonomyLexicon:
    """Load the tab-separated taxonomy snapshot; builds the normalized
    name index over scientific names and synonyms."""
    entries: dict[int, TaxonEntry] = {}
    warnings: list[str] = []
    for lineno, cols in _read_rows(path, TAXONOMY_HEADER):
        raw_taxid, name, rank, lineage_col, synonyms_col = cols
        if not raw_taxid.isdigit() or int(raw_taxid) <= 0:
            raise LexiconError(f"{path}:{lineno}: taxid must be a positive integer, got {raw_taxid!r}")
        taxid = int(raw_taxid)
        if taxid in entries:
            raise LexiconError(f"{path}:{lineno}: duplicate taxid {taxid}")
        lineage = []
        for node in filter(None, lineage_col.split("|")):
            node_id, _, node_name = node.partition(":")
            if not node_id.isdigit() or not node_name:
                raise LexiconError(f"{path}:{lineno}: bad lineage node {node!r}")
            lineage.append((int(node_id), node_name))
        synonyms = tuple(s for s in synonyms_col.split("|") if s)
        entries[taxid] = TaxonEntry(taxid, name, rank, tuple(lineage), (), synonyms)
    return TaxonomyLexicon(entries, warnings)


def lookup_organism(lexicon: TaxonomyLexicon, text: str) -> TaxonEntry | None:
    """Exact normalized-name match against the taxonomy; None when absent."""
    if not text or not text.strip():
        return None
    return lexicon.find(text)


def lineage_contains(entry: TaxonEntry, group_name: str) -> bool:
    wanted = group_name.lower()
    return any(name.lower() == wanted for _, name in entry.lineage)


@dataclass(frozen=True)
class OntologyTerm:
    curie: str
    label: str
    ontology: str
    parents: tuple[str, ...] = ()
    synonyms: tuple[str, ...] = ()


class OntologyLexicon:
    """One or more ontology subsets with a shared normalized-name index."""

    def __init__(self):
        self.terms: dict[str, OntologyTerm] = {}
        self.warnings: list[str] = []
        # (ontology, normalized name) -> sorted curies
        self._by_name: dict[tuple[str, str], list[str]] = {}

    def add(self, term: OntologyTerm) -> None:
        self.terms[term.curie] = term
        for name in (term.label, *term.synonyms):
            key = (term.ontology, normalize_term(name))
            bucket = self._by_name.setdefault(key, [])
            if term.curie not in bucket:
                bucket.append(term.curie)
                bucket.sort()

    def check_parents(self) -> None:
        for term in self.terms.values():
            for parent in term.parents:
                if parent not in self.terms:
                    self.warnings.append(f"{term.curie}: dangling parent {parent}")

    def ontologies(self) -> set[str]:
        return {t.ontology for t in self.terms.values()}

    def get(self, curie: str) -> OntologyTerm | None:
        return self.terms.get(curie)

    def find(self, text: str, ontology: str) -> OntologyTerm | None:
        bucket = self._by_name.get((ontology, normalize_term(text)))
        return self.terms[bucket[0]] if bucket else None

    def name_keys(self, ontology: str | None = None) -> list[str]:
        return [name for (onto, name) in self._by_name if ontology is None or onto == ontology]

    def ancestor_distance(self, descendant: str, ancestor: str) -> int | None:
        """Minimal number of parent edges from descendant up to ancestor, or None."""
        if descendant not in self.terms or ancestor not in self.terms:
            raise KeyError(f"unknown curie: {descendant if descendant not in self.terms else ancestor}")
        if descendant == ancestor:
            return 0
        seen = {descendant}
        queue = deque([(descendant, 0)])
        while queue:
            curie, dist = queue.popleft()
            for parent in self.terms[curie].parents:
                if parent == ancestor:
                    return dist + 1
                if parent in self.terms and parent not in seen:
                    seen.add(parent)
                    queue.append((parent, dist + 1))
        return None


def load_ontology(path: str | Path, into: OntologyLexicon | None = None) -> OntologyLexicon:
    lexicon = into or OntologyLexicon()
    for lineno, cols in _read_rows(path, ONTOLOGY_HEADER):
        curie, label, ontology, parents_col, synonyms_col = cols
        if ":" not in curie:
            raise LexiconError(f"{path}:{lineno}: bad curie {curie!r}")
        if not label:
            raise LexiconError(f"{path}:{lineno}: empty label for {curie}")
        parents = tuple(p for p in parents_col.split("|") if p)
        synonyms = tuple(s for s in synonyms_col.split("|") if s)
        lexicon.add(OntologyTerm(curie, label, ontology, parents, synonyms))
    lexicon.check_parents()
    return lexicon


def lookup_ontology_term(lexicon: OntologyLexicon, text: str, ontology: str) -> OntologyTerm | None:
    """Exact normalized match over labels and synonyms; ties break to the
    lexicographically smallest curie."""
    if not text or not text.strip():
        return None
    return lexicon.find(text, ontology)


@dataclass
class CorrectionsList:
    suppressed: set[tuple[str, str]] = field(default_factory=set)  # (surface lower, field)
    remapped: dict[tuple[str, str], str] = field(default_factory=dict)

    def is_suppressed(self, surface: str, field_name: str) -> bool:
        return (surface.lower(), field_name) in self.suppressed

    def remap(self, surface: str, field_name: str) -> str | None:
        return self.remapped.get((surface.lower(), field_name))


def load_corrections(path: str | Path) -> CorrectionsList:
    corrections = CorrectionsList()
    for lineno, cols in _read_rows(path, CORRECTIONS_HEADER):
        surface, field_name, action, curie = cols
        key = (surface.lower(), field_name)
        if action == "suppress":
            if key in corrections.remapped:
                raise LexiconError(f"{path}:{lineno}: {surface!r} both suppressed and remapped")
            corrections.suppressed.add(key)
        elif action == "remap":
            if not curie:
                raise LexiconError(f"{path}:{lineno}: remap requires a curie")
            if key in corrections.suppressed:
                raise LexiconError(f"{path}:{lineno}: {surface!r} both suppressed and remapped")
            corrections.remapped[key] = curie
        else:
            raise LexiconError(f"{path}:{lineno}: unknown action {action!r}")
    return corrections


def load_overrides(path: str | Path) -> dict[int, str]:
    """Host/pathogen override table: taxid -> classification."""
    from .schema import CLASSIFICATIONS

    overrides: dict[int, str] = {}
    for lineno, cols in _read_rows(path, OVERRIDES_HEADER):
        raw_taxid, classification = cols
        if not raw_taxid.isdigit():
            raise LexiconError(f"{path}:{lineno}: taxid must be an integer")
        if classification not in CLASSIFICATIONS:
            raise LexiconError(f"{path}:{lineno}: unknown classification {classification!r}")
        overrides[int(raw_taxid)] = classification
    return overrides


@dataclass
class LexiconSet:
    """Everything the augmentation pipeline reads: taxonomy, disease
    ontologies, topic ontology, overrides."""

    taxonomy: TaxonomyLexicon
    diseases: OntologyLexicon
    edam: OntologyLexicon
    overrides: dict[int, str] = field(default_factory=dict)


DISEASE_FILES = {"MONDO": "mondo.tsv", "HPO": "hpo.tsv", "DOID": "doid.tsv", "NCIT": "ncit.tsv"}


def load_lexicon_dir(path: str | Path) -> LexiconSet:
    """Load the conventional lexicon directory layout (taxonomy.tsv,
    mondo/hpo/doid/ncit.tsv, edam.tsv, optional overrides.tsv)."""
    path = Path(path)
    taxonomy = load_taxonomy(path / "taxonomy.tsv")
    diseases = OntologyLexicon()
    for filename in DISEASE_FILES.values():
        file_path = path / filename
        if file_path.exists():
            load_ontology(file_path, into=diseases)
    edam = load_ontology(path / "edam.tsv") if (path / "edam.tsv").exists() else OntologyLexicon()
    overrides_path = path / "overrides.tsv"
    overrides = load_overrides(overrides_path) if overrides_path.exists() else {}
    return LexiconSet(taxonomy, diseases, edam, overrides)
