import itertools
import random

import pytest

from metaportal.augment import (
    ConceptScanner,
    CoverageReport,
    KeywordTopicClassifier,
    PublicationAnnotations,
    augment_from_citation,
    classify_topics,
    coverage_column,
    delineate_host_pathogen,
    extract_concepts,
    hierarchical_agreement,
    load_annotations_dir,
    load_annotations_file,
    map_health_condition,
    run_pipeline,
    split_organism_field,
    standardize_organism,
)
from metaportal.lexicons import (
    CorrectionsList,
    OntologyLexicon,
    OntologyTerm,
    load_corrections,
    load_lexicon_dir,
)
from metaportal.schema import Stage, term_ref, validate_record

from helpers import FIXTURES, LEXICONS, make_record
from oracles import audit_citation_soundness, naive_coverage, random_pipeline_corpus


@pytest.fixture(scope="module")
def lexicons():
    return load_lexicon_dir(LEXICONS)


@pytest.fixture(scope="module")
def corrections():
    return load_corrections(FIXTURES / "corrections.tsv")


class TestStandardizeOrganism:
    def test_lookup_success_fills_curie_label_synonyms(self, lexicons):
        out = standardize_organism(term_ref("homo sapiens"), lexicons.taxonomy)
        assert out["curie"] == "NCBITaxon:9606"
        assert out["label"] == "Homo sapiens"
        assert "human" in out["synonyms"]
        assert out["raw_text"] == "homo sapiens"
        assert out["ontology"] == "NCBITaxon"

    def test_punctuation_normalization(self, lexicons):
        dotted = standardize_organism(term_ref("Homo.sapiens"), lexicons.taxonomy)
        plain = standardize_organism(term_ref("homo sapiens"), lexicons.taxonomy)
        assert {k: v for k, v in dotted.items() if k != "raw_text"} == \
               {k: v for k, v in plain.items() if k != "raw_text"}

    def test_failure_passthrough(self, lexicons):
        raw = term_ref("gibberish organism")
        assert standardize_organism(raw, lexicons.taxonomy) == raw

    def test_already_standardized_untouched(self, lexicons):
        ref = term_ref("x", curie="NCBITaxon:9606", label="Homo sapiens", ontology="NCBITaxon")
        assert standardize_organism(ref, lexicons.taxonomy) is ref


class TestDelineation:
    def test_golden_table_agrees_completely(self, lexicons):
        rows = (FIXTURES / "delineation_golden.tsv").read_text().strip().splitlines()[1:]
        mismatches = []
        for row in rows:
            taxid, name, expected = row.split("\t")
            term = standardize_organism(term_ref(name), lexicons.taxonomy)
            assert term["curie"] == f"NCBITaxon:{taxid}"
            got = delineate_host_pathogen(term, lexicons.taxonomy, lexicons.overrides)
            if got != expected:
                mismatches.append((name, expected, got))
        assert mismatches == []

    def test_homo_sapiens_is_host(self, lexicons):
        term = standardize_organism(term_ref("Homo sapiens"), lexicons.taxonomy)
        assert delineate_host_pathogen(term, lexicons.taxonomy, lexicons.overrides) == "Host"

    def test_sars_cov_2_is_pathogen(self, lexicons):
        term = standardize_organism(term_ref("SARS-CoV-2"), lexicons.taxonomy)
        assert delineate_host_pathogen(term, lexicons.taxonomy, lexicons.overrides) == "Pathogen"

    def test_fungus_defaults_to_pathogen(self, lexicons):
        term = standardize_organism(term_ref("Candida albicans"), lexicons.taxonomy)
        assert delineate_host_pathogen(term, lexicons.taxonomy, {}) == "Pathogen"

    def test_override_wins(self, lexicons):
        term = standardize_organism(term_ref("baker's yeast"), lexicons.taxonomy)
        assert delineate_host_pathogen(term, lexicons.taxonomy, {}) == "Pathogen"
        assert delineate_host_pathogen(term, lexicons.taxonomy, lexicons.overrides) == "Ambiguous"

    def test_unresolvable_taxid(self, lexicons):
        bad = term_ref("x", curie="NCBITaxon:999999999", label="x", ontology="NCBITaxon")
        with pytest.raises(ValueError, match="unresolvable taxid"):
            delineate_host_pathogen(bad, lexicons.taxonomy, {})

    def test_deterministic(self, lexicons):
        term = standardize_organism(term_ref("Zika virus"), lexicons.taxonomy)
        results = {delineate_host_pathogen(term, lexicons.taxonomy, lexicons.overrides) for _ in range(5)}
        assert results == {"Pathogen"}


class TestSplitOrganisms:
    def test_mixed_host_pathogen_routed(self, lexicons):
        record = make_record(species=[term_ref("Homo sapiens"), term_ref("SARS-CoV-2")],
                             _provenance={"species": "ingest"})
        out = split_organism_field(record, lexicons.taxonomy, lexicons.overrides)
        assert [t["label"] for t in out["species"]] == ["Homo sapiens"]
        assert [t["label"] for t in out["infectiousAgent"]] == [
            "Severe acute respiratory syndrome coronavirus 2"
        ]
        assert out["species"][0]["classification"] == "Host"
        assert out["infectiousAgent"][0]["classification"] == "Pathogen"
        assert out["_provenance"]["species"] == "standardize"
        assert out["_provenance"]["infectiousAgent"] == "standardize"

    def test_single_host_unchanged_split(self, lexicons):
        record = make_record(species=[term_ref("Homo sapiens")], _provenance={"species": "ingest"})
        out = split_organism_field(record, lexicons.taxonomy, lexicons.overrides)
        assert "infectiousAgent" not in out
        assert out["species"][0]["classification"] == "Host"

    def test_empty_species_vacuous(self, lexicons):
        record = make_record()
        assert split_organism_field(record, lexicons.taxonomy, lexicons.overrides) == record

    def test_ambiguous_stays_in_species(self, lexicons):
        record = make_record(species=[term_ref("Caenorhabditis elegans")],
                             _provenance={"species": "ingest"})
        out = split_organism_field(record, lexicons.taxonomy, lexicons.overrides)
        assert out["species"][0]["classification"] == "Ambiguous"
        assert "infectiousAgent" not in out

    def test_pathogen_only_species_never_empties(self, lexicons):
        record = make_record(species=[term_ref("Mycobacterium tuberculosis")],
                             _provenance={"species": "ingest"})
        out = split_organism_field(record, lexicons.taxonomy, lexicons.overrides)
        assert out["species"], "species must not be erased"
        assert out["species"][0]["classification"] == "Pathogen"
        assert [t["curie"] for t in out["infectiousAgent"]] == ["NCBITaxon:1773"]

    def test_unresolved_mentions_stay_unclassified(self, lexicons):
        record = make_record(species=[term_ref("creature of the deep")],
                             _provenance={"species": "ingest"})
        out = split_organism_field(record, lexicons.taxonomy, lexicons.overrides)
        assert out["species"] == [term_ref("creature of the deep")]


class TestHealthConditionCascade:
    def test_mondo_beats_doid(self, lexicons):
        out = map_health_condition(term_ref("asthma"), lexicons.diseases)
        assert out["curie"] == "MONDO:0004979"
        assert out["ontology"] == "MONDO"

    def test_ncit_only_falls_through(self, lexicons):
        out = map_health_condition(term_ref("hypertension"), lexicons.diseases)
        assert out["curie"] == "NCIT:C3117"

    def test_doid_only(self, lexicons):
        out = map_health_condition(term_ref("chikungunya"), lexicons.diseases)
        assert out["curie"] == "DOID:12205"

    def test_unknown_passthrough(self, lexicons):
        raw = term_ref("mystery ailment")
        assert map_health_condition(raw, lexicons.diseases) == raw

    def test_cascade_dominance_exhaustive_over_presence_subsets(self):
        cascade = ("MONDO", "HPO", "DOID", "NCIT")
        for size in range(1, 5):
            for present in itertools.combinations(cascade, size):
                lexicon = OntologyLexicon()
                for ontology in present:
                    lexicon.add(OntologyTerm(f"{ontology}:0000001", "conflict term", ontology))
                out = map_health_condition(term_ref("conflict term"), lexicon)
                expected = next(o for o in cascade if o in present)
                assert out["ontology"] == expected, (present, out)


class TestCitationAugmentation:
    def annotations(self, **kw):
        defaults = dict(pmid="34000002", diseases=[], organisms=[], grants=[])
        defaults.update(kw)
        return PublicationAnnotations(**defaults)

    def test_only_mentioned_diseases_survive(self, lexicons):
        record = make_record(
            name="Regional cohort records",
            description="Cohort of patients with tuberculosis in three regions.",
            citation=[{"pmid": "34000002"}],
        )
        ann = self.annotations(diseases=["tuberculosis", "influenza"])
        out = augment_from_citation(record, ann, lexicons)
        assert [t["raw_text"] for t in out["healthCondition"]] == ["tuberculosis"]
        assert out["healthCondition"][0]["curie"] == "MONDO:0018076"
        assert out["_provenance"]["healthCondition"] == "citation"

    def test_existing_health_condition_untouched(self, lexicons):
        record = make_record(
            description="patients with tuberculosis",
            healthCondition=[term_ref("asthma")],
            citation=[{"pmid": "34000002"}],
            _provenance={"healthCondition": "ingest"},
        )
        out = augment_from_citation(record, self.annotations(diseases=["tuberculosis"]), lexicons)
        assert out["healthCondition"] == [term_ref("asthma")]
        assert out["_provenance"]["healthCondition"] == "ingest"

    def test_grants_exempt_from_text_filter(self, lexicons):
        record = make_record(citation=[{"pmid": "34000002"}])
        out = augment_from_citation(record, self.annotations(grants=["AI123456"]), lexicons)
        assert out["funding"] == [{"identifier": "AI123456"}]
        assert out["_provenance"]["funding.identifier"] == "citation"

    def test_pmid_mismatch_is_noop(self, lexicons):
        record = make_record(citation=[{"pmid": "1"}])
        out = augment_from_citation(record, self.annotations(grants=["AI123456"]), lexicons)
        assert out == record

    def test_organisms_filtered_and_routed(self, lexicons):
        record = make_record(
            name="Placental tissue catalogue",
            description="Zika virus infection of human placental tissue.",
            citation=[{"pmid": "34000002"}],
        )
        ann = self.annotations(organisms=["Zika virus", "Mus musculus", "human"])
        out = augment_from_citation(record, ann, lexicons)
        assert [t["curie"] for t in out["infectiousAgent"]] == ["NCBITaxon:64320"]
        assert [t["curie"] for t in out["species"]] == ["NCBITaxon:9606"]

    def test_word_boundary_anchoring(self, lexicons):
        record = make_record(name="Artifact catalogue",
                             description="analysis of influenzalike artifacts",
                             citation=[{"pmid": "34000002"}])
        out = augment_from_citation(record, self.annotations(diseases=["influenza"]), lexicons)
        assert "healthCondition" not in out

    def test_annotation_file_round_trip(self, tmp_path):
        ann = load_annotations_file(FIXTURES / "annotations" / "34000002.txt")
        assert ann.pmid == "34000002"
        assert ann.diseases == ["asthma", "influenza"]
        assert ann.organisms == ["Homo sapiens"]
        assert ann.grants == ["R01AI654321"]
        loaded = load_annotations_dir(FIXTURES / "annotations")
        assert set(loaded) == {"34000001", "34000002"}


class TestTextMining:
    def test_single_disease_mined_into_empty_field(self, lexicons, corrections):
        record = make_record(name="Two-city cohort records",
                             description="Longitudinal study of patients with asthma in two cities.")
        out = extract_concepts(record, lexicons, corrections)
        assert [t["curie"] for t in out["healthCondition"]] == ["MONDO:0004979"]
        assert out["_provenance"]["healthCondition"] == "textmine"
        # brute-force scan oracle: exactly one lexicon surface occurs in the text
        scanner = ConceptScanner(lexicons, corrections)
        found = scanner.scan(record["description"])
        assert [s for s, kinds in found if "disease" in kinds] == ["asthma"]

    def test_suppressed_surface_not_added(self, lexicons):
        corrections = CorrectionsList(suppressed={("asthma", "healthCondition")})
        record = make_record(name="Cohort records", description="patients with asthma")
        out = extract_concepts(record, lexicons, corrections)
        assert "healthCondition" not in out

    def test_longest_match_wins(self, lexicons, corrections):
        record = make_record(name="Isolate sequencing records",
                             description="Sequencing of human immunodeficiency virus isolates.")
        out = extract_concepts(record, lexicons, corrections)
        assert [t["curie"] for t in out["infectiousAgent"]] == ["NCBITaxon:11676"]
        # "virus" alone never matches anything once the longer span is consumed
        assert "species" not in out or all(
            t["curie"] != "NCBITaxon:11676" for t in out.get("species", []))

    def test_remap_redirects_surface(self, lexicons, corrections):
        record = make_record(name="Surveillance summary", description="seasonal flu surveillance summary")
        out = extract_concepts(record, lexicons, corrections)
        assert [t["curie"] for t in out["healthCondition"]] == ["MONDO:0005812"]
        assert out["healthCondition"][0]["raw_text"] == "flu"

    def test_existing_field_not_overwritten(self, lexicons, corrections):
        record = make_record(name="Cohort records", description="patients with asthma",
                             healthCondition=[term_ref("dengue")],
                             _provenance={"healthCondition": "ingest"})
        out = extract_concepts(record, lexicons, corrections)
        assert out["healthCondition"] == [term_ref("dengue")]

    def test_mined_records_stay_valid(self, lexicons, corrections):
        record = make_record(name="Vector survey records",
                             description="Zika virus and malaria in Aedes aegypti populations")
        out = extract_concepts(record, lexicons, corrections)
        assert validate_record(out).errors == []


class TestTopics:
    def test_rna_seq_maps_to_transcriptomics_family(self, lexicons):
        classifier = KeywordTopicClassifier(lexicons.edam)
        record = make_record(measurementTechnique=[term_ref("RNA-Seq")])
        out = classify_topics(record, classifier)
        assert [t["curie"] for t in out["topicCategory"]] == ["EDAM:topic_3308"]
        assert out["_provenance"]["topicCategory"] == "topics"

    def test_no_evidence_leaves_empty(self, lexicons):
        classifier = KeywordTopicClassifier(lexicons.edam)
        record = make_record()
        out = classify_topics(record, classifier)
        assert "topicCategory" not in out

    def test_existing_topics_untouched(self, lexicons):
        classifier = KeywordTopicClassifier(lexicons.edam)
        existing = [term_ref("x", curie="EDAM:topic_0634", label="Pathology", ontology="EDAM")]
        record = make_record(topicCategory=existing, measurementTechnique=[term_ref("RNA-Seq")],
                             _provenance={"topicCategory": "ingest"})
        out = classify_topics(record, classifier)
        assert out["topicCategory"] == existing

    def test_keyword_label_lookup(self, lexicons):
        classifier = KeywordTopicClassifier(lexicons.edam)
        record = make_record(keywords=["proteomics", "immunology"])
        out = classify_topics(record, classifier)
        assert [t["curie"] for t in out["topicCategory"]] == ["EDAM:topic_0121", "EDAM:topic_0804"]

    def test_classifier_failure_is_noop(self, lexicons):
        class Broken:
            def classify(self, record):
                raise RuntimeError("no model")

        record = make_record(keywords=["proteomics"])
        assert classify_topics(record, Broken()) == record


def brute_force_best_matching(pred: list[str], gold: list[str], edam) -> float:
    from metaportal.augment import _pair_credit

    if not pred or not gold:
        return 0.0
    short, long_, flip = (pred, gold, False) if len(pred) <= len(gold) else (gold, pred, True)
    best = 0.0
    for perm in itertools.permutations(long_, len(short)):
        total = sum(
            _pair_credit(a, b, edam) if not flip else _pair_credit(b, a, edam)
            for a, b in zip(short, perm)
        )
        best = max(best, total)
    return best / max(len(pred), len(gold))


class TestHierarchicalAgreement:
    def test_identity_sets(self, lexicons):
        topics = {"EDAM:topic_3308", "EDAM:topic_0121"}
        assert hierarchical_agreement(topics, topics, lexicons.edam) == 1.0

    def test_unrelated_disjoint_singletons(self, lexicons):
        assert hierarchical_agreement({"EDAM:topic_3308"}, {"EDAM:topic_0804"}, lexicons.edam) == 0.0

    def test_parent_child_singleton_half_credit(self, lexicons):
        score = hierarchical_agreement({"EDAM:topic_3308"}, {"EDAM:topic_3391"}, lexicons.edam)
        assert abs(score - 0.5) < 1e-12

    def test_symmetric(self, lexicons):
        a, b = {"EDAM:topic_3308", "EDAM:topic_3324"}, {"EDAM:topic_3391", "EDAM:topic_3303"}
        assert hierarchical_agreement(a, b, lexicons.edam) == hierarchical_agreement(b, a, lexicons.edam)

    def test_grandparent_credit_is_one_third(self, lexicons):
        score = hierarchical_agreement({"EDAM:topic_3308"}, {"EDAM:topic_0003"}, lexicons.edam)
        assert abs(score - 1 / 3) < 1e-12

    def test_empty_sets(self, lexicons):
        assert hierarchical_agreement(set(), set(), lexicons.edam) == 1.0
        assert hierarchical_agreement({"EDAM:topic_3308"}, set(), lexicons.edam) == 0.0

    def test_unresolved_curie_rejected(self, lexicons):
        with pytest.raises(ValueError, match="unresolved"):
            hierarchical_agreement({"EDAM:topic_9999"}, {"EDAM:topic_3308"}, lexicons.edam)

    def test_matches_brute_force_optimal_matching(self, lexicons):
        curies = sorted(lexicons.edam.terms)
        rng = random.Random(4242)
        for _ in range(60):
            pred = set(rng.sample(curies, rng.randint(1, 4)))
            gold = set(rng.sample(curies, rng.randint(1, 4)))
            fast = hierarchical_agreement(pred, gold, lexicons.edam)
            slow = brute_force_best_matching(sorted(pred), sorted(gold), lexicons.edam)
            assert abs(fast - slow) < 1e-12

    def test_flat_ontology_equals_exact_match_ratio(self):
        flat = OntologyLexicon()
        for i in range(8):
            flat.add(OntologyTerm(f"EDAM:flat_{i}", f"flat {i}", "EDAM"))
        curies = sorted(flat.terms)
        rng = random.Random(7)
        for _ in range(100):
            pred = set(rng.sample(curies, rng.randint(1, 5)))
            gold = set(rng.sample(curies, rng.randint(1, 5)))
            got = hierarchical_agreement(pred, gold, flat)
            expected = len(pred & gold) / max(len(pred), len(gold))
            assert abs(got - expected) < 1e-12


class TestCoverage:
    def test_counts_records_with_field(self):
        records = [make_record(f"c_{i}") for i in range(5)]
        for record in records[:3]:
            record["species"] = [term_ref("Homo sapiens")]
        report = coverage_column(records)
        assert report.records_with["species"]["current"] == 3
        assert report.total_records["current"] == 5

    def test_shared_curie_counted_once(self):
        ref = term_ref("human", curie="NCBITaxon:9606", label="Homo sapiens", ontology="NCBITaxon")
        records = [make_record("c_1", species=[ref]), make_record("c_2", species=[dict(ref)])]
        report = coverage_column(records)
        assert report.distinct_values["species"]["current"] == 1

    def test_raw_text_fallback_normalized(self):
        records = [make_record("c_1", species=[term_ref("HOMO-SAPIENS")]),
                   make_record("c_2", species=[term_ref("homo sapiens")])]
        report = coverage_column(records)
        assert report.distinct_values["species"]["current"] == 1

    def test_empty_corpus_all_zero(self):
        report = coverage_column([])
        assert report.records_with["species"]["current"] == 0
        assert report.total_records["current"] == 0

    def test_tsv_round_trip(self):
        records = [make_record("c_1", species=[term_ref("x")], funding=[{"identifier": "R01AI000001"}])]
        report = coverage_column(records)
        parsed = CoverageReport.from_tsv(report.to_tsv())
        assert parsed == report


class TestPipeline:
    def run_all(self, rng_seed=11, n=24):
        rng = random.Random(rng_seed)
        records, annotations = random_pipeline_corpus(rng, n)
        lexicons = load_lexicon_dir(LEXICONS)
        corrections = load_corrections(FIXTURES / "corrections.tsv")
        return run_pipeline(
            records,
            [Stage.STANDARDIZE, Stage.CITATION, Stage.TEXT_MINING, Stage.TOPICS],
            lexicons,
            annotations,
            corrections,
        )

    def test_counts_match_brute_force_recount(self):
        out, report = self.run_all()
        recount = naive_coverage(out)
        last = report.stages[-1]
        for field, (filled, distinct) in recount.items():
            assert report.records_with[field][last] == filled
            assert report.distinct_values[field][last] == distinct

    def test_empty_stage_list_is_identity(self):
        rng = random.Random(3)
        records, _ = random_pipeline_corpus(rng, 8)
        out, report = run_pipeline(records, [])
        assert out == sorted(records, key=lambda r: r["_id"])
        assert report.stages == ["ingest"]

    def test_out_of_order_stages_rejected(self):
        with pytest.raises(ValueError, match="order"):
            run_pipeline([], [Stage.CITATION, Stage.STANDARDIZE], load_lexicon_dir(LEXICONS), {})

    def test_duplicate_stage_rejected(self):
        with pytest.raises(ValueError, match="order"):
            run_pipeline([], [Stage.TOPICS, Stage.TOPICS], load_lexicon_dir(LEXICONS))

    def test_missing_annotations_for_citation_stage(self):
        with pytest.raises(ValueError, match="annotations"):
            run_pipeline([], [Stage.CITATION], load_lexicon_dir(LEXICONS))

    def test_stage_monotonicity(self):
        _, report = self.run_all(rng_seed=5, n=30)
        for field in ("species", "infectiousAgent", "healthCondition", "funding.identifier"):
            series = [report.records_with[field][s] for s in report.stages]
            assert series == sorted(series), (field, series)

    def test_distinct_species_shrink_at_standardization(self):
        _, report = self.run_all(rng_seed=9, n=20)
        ingest, standardize = report.stages[0], report.stages[1]
        assert report.distinct_values["species"][standardize] <= report.distinct_values["species"][ingest]

    def test_idempotent(self):
        out, _ = self.run_all()
        lexicons = load_lexicon_dir(LEXICONS)
        corrections = load_corrections(FIXTURES / "corrections.tsv")
        rng = random.Random(11)
        _, annotations = random_pipeline_corpus(rng, 24)
        again, _ = run_pipeline(
            out,
            [Stage.STANDARDIZE, Stage.CITATION, Stage.TEXT_MINING, Stage.TOPICS],
            lexicons,
            annotations,
            corrections,
        )
        assert again == out

    def test_citation_soundness_audit(self):
        out, _ = self.run_all(rng_seed=21, n=40)
        assert audit_citation_soundness(out) == []

    def test_all_outputs_validate(self):
        out, _ = self.run_all(rng_seed=13, n=20)
        for record in out:
            assert validate_record(record).errors == [], record["_id"]
