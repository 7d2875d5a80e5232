import json

import pytest

from sceneqa.augment import augment_corpus
from sceneqa.generator import (
    Candidate,
    CorpusStats,
    GeneratorConfig,
    build_stats,
    corpus_pair_counts,
    enumerate_candidates,
    generate_corpus,
    quality_filter,
)
from sceneqa.templates import instantiate

from conftest import make_graph


def rich_stats(pairs=None, singles=None):
    stats = CorpusStats(pair_counts=pairs or {})
    stats.single_answer_categories = singles or set()
    return stats


def plentiful(*pairs):
    return {pair: 50 for pair in pairs}


@pytest.fixture
def tiny_graph(ontology):
    graph = make_graph(
        frames=[
            (2.0, {"bottle": {"holding", "touching"}}),
            (6.0, {"bottle": {"touching"}}),
        ],
        actions=[("drinking from a bottle", 1.0, 7.0)],
    )
    return graph


class TestEnumeration:
    def test_tiny_graph_covers_core_templates(self, tiny_graph, registry, ontology):
        candidates = enumerate_candidates(tiny_graph, registry, ontology)
        by_template = {c.template_id for c in candidates}
        assert {"objExists", "objRelExists", "relExists", "actExists"} <= by_template
        bindings = {
            c.binding_map().get("object")
            for c in candidates
            if c.template_id == "objExists"
        }
        assert "bottle" in bindings

    def test_sparse_graph_has_no_spatial_bindings(self, registry, ontology):
        graph = make_graph(
            frames=[(2.0, {"bottle": {"holding", "above"}}), (6.0, {"cup": {"holding"}})],
            actions=[("standing up", 1.0, 7.0)],
        )
        sparse = graph.__class__(**{**graph.__dict__, "sparse_spatial": True})
        candidates = enumerate_candidates(sparse, registry, ontology)
        spatial = {"above", "beneath", "in front of", "behind", "on the side of", "in"}
        for candidate in candidates:
            for value in candidate.binding_map().values():
                assert value not in spatial

    def test_empty_graph_empty_stream(self, registry, ontology):
        graph = make_graph(frames=[], actions=[])
        assert enumerate_candidates(graph, registry, ontology) == []

    def test_cap_subsamples_deterministically(self, tiny_graph, registry, ontology):
        config = GeneratorConfig(per_video_cap=20)
        first = enumerate_candidates(tiny_graph, registry, ontology, config, seed=9)
        second = enumerate_candidates(tiny_graph, registry, ontology, config, seed=9)
        assert first == second and len(first) == 20


class TestQualityFilter:
    def test_rare_pair(self, registry, ontology):
        graph = make_graph(frames=[(1.0, {"doorway": {"twisting"}})])
        record = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "twisting", "object": "doorway"},
            graph,
            0,
            ontology,
        )
        stats = rich_stats(pairs={("doorway", "twisting"): 3})
        verdict = quality_filter(record, stats, ontology, graph)
        assert verdict is not None and verdict.reason == "rare-pair"

    def test_answer_in_question(self, registry, ontology):
        graph = make_graph(
            frames=[
                (2.0, {"blanket": {"twisting", "holding"}}),
                (4.0, {"blanket": {"twisting"}}),
            ],
            actions=[("snuggling with a blanket", 1.0, 5.0)],
        )
        from sceneqa.templates import add_temporal_localization

        base = instantiate(
            registry.templates["objWhat"], {"relationship": "twisting"}, graph, 0, ontology
        )
        localized = add_temporal_localization(
            base, "while", "snuggling with a blanket", graph, registry, ontology
        )
        assert localized.answer == "blanket"
        assert "blanket" in localized.text
        stats = rich_stats(pairs=plentiful(("blanket", "twisting"), ("blanket", "snuggling")))
        stats.answer_global = {"any": {}}
        verdict = quality_filter(localized, stats, ontology, graph)
        assert verdict is not None and verdict.reason == "answer-in-question"

    def test_single_global_answer(self, registry, ontology):
        graph = make_graph(
            frames=[(2.0, {"light": {"turning off", "touching"}})],
            actions=[("turning off a light", 1.0, 3.0)],
        )
        record = instantiate(
            registry.templates["objWhat"], {"relationship": "turning off"}, graph, 0, ontology
        )
        assert record.answer == "light"
        stats = build_stats([graph], [record])
        assert stats.single_answer_categories  # only ever "light" corpus-wide
        stats.pair_counts = plentiful(("light", "turning off"))
        verdict = quality_filter(record, stats, ontology, graph)
        assert verdict is not None and verdict.reason == "single-global-answer"

    def test_duration_margin(self, registry, ontology):
        graph = make_graph(
            frames=[(2.0, {"phone": {"holding"}}), (12.0, {"phone": {"holding"}})],
            actions=[("standing up", 1.0, 11.0), ("sitting down", 12.0, 17.0)],
        )
        record = instantiate(
            registry.templates["actLengthLongerCompare"],
            {"action": "standing up", "action2": "sitting down"},
            graph,
            0,
            ontology,
        )
        verdict = quality_filter(record, rich_stats(), ontology, graph)
        assert verdict is not None and verdict.reason == "duration-margin"

    def test_duration_margin_passes_over_seven(self, registry, ontology):
        graph = make_graph(
            frames=[(2.0, {"phone": {"holding"}}), (12.0, {"phone": {"holding"}})],
            actions=[("standing up", 1.0, 11.0), ("sitting down", 12.0, 14.0)],
        )
        record = instantiate(
            registry.templates["actLengthLongerCompare"],
            {"action": "standing up", "action2": "sitting down"},
            graph,
            0,
            ontology,
        )
        verdict = quality_filter(record, rich_stats(), ontology, graph)
        assert verdict is None

    def test_unrealistic_decoy(self, registry, ontology):
        graph = make_graph(
            frames=[(2.0, {"phone": {"holding"}})],
            actions=[("holding a phone", 1.0, 3.0)],
        )
        record = instantiate(
            registry.templates["actExists"], {"action": "washing a window"}, graph, 0, ontology
        )
        assert record.answer == "no"
        verdict = quality_filter(record, rich_stats(), ontology, graph)
        assert verdict is not None and verdict.reason == "unrealistic-decoy"

    def test_realistic_decoy_shares_verb(self, registry, ontology):
        graph = make_graph(
            frames=[(2.0, {"door": {"opening", "touching"}})],
            actions=[("opening a door", 1.0, 3.0)],
        )
        record = instantiate(
            registry.templates["actExists"],
            {"action": "opening a refrigerator"},
            graph,
            0,
            ontology,
        )
        assert record.answer == "no"
        verdict = quality_filter(record, rich_stats(), ontology, graph)
        assert verdict is None

    def test_blacklist(self, registry, ontology):
        graph = make_graph(frames=[(1.0, {"clothes": {"wearing"}})])
        record = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "wearing", "object": "clothes"},
            graph,
            0,
            ontology,
        )
        stats = rich_stats(pairs=plentiful(("clothes", "wearing")))
        verdict = quality_filter(record, stats, ontology, graph)
        assert verdict is not None and verdict.reason == "blacklist"

    def test_similar_objects(self, registry, ontology):
        graph = make_graph(
            frames=[(1.0, {"door": {"touching"}, "doorway": {"leaning on"}})]
        )
        record = instantiate(
            registry.templates["objWhatChoose"],
            {"relationship": "touching", "object": "door", "object2": "doorway"},
            graph,
            0,
            ontology,
        )
        # both mentioned -> rejected before pair statistics matter
        verdict = quality_filter(record, rich_stats(), ontology, graph)
        assert verdict is not None and verdict.reason == "similar-objects"

    def test_confusing_relationship(self, registry, ontology):
        graph = make_graph(frames=[(1.0, {"phone": {"not contacting"}})])
        record = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "not contacting", "object": "phone"},
            graph,
            0,
            ontology,
        )
        verdict = quality_filter(record, rich_stats(), ontology, graph)
        assert verdict is not None and verdict.reason == "confusing-relationship"


class TestGenerateCorpus:
    def test_deterministic_bytes(self, small_corpus, registry, ontology):
        config = GeneratorConfig(per_video_cap=500)
        a = generate_corpus(small_corpus[:4], registry, ontology, seed=3, config=config)
        b = generate_corpus(small_corpus[:4], registry, ontology, seed=3, config=config)
        assert json.dumps([r.to_json() for r in a.records]) == json.dumps(
            [r.to_json() for r in b.records]
        )
        assert json.dumps([r.to_json() for r in a.rejections]) == json.dumps(
            [r.to_json() for r in b.rejections]
        )

    def test_workers_match_serial(self, small_corpus, registry, ontology):
        config = GeneratorConfig(per_video_cap=300)
        serial = generate_corpus(small_corpus[:4], registry, ontology, 3, config, workers=1)
        parallel = generate_corpus(small_corpus[:4], registry, ontology, 3, config, workers=2)
        assert [r.to_json() for r in serial.records] == [r.to_json() for r in parallel.records]

    def test_emitted_records_pass_refilter(self, generated, small_corpus, ontology):
        by_video = {g.video_id: g for g in small_corpus}
        for record in generated.records:
            verdict = quality_filter(
                record, generated.stats, ontology, by_video[record.video_id]
            )
            assert verdict is None, (record.text, verdict.reason)

    def test_emitted_pairs_frequent_and_clean(self, generated, ontology):
        from sceneqa.analysis import record_pairs

        for record in generated.records:
            for pair in record_pairs(record):
                assert generated.stats.pair_count(*pair) >= 10
                assert not ontology.is_blacklisted(*pair)

    def test_binary_choice_records_list_two_options(self, generated):
        for record in generated.records:
            if record.options and record.template_id.endswith(("Choose", "Compare")):
                assert len(record.options) == 2
                assert record.answer in record.options

    def test_pair_counts_are_instance_level(self, ontology):
        graph = make_graph(
            frames=[(1.0, {"bottle": {"holding"}}), (2.0, {"bottle": {"holding"}})]
        )
        counts = corpus_pair_counts([graph, graph])
        assert counts[("bottle", "holding")] == 4

    def test_manifest_counts_consistent(self, generated):
        manifest = generated.manifest
        assert manifest["emitted"] == len(generated.records)
        assert sum(manifest["by_structure"].values()) == manifest["emitted"]
