import pytest

from sceneqa.balancer import BalanceConfig, balance_corpus
from sceneqa.splits import (
    HeldOut,
    SplitSpec,
    assign_videos,
    build_indirect_pairing,
    build_novel_composition,
    build_steps_split,
    default_heldout,
    heldout_hits,
    verify_video_partition,
)
from sceneqa.templates import (
    add_indirect,
    add_temporal_localization,
    instantiate,
)

from conftest import make_graph


def graph_with_before_standing(video_id="v1"):
    return make_graph(
        video_id=video_id,
        frames=[
            (2.0, {"bottle": {"holding", "touching"}}),
            (8.0, {"bottle": {"touching"}}),
        ],
        actions=[("standing up", 5.0, 7.0)],
    )


@pytest.fixture
def sequencing_record(registry, ontology):
    graph = graph_with_before_standing()
    base = instantiate(
        registry.templates["objWhat"], {"relationship": "holding"}, graph, 0, ontology
    )
    return add_temporal_localization(base, "before", "standing up", graph, registry, ontology)


@pytest.fixture
def plain_record(registry, ontology):
    graph = make_graph(
        video_id="v2",
        frames=[(2.0, {"cup": {"drinking from", "holding", "touching"}})],
    )
    return instantiate(
        registry.templates["objRelExists"],
        {"relationship": "drinking from", "object": "cup"},
        graph,
        0,
        ontology,
    )


class TestDetection:
    def test_before_standing_up_hits(self, sequencing_record):
        hits = heldout_hits(sequencing_record, default_heldout())
        assert any(h.startswith("sequencing:before+standing up") for h in hits)

    def test_plain_record_clean(self, plain_record):
        assert heldout_hits(plain_record, default_heldout()) == []

    def test_indirect_obj_rel_detected(self, registry, ontology):
        # "Did they contact the object they were carrying?" with paper carried.
        graph = make_graph(
            video_id="v3",
            frames=[
                (2.0, {"paper": {"carrying", "holding", "touching"}}),
                (4.0, {"paper": {"carrying", "holding", "touching"}}),
            ],
        )
        base = instantiate(
            registry.templates["objExists"], {"object": "paper"}, graph, 0, ontology
        )
        ref = registry.indirect_refs["objectWithRel"]
        composed = add_indirect(base, ref, {"irel": "carrying"}, "object", graph, registry, ontology)
        hits = heldout_hits(composed, default_heldout())
        assert "obj-rel:paper+carrying" in hits

    def test_first_superlative_detected(self, registry, ontology):
        graph = make_graph(
            frames=[(1.0, {"bottle": {"holding"}}), (3.0, {"cup": {"holding"}})]
        )
        record = instantiate(
            registry.templates["objFirst"], {"relationship": "holding"}, graph, 0, ontology
        )
        hits = heldout_hits(record, default_heldout())
        assert "superlative:first+holding" in hits


class TestNovelComposition:
    def build(self, registry, ontology):
        records = []
        for i, video in enumerate(["v1", "v2", "v3", "v4"]):
            graph = graph_with_before_standing(video)
            base = instantiate(
                registry.templates["objWhat"], {"relationship": "holding"}, graph, 0, ontology
            )
            records.append(
                add_temporal_localization(base, "before", "standing up", graph, registry, ontology)
            )
            records.append(
                instantiate(
                    registry.templates["objRelExists"],
                    {"relationship": "holding", "object": "bottle"},
                    graph,
                    0,
                    ontology,
                )
            )
        return records

    def test_pairs_never_in_train(self, registry, ontology):
        records = self.build(registry, ontology)
        spec = SplitSpec(
            kind="novel-composition",
            base_video_split={"v1": "train", "v2": "train", "v3": "test", "v4": "test"},
        )
        result = build_novel_composition(records, spec)
        by_qid = {r.qid: r for r in records}
        for qid in result.train_qids:
            assert heldout_hits(by_qid[qid], spec.heldout) == []
        for qid in result.test_qids:
            assert heldout_hits(by_qid[qid], spec.heldout)
        assert verify_video_partition(records, result)

    def test_members_alone_stay_in_train(self, registry, ontology):
        # "standing up" alone (no before-phrase) must remain trainable.
        graph = graph_with_before_standing("v1")
        record = instantiate(
            registry.templates["actExists"], {"action": "standing up"}, graph, 0, ontology
        )
        spec = SplitSpec(kind="novel-composition", base_video_split={"v1": "train"})
        result = build_novel_composition([record], spec)
        assert record.qid in result.train_qids

    def test_empty_test_flagged(self, plain_record):
        spec = SplitSpec(kind="novel-composition", base_video_split={"v2": "train"})
        result = build_novel_composition([plain_record], spec)
        assert "empty-test" in result.flags


class TestStepsSplit:
    def make_records(self, registry, ontology):
        graph_a = graph_with_before_standing("v1")
        graph_b = graph_with_before_standing("v2")
        simple_a = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "holding", "object": "bottle"},
            graph_a, 0, ontology,
        )
        simple_b = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "holding", "object": "bottle"},
            graph_b, 0, ontology,
        )
        base_b = instantiate(
            registry.templates["objWhat"], {"relationship": "holding"}, graph_b, 0, ontology
        )
        hard_b = add_temporal_localization(base_b, "before", "standing up", graph_b,
                                           registry, ontology)
        return [simple_a, simple_b, hard_b]

    def test_boundary_at_threshold(self, registry, ontology):
        records = self.make_records(registry, ontology)
        spec = SplitSpec(kind="more-steps",
                         base_video_split={"v1": "train", "v2": "test"})
        result = build_steps_split(records, 3, spec)
        by_qid = {r.qid: r for r in records}
        assert result.train_qids and result.test_qids
        assert max(by_qid[q].steps for q in result.train_qids) <= 3
        assert min(by_qid[q].steps for q in result.test_qids) > 3
        assert verify_video_partition(records, result)

    def test_all_simple_flags_empty_test(self, registry, ontology):
        records = self.make_records(registry, ontology)[:2]
        spec = SplitSpec(kind="more-steps",
                         base_video_split={"v1": "train", "v2": "test"})
        result = build_steps_split(records, 3, spec)
        assert "empty-test" in result.flags

    def test_threshold_validated(self, registry, ontology):
        with pytest.raises(ValueError):
            build_steps_split([], 0, SplitSpec(kind="more-steps"))


class TestIndirectPairing:
    def test_pairs_and_dangling(self, registry, ontology):
        graph = make_graph(
            video_id="v9",
            frames=[
                (2.0, {"bottle": {"twisting", "holding", "touching"}}),
                (4.0, {"bottle": {"holding", "touching"}}),
            ],
        )
        base = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "twisting", "object": "bottle"},
            graph, 0, ontology,
        )
        ref = registry.indirect_refs["objectWithRelLast"]
        composed = add_indirect(base, ref, {"irel": "holding"}, "object", graph,
                                registry, ontology)
        pairing = build_indirect_pairing([base, composed])
        assert pairing.pairs == {base.qid: {"object": [composed.qid]}}
        assert pairing.unpaired == []
        # counterpart deleted in balancing -> unpaired but logged
        orphan_pairing = build_indirect_pairing([composed])
        assert orphan_pairing.pairs == {}
        assert orphan_pairing.unpaired == [composed.qid]

    def test_linked_survivors_bijection(self, generated):
        config = BalanceConfig(seed=9)
        survivors, _ = balance_corpus(generated.records, config)
        pairing = build_indirect_pairing(survivors)
        alive = {r.qid for r in survivors}
        seen = set()
        for direct, kinds in pairing.pairs.items():
            assert direct in alive
            for indirect_qids in kinds.values():
                for qid in indirect_qids:
                    assert qid in alive and qid not in seen
                    seen.add(qid)
        for qid in pairing.unpaired:
            assert qid in alive and qid not in seen


class TestVideoAssignment:
    def test_deterministic_and_respects_overrides(self):
        spec = SplitSpec(kind="more-steps", base_video_split={"vid-7": "test"}, seed=4)
        ids = [f"vid-{i}" for i in range(20)]
        first = assign_videos(ids, spec)
        second = assign_videos(ids, spec)
        assert first == second
        assert first["vid-7"] == "test"
        assert set(first.values()) == {"train", "test"}
