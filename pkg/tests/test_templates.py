import json

import pytest

from sceneqa import nlg
from sceneqa.dsl import evaluate
from sceneqa.templates import (
    CompositionError,
    EvaluationRejected,
    QuestionRecord,
    RegistryError,
    _parse_registry,
    add_indirect,
    add_temporal_localization,
    default_registry,
    instantiate,
)

from conftest import make_graph


@pytest.fixture
def holding_graph():
    return make_graph(
        frames=[
            (2.0, {"phone": {"holding", "touching"}}),
            (6.0, {"bottle": {"twisting", "holding", "touching"}}),
            (8.0, {"bottle": {"holding", "touching"}}),
        ],
        actions=[
            ("putting a phone somewhere", 1.0, 5.0),
            ("standing up", 7.0, 9.0),
        ],
    )


class TestRegistry:
    def test_ships_28_templates(self, registry):
        assert len(registry.templates) == 28

    def test_structure_census_matches_table(self, registry):
        census = {}
        for template in registry.templates.values():
            census[template.structure] = census.get(template.structure, 0) + 1
        assert census == {"query": 10, "compare": 7, "choose": 3, "verify": 6, "logic": 2}

    def test_semantic_census_matches_table(self, registry):
        census = {}
        for template in registry.templates.values():
            census[template.semantic] = census.get(template.semantic, 0) + 1
        assert census == {"object": 11, "relationship": 5, "action": 12}

    def test_load_fails_on_steps_mismatch(self):
        from importlib import resources

        payload = json.loads(
            resources.files("sceneqa.data").joinpath("templates.json").read_text()
        )
        payload["templates"][0]["steps"] += 1
        with pytest.raises(RegistryError):
            _parse_registry(payload)

    def test_load_fails_on_missing_slot(self):
        from importlib import resources

        payload = json.loads(
            resources.files("sceneqa.data").joinpath("templates.json").read_text()
        )
        for entry in payload["templates"]:
            if entry["id"] == "objRelExists":
                entry["frames"] = ["Was the person there?"]
        with pytest.raises(RegistryError):
            _parse_registry(payload)


class TestInstantiate:
    def test_obj_rel_exists_realization(self, registry, ontology, holding_graph):
        record = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "holding", "object": "bottle"},
            holding_graph,
            0,
            ontology,
        )
        assert record.answer == "yes"
        assert record.text in {
            "Was the person holding a bottle?",
            "Were they holding a bottle?",
            "Did they hold a bottle?",
        }
        assert record.steps == 1
        assert record.answer_type == "binary" and record.options == ("yes", "no")

    def test_act_time_answer_in_options(self, registry, ontology, holding_graph):
        record = instantiate(
            registry.templates["actTime"],
            {"action": "putting a phone somewhere", "action2": "standing up"},
            holding_graph,
            0,
            ontology,
        )
        assert record.answer in ("before", "after")
        assert record.answer == "before"
        assert "before or after" in record.text

    def test_ambiguous_binding_rejected(self, registry, ontology):
        graph = make_graph(frames=[(1.0, {"bottle": {"holding"}, "cup": {"holding"}})])
        with pytest.raises(EvaluationRejected) as err:
            instantiate(
                registry.templates["objWhat"], {"relationship": "holding"}, graph, 0, ontology
            )
        assert err.value.kind == "ambiguous"

    def test_text_deterministic(self, registry, ontology, holding_graph):
        first = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "twisting", "object": "bottle"},
            holding_graph,
            3,
            ontology,
        )
        second = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "twisting", "object": "bottle"},
            holding_graph,
            3,
            ontology,
        )
        assert first.text == second.text and first.qid == second.qid

    def test_metadata_matches_template(self, registry, ontology, holding_graph):
        record = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "holding", "object": "bottle"},
            holding_graph,
            0,
            ontology,
        )
        template = registry.templates["objRelExists"]
        assert record.structure == template.structure
        assert record.semantic == template.semantic
        assert record.reasoning == template.reasoning

    def test_mass_noun_has_no_article(self, registry, ontology):
        graph = make_graph(frames=[(1.0, {"food": {"eating"}})])
        record = instantiate(
            registry.templates["objExists"], {"object": "food"}, graph, 0, ontology
        )
        assert " a food" not in record.text and "food" in record.text

    def test_spatial_relationship_skips_verbal_frames(self, registry, ontology):
        graph = make_graph(frames=[(1.0, {"table": {"beneath"}})])
        record = instantiate(
            registry.templates["relExists"], {"relationship": "beneath"}, graph, 0, ontology
        )
        # only the copular frame fits a preposition
        assert record.text == "Was the person beneath something?"


class TestTemporalLocalization:
    def test_phrase_and_flag(self, registry, ontology):
        graph = make_graph(
            frames=[
                (2.0, {"phone": {"holding"}}),
                (8.0, {"phone": {"holding"}}),
            ],
            actions=[("putting a phone somewhere", 1.0, 5.0)],
        )
        base = instantiate(
            registry.templates["objWhat"], {"relationship": "holding"}, graph, 0, ontology
        )
        localized = add_temporal_localization(
            base, "after", "putting a phone somewhere", graph, registry, ontology
        )
        assert "after putting a phone somewhere" in localized.text
        assert localized.localization == "answer-unchanged"
        assert localized.direct_counterpart == base.qid
        assert localized.steps == base.steps + 2
        assert localized.indirect_kind == "temporal"

    def test_answer_changed_flag(self, registry, ontology):
        graph = make_graph(
            frames=[
                (0.5, {"phone": {"holding"}}),
                (8.0, {"bottle": {"holding"}}),
                (9.0, {"bottle": {"holding"}}),
            ],
            actions=[("putting a phone somewhere", 1.0, 5.0)],
        )
        base = instantiate(
            registry.templates["objLast"], {"relationship": "holding"}, graph, 0, ontology
        )
        assert base.answer == "bottle"
        localized = add_temporal_localization(
            base, "before", "putting a phone somewhere", graph, registry, ontology
        )
        assert localized.answer == "phone"
        assert localized.localization == "answer-changed"

    def test_absent_anchor_errors(self, registry, ontology, holding_graph):
        base = instantiate(
            registry.templates["objExists"], {"object": "bottle"}, holding_graph, 0, ontology
        )
        with pytest.raises(CompositionError):
            add_temporal_localization(
                base, "after", "opening a laptop", holding_graph, registry, ontology
            )

    def test_non_localizable_template_refuses(self, registry, ontology, holding_graph):
        record = instantiate(
            registry.templates["actExists"],
            {"action": "standing up"},
            holding_graph,
            0,
            ontology,
        )
        with pytest.raises(CompositionError):
            add_temporal_localization(
                record, "after", "putting a phone somewhere", holding_graph, registry, ontology
            )


class TestIndirect:
    def test_object_reference_composes(self, registry, ontology, holding_graph):
        base = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "twisting", "object": "bottle"},
            holding_graph,
            0,
            ontology,
        )
        ref = registry.indirect_refs["objectWithRelLast"]
        composed = add_indirect(
            base, ref, {"irel": "holding"}, "object", holding_graph, registry, ontology
        )
        assert "the last object they were holding" in composed.text
        assert composed.answer == base.answer
        assert composed.direct_counterpart == base.qid
        assert composed.steps == base.steps + 2
        assert composed.indirect_kind == "object"
        # counterpart answers agree when evaluated on the source graph
        assert (
            evaluate(composed.program, holding_graph).normalized()
            == evaluate(base.program, holding_graph).normalized()
        )

    def test_mismatched_resolution_rejected(self, registry, ontology, holding_graph):
        base = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "twisting", "object": "phone"},
            holding_graph,
            0,
            ontology,
        )
        ref = registry.indirect_refs["objectWithRelLast"]
        # last-held object is the bottle, not the phone
        with pytest.raises(CompositionError):
            add_indirect(
                base, ref, {"irel": "holding"}, "object", holding_graph, registry, ontology
            )

    def test_longest_action_reference(self, registry, ontology):
        graph = make_graph(
            duration=40.0,
            frames=[(2.0, {"phone": {"holding"}}), (20.0, {"phone": {"touching"}})],
            actions=[("standing up", 1.0, 3.0), ("watching television", 10.0, 30.0)],
        )
        base = instantiate(
            registry.templates["actTime"],
            {"action": "standing up", "action2": "watching television"},
            graph,
            0,
            ontology,
        )
        ref = registry.indirect_refs["longestAction"]
        composed = add_indirect(base, ref, {}, "action2", graph, registry, ontology)
        assert "the longest action" in composed.text
        assert composed.answer == base.answer == "before"

    def test_composition_on_composed_record_refused(self, registry, ontology, holding_graph):
        base = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "twisting", "object": "bottle"},
            holding_graph,
            0,
            ontology,
        )
        ref = registry.indirect_refs["objectWithRelLast"]
        composed = add_indirect(
            base, ref, {"irel": "holding"}, "object", holding_graph, registry, ontology
        )
        with pytest.raises(CompositionError):
            add_indirect(
                composed, ref, {"irel": "holding"}, "object", holding_graph, registry, ontology
            )


class TestRecordSerialization:
    def test_round_trip(self, registry, ontology, holding_graph):
        record = instantiate(
            registry.templates["objRelExists"],
            {"relationship": "holding", "object": "bottle"},
            holding_graph,
            0,
            ontology,
        )
        payload = json.loads(json.dumps(record.to_json()))
        again = QuestionRecord.from_json(payload)
        assert again.qid == record.qid
        assert again.program.root == record.program.root
        assert again.to_json() == record.to_json()


class TestNlg:
    def test_article_selection(self, ontology):
        assert nlg.object_surface("bottle", ontology) == "a bottle"
        assert nlg.object_surface("food", ontology) == "food"

    def test_verb_forms(self, ontology):
        assert nlg.relationship_surface("holding", ontology, "base") == "hold"
        assert nlg.relationship_surface("holding", ontology, "past") == "held"
        with pytest.raises(nlg.GrammarError):
            nlg.relationship_surface("beneath", ontology, "base")

    def test_action_forms(self, ontology):
        assert nlg.action_surface("standing up", ontology, "base") == "stand up"
        assert nlg.action_surface("standing up", ontology, "ing") == "standing up"
