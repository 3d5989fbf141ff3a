from __future__ import annotations

import copy
import json

import pytest

from tests.conftest import GOLDEN
from voiceclone.cloning import KnowledgeManual
from voiceclone.playbook import (
    LIST_MARKER_RE,
    PlaybookError,
    SECTION_HEADERS,
    SECTION_ORDER,
    export_finetune_dataset,
    Fact,
    lint_playbook,
    ObjectionTactic,
    parse_playbook,
    qa_pairs_to_jsonl,
    render_system_prompt,
    roundtrip,
    to_canonical_json,
)

SLOTS = {
    "agent_name": "Arisa",
    "agent_id": "A-100",
    "customer_plan": "standard 300 Mbps plan",
    "customer_tenure": "2019",
}


class TestRender:
    def test_golden_render_contains_name_and_no_markers(self, golden_playbook):
        text = render_system_prompt(golden_playbook, SLOTS)
        assert "Arisa" in text
        assert LIST_MARKER_RE.search(text) is None
        assert text == (GOLDEN / "rendered_prompt.txt").read_text(encoding="utf-8")

    def test_sections_appear_in_order(self, golden_playbook):
        text = render_system_prompt(golden_playbook, SLOTS)
        positions = [text.index(SECTION_HEADERS[s]) for s in SECTION_ORDER]
        assert positions == sorted(positions)

    def test_missing_slot_value_names_slot(self, golden_playbook):
        values = dict(SLOTS)
        del values["customer_plan"]
        with pytest.raises(PlaybookError, match="customer_plan"):
            render_system_prompt(golden_playbook, values)

    def test_render_is_pure(self, golden_playbook):
        a = render_system_prompt(golden_playbook, SLOTS)
        b = render_system_prompt(golden_playbook, SLOTS)
        assert a == b

    def test_all_slots_substituted(self, golden_playbook):
        text = render_system_prompt(golden_playbook, SLOTS)
        assert "{{" not in text and "}}" not in text


class TestLint:
    def test_golden_is_clean(self, golden_playbook):
        assert lint_playbook(golden_playbook) == []

    def test_empty_goal_is_ambiguous_objective(self, golden_playbook):
        playbook = copy.deepcopy(golden_playbook)
        playbook.role_definition.primary_goal = ""
        diagnostics = lint_playbook(playbook)
        assert [d.code for d in diagnostics] == ["AMBIGUOUS_OBJECTIVE"]
        assert diagnostics[0].severity == "error"

    def test_goal_without_actionable_verb(self, golden_playbook):
        playbook = copy.deepcopy(golden_playbook)
        playbook.role_definition.primary_goal = "Be helpful and nice on the phone."
        diagnostics = lint_playbook(playbook)
        assert [d.code for d in diagnostics] == ["AMBIGUOUS_OBJECTIVE"]

    def test_numbered_pitch_guidance_is_formatting_artefact(self, golden_playbook):
        playbook = copy.deepcopy(golden_playbook)
        for stage in playbook.conversation_flow:
            if stage.stage == "pitch":
                stage.guidance = "1. Say hello\n2. Pitch the product"
        diagnostics = lint_playbook(playbook)
        assert [(d.code, d.location) for d in diagnostics] == [
            ("FORMATTING_ARTEFACTS", "conversation_flow.pitch")
        ]

    def test_spoken_enumerator_phrase_detected(self, golden_playbook):
        playbook = copy.deepcopy(golden_playbook)
        playbook.persona_style[0] = "Point number two comes after point number one."
        assert any(d.code == "FORMATTING_ARTEFACTS" for d in lint_playbook(playbook))

    def test_duplicate_directive_is_redundant(self, golden_playbook):
        playbook = copy.deepcopy(golden_playbook)
        playbook.persona_style.append(playbook.persona_style[0])
        diagnostics = lint_playbook(playbook)
        assert [d.code for d in diagnostics] == ["REDUNDANT_INSTRUCTIONS"]
        assert diagnostics[0].severity == "warning"

    def test_politeness_flood_flagged(self, golden_playbook):
        playbook = copy.deepcopy(golden_playbook)
        playbook.persona_style.extend(
            [
                "Always remain extremely polite no matter what happens.",
                "Apologize whenever the customer sounds even slightly annoyed.",
                "Thank the customer repeatedly during every stage of the call.",
                "Be deferential if the customer wants to end the discussion.",
            ]
        )
        diagnostics = lint_playbook(playbook)
        assert [d.code for d in diagnostics] == ["OVERCAUTIOUS_POLITENESS"]

    def test_lint_deterministic_and_order_stable(self, golden_playbook):
        playbook = copy.deepcopy(golden_playbook)
        playbook.role_definition.primary_goal = ""
        playbook.persona_style.append(playbook.persona_style[0])
        first = lint_playbook(playbook)
        second = lint_playbook(playbook)
        assert first == second
        assert [d.code for d in first] == ["AMBIGUOUS_OBJECTIVE", "REDUNDANT_INSTRUCTIONS"]

    def test_lint_clean_playbook_renders_marker_free(self, golden_playbook):
        # Render/lint consistency on the golden and on a lightly edited variant.
        for playbook in (golden_playbook,):
            assert not [d for d in lint_playbook(playbook) if d.severity == "error"]
            text = render_system_prompt(playbook, SLOTS)
            assert LIST_MARKER_RE.search(text) is None


class TestRoundTrip:
    def test_golden_roundtrips_equal(self, golden_playbook):
        assert roundtrip(golden_playbook) == golden_playbook

    def test_canonical_json_is_stable(self, golden_playbook):
        assert to_canonical_json(golden_playbook) == to_canonical_json(
            roundtrip(golden_playbook)
        )

    def test_unknown_section_listed(self, golden_playbook):
        data = json.loads(to_canonical_json(golden_playbook))
        data["sales_targets"] = []
        with pytest.raises(PlaybookError, match="sales_targets"):
            parse_playbook(json.dumps(data))

    def test_reordered_stages_rejected(self, golden_playbook):
        data = json.loads(to_canonical_json(golden_playbook))
        flow = data["conversation_flow"]
        flow[0], flow[1] = flow[1], flow[0]
        with pytest.raises(PlaybookError, match="stage order"):
            parse_playbook(json.dumps(data))

    def test_missing_compliance_rejected(self, golden_playbook):
        data = json.loads(to_canonical_json(golden_playbook))
        del data["compliance_rules"]
        with pytest.raises(PlaybookError, match="compliance_rules"):
            parse_playbook(json.dumps(data))

    def test_removal_rule_required(self, golden_playbook):
        data = json.loads(to_canonical_json(golden_playbook))
        data["compliance_rules"] = ["Always be honest."]
        with pytest.raises(PlaybookError, match="removal"):
            parse_playbook(json.dumps(data))


def make_manual(n_facts=10, n_objections=3):
    return KnowledgeManual(
        topics={
            "price": [
                Fact(f"The plan costs {700 + i} baht per month.", [f"call-{i:04d}"])
                for i in range(n_facts)
            ]
        },
        objections=[
            ObjectionTactic(f"Objection variant {i} about cost.", f"Reassure with value point {i}.", ["call-0001"])
            for i in range(n_objections)
        ],
        closing_strategies=["Propose a concrete date."],
    )


class TestFinetuneExport:
    def test_capped_by_material(self):
        pairs = export_finetune_dataset(make_manual(n_facts=10, n_objections=3), target_n=50)
        product = [p for p in pairs if p.source["kind"] == "fact"]
        objection = [p for p in pairs if p.source["kind"] == "objection"]
        assert len(product) == 10
        assert len(objection) == 3

    def test_one_pair_per_objection_tactic(self):
        pairs = export_finetune_dataset(make_manual(n_objections=12), target_n=50)
        assert len([p for p in pairs if p.source["kind"] == "objection"]) == 12

    def test_target_caps_product_pairs(self):
        pairs = export_finetune_dataset(make_manual(n_facts=10), target_n=4)
        assert len([p for p in pairs if p.source["kind"] == "fact"]) == 4

    def test_deterministic_manual_order(self):
        manual = make_manual()
        a = export_finetune_dataset(manual, 50)
        b = export_finetune_dataset(manual, 50)
        assert a == b
        answers = [p.answer for p in a if p.source["kind"] == "fact"]
        assert answers == [f.statement for f in manual.topics["price"]]

    def test_zero_target_rejected(self):
        with pytest.raises(PlaybookError):
            export_finetune_dataset(make_manual(), target_n=0)

    def test_answers_grounded(self):
        manual = make_manual()
        statements = {f.statement for f in manual.topics["price"]}
        tactics = {o.tactic for o in manual.objections}
        for pair in export_finetune_dataset(manual, 50):
            assert pair.question and pair.answer
            assert pair.answer in statements | tactics

    def test_jsonl_shape(self):
        pairs = export_finetune_dataset(make_manual(n_facts=2, n_objections=1), 50)
        lines = qa_pairs_to_jsonl(pairs).strip().splitlines()
        assert len(lines) == 3
        for line in lines:
            obj = json.loads(line)
            assert set(obj) == {"question", "answer"}


# -- render/lint consistency property ----------------------------------------

from hypothesis import given, settings
from hypothesis import strategies as st

_prompt_text = st.text(
    alphabet="abcdefghijklmnop .,!?0123456789-•*)\n",
    min_size=1,
    max_size=60,
).filter(lambda s: s.strip())


@given(
    directives=st.lists(_prompt_text, min_size=1, max_size=4),
    guidance=_prompt_text,
    statement=_prompt_text,
)
@settings(max_examples=80, deadline=None)
def test_lint_clean_playbooks_render_marker_free(
    golden_playbook, directives, guidance, statement
):
    """If lint reports zero errors, the rendered prompt has zero marker hits."""
    playbook = copy.deepcopy(golden_playbook)
    playbook.persona_style = list(playbook.persona_style[:2]) + directives
    playbook.conversation_flow[1].guidance = guidance
    playbook.product_knowledge[0].statement = statement
    errors = [d for d in lint_playbook(playbook) if d.severity == "error"]
    if errors:
        return  # the defect was caught; nothing to check on the render side
    text = render_system_prompt(playbook, SLOTS)
    assert LIST_MARKER_RE.search(text) is None
