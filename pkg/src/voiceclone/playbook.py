"""The nine-section agent playbook: model, renderer, lints, exports.

A playbook is the structured system prompt for the cloned agent. It
serializes to canonical JSON (sorted keys, two-space indent, LF) so that
pipeline runs are byte-stable, renders to a prose-only prompt (list
markers leak into model speech, so none are allowed), and is checked by
four lints that encode the known prompt failure modes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

from .corpus import Turn

FLOW_STAGES = (
    "opening",
    "discovery",
    "pitch",
    "objection_handling",
    "closing_followup",
)

DIALOGUE_STAGES = ("opening", "value_proposition", "objection_handling", "closing")

SECTION_ORDER = (
    "role_definition",
    "persona_style",
    "conversation_flow",
    "objection_tactics",
    "product_knowledge",
    "terminology_rules",
    "example_dialogues",
    "compliance_rules",
    "context_slots",
)

SECTION_HEADERS = {
    "role_definition": "AGENT ROLE DEFINITION",
    "persona_style": "PERSONA AND COMMUNICATION STYLE",
    "conversation_flow": "CONVERSATION FLOW GUIDELINES",
    "objection_tactics": "OBJECTION HANDLING TACTICS",
    "product_knowledge": "PRODUCT AND SERVICE KNOWLEDGE",
    "terminology_rules": "TERMINOLOGY AND TONE",
    "example_dialogues": "EXAMPLE DIALOGUE",
    "compliance_rules": "COMPLIANCE RULES",
    "context_slots": "AGENT AND CUSTOMER CONTEXT",
}

_STAGE_LABELS = {
    "opening": "opening",
    "discovery": "discovery",
    "pitch": "pitch",
    "objection_handling": "objection handling",
    "closing_followup": "closing and follow-up",
}

_DIALOGUE_LABELS = {
    "opening": "an opening",
    "value_proposition": "a value proposition",
    "objection_handling": "an objection handling",
    "closing": "a closing",
}

MAX_DIALOGUE_TURNS = 8

# Leading enumerators or bullets on any line (terminated by whitespace or
# the line end), or the spoken leak phrase.
LIST_MARKER_RE = re.compile(r"(?m)^[ \t]*(?:\d+[.)]|[•\-\*])(?:\s|$)|Point number")

SLOT_RE = re.compile(r"\{\{(\w+)\}\}")

_REMOVAL_RULE_RE = re.compile(r"remove.{0,60}call list|call list.{0,40}remov", re.IGNORECASE)
_CLOSING_PHRASE_RULE_RE = re.compile(r"closing phrase", re.IGNORECASE)

_POLITENESS_RE = re.compile(
    r"\b(polite(?:ly|ness)?|courteous(?:ly)?|apolog\w+|deferential|humbl\w+|sorry)\b"
    r"|thank the customer|always thank",
    re.IGNORECASE,
)
_STEERING_RE = re.compile(
    r"\b(steer|redirect|refocus)\b|back on track|guide the conversation"
    r"|regain control|return the conversation",
    re.IGNORECASE,
)


class PlaybookError(Exception):
    """Structural or contract violation in a playbook value or file."""


@dataclass
class Fact:
    statement: str
    source_call_ids: list[str]

    def to_dict(self) -> dict[str, Any]:
        return {"statement": self.statement, "source_call_ids": list(self.source_call_ids)}


@dataclass
class ObjectionTactic:
    objection: str
    tactic: str
    source_call_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "objection": self.objection,
            "tactic": self.tactic,
            "source_call_ids": list(self.source_call_ids),
        }


@dataclass
class ExampleDialogue:
    stage: str
    turns: list[Turn]
    source_call_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "turns": [t.to_dict() for t in self.turns],
            "source_call_ids": list(self.source_call_ids),
        }


@dataclass
class RoleDefinition:
    agent_name: str
    company: str
    product: str
    primary_goal: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "agent_name": self.agent_name,
            "company": self.company,
            "product": self.product,
            "primary_goal": self.primary_goal,
        }


@dataclass
class FlowStage:
    stage: str
    guidance: str

    def to_dict(self) -> dict[str, Any]:
        return {"stage": self.stage, "guidance": self.guidance}


@dataclass
class TerminologyRule:
    jargon: str
    replacement: str

    def to_dict(self) -> dict[str, Any]:
        return {"jargon": self.jargon, "replacement": self.replacement}


@dataclass
class ContextSlots:
    agent_name_slot: str = "agent_name"
    agent_id_slot: str = "agent_id"
    customer_plan_slot: str | None = None
    customer_tenure_slot: str | None = None

    def declared(self) -> list[tuple[str, str]]:
        """(field, slot name) pairs for every slot this playbook uses."""
        pairs = [
            ("agent_name_slot", self.agent_name_slot),
            ("agent_id_slot", self.agent_id_slot),
        ]
        if self.customer_plan_slot:
            pairs.append(("customer_plan_slot", self.customer_plan_slot))
        if self.customer_tenure_slot:
            pairs.append(("customer_tenure_slot", self.customer_tenure_slot))
        return pairs

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "agent_name_slot": self.agent_name_slot,
            "agent_id_slot": self.agent_id_slot,
        }
        if self.customer_plan_slot:
            out["customer_plan_slot"] = self.customer_plan_slot
        if self.customer_tenure_slot:
            out["customer_tenure_slot"] = self.customer_tenure_slot
        return out


@dataclass
class ComplianceRules:
    """Mandatory hard constraints fed into playbook composition."""

    closing_phrase: str
    removal_rule: str = (
        "If the customer asks to stop receiving calls, confirm that you will remove "
        "them from the call list immediately and do so."
    )
    extra_rules: list[str] = field(default_factory=list)

    def as_rule_list(self) -> list[str]:
        rules = [
            "Only discuss the product and offers you have been given; never invent "
            "promotions, prices or guarantees that are not approved.",
            self.removal_rule,
            f'End every call with the required company closing phrase: "{self.closing_phrase}"',
        ]
        rules.extend(self.extra_rules)
        return rules


@dataclass
class AgentPlaybook:
    role_definition: RoleDefinition
    persona_style: list[str]
    conversation_flow: list[FlowStage]
    objection_tactics: list[ObjectionTactic]
    product_knowledge: list[Fact]
    terminology_rules: list[TerminologyRule]
    example_dialogues: list[ExampleDialogue]
    compliance_rules: list[str]
    context_slots: ContextSlots

    def to_dict(self) -> dict[str, Any]:
        return {
            "role_definition": self.role_definition.to_dict(),
            "persona_style": list(self.persona_style),
            "conversation_flow": [s.to_dict() for s in self.conversation_flow],
            "objection_tactics": [o.to_dict() for o in self.objection_tactics],
            "product_knowledge": [f.to_dict() for f in self.product_knowledge],
            "terminology_rules": [t.to_dict() for t in self.terminology_rules],
            "example_dialogues": [d.to_dict() for d in self.example_dialogues],
            "compliance_rules": list(self.compliance_rules),
            "context_slots": self.context_slots.to_dict(),
        }


@dataclass
class LintDiagnostic:
    code: str
    severity: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}\t{self.location}\t{self.message}"


@dataclass
class QaPair:
    question: str
    answer: str
    source: dict[str, Any]


@dataclass
class LintOptions:
    goal_verbs: tuple[str, ...] = (
        "book",
        "schedule",
        "secure",
        "close",
        "confirm",
        "obtain",
        "win",
    )
    redundancy_threshold: float = 0.8
    politeness_ratio: float = 3.0


# --------------------------------------------------------------------------
# Validation and canonical serialization


def validate_playbook(playbook: AgentPlaybook) -> list[str]:
    """Structural invariants; an empty list means the playbook is well-formed."""
    problems: list[str] = []
    stages = tuple(s.stage for s in playbook.conversation_flow)
    if stages != FLOW_STAGES:
        problems.append("stage order: conversation_flow must contain exactly "
                        f"{', '.join(FLOW_STAGES)} in that order")
    if not playbook.role_definition.primary_goal.strip():
        problems.append("role_definition.primary_goal is empty")
    if not any(_REMOVAL_RULE_RE.search(r) for r in playbook.compliance_rules):
        problems.append("compliance_rules lack a call-list removal rule")
    if not any(_CLOSING_PHRASE_RULE_RE.search(r) for r in playbook.compliance_rules):
        problems.append("compliance_rules lack the required closing phrase")
    for i, dialogue in enumerate(playbook.example_dialogues):
        where = f"example_dialogues[{i}]"
        if dialogue.stage not in DIALOGUE_STAGES:
            problems.append(f"{where}: unknown stage '{dialogue.stage}'")
        if len(dialogue.turns) > MAX_DIALOGUE_TURNS:
            problems.append(f"{where}: more than {MAX_DIALOGUE_TURNS} turns")
        if not dialogue.turns:
            problems.append(f"{where}: empty dialogue")
        elif dialogue.stage in ("opening", "closing") and dialogue.turns[0].speaker != "agent":
            problems.append(f"{where}: {dialogue.stage} dialogue must start with the agent")
    for i, fact in enumerate(playbook.product_knowledge):
        if not fact.source_call_ids:
            problems.append(f"product_knowledge[{i}]: fact cites no source call")
    declared = {slot for _, slot in playbook.context_slots.declared()}
    for path, text in _iter_section_texts(playbook):
        for match in SLOT_RE.finditer(text):
            if match.group(1) not in declared:
                problems.append(f"{path}: undeclared slot placeholder {match.group(0)}")
    return problems


def to_canonical_json(playbook: AgentPlaybook) -> str:
    return json.dumps(playbook.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _str_list(value: Any, where: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise PlaybookError(f"{where}: expected a list of strings")
    return list(value)


def _obj_list(value: Any, where: str) -> list[dict]:
    if not isinstance(value, list) or not all(isinstance(v, dict) for v in value):
        raise PlaybookError(f"{where}: expected a list of objects")
    return list(value)


def playbook_from_dict(data: dict[str, Any]) -> AgentPlaybook:
    if not isinstance(data, dict):
        raise PlaybookError("playbook must be a JSON object")
    unknown = sorted(set(data) - set(SECTION_ORDER))
    if unknown:
        raise PlaybookError(f"unknown section(s): {', '.join(unknown)}")
    missing = [s for s in SECTION_ORDER if s not in data]
    if missing:
        raise PlaybookError(f"missing section(s): {', '.join(missing)}")

    role_raw = data["role_definition"]
    if not isinstance(role_raw, dict) or set(role_raw) != {
        "agent_name",
        "company",
        "product",
        "primary_goal",
    }:
        raise PlaybookError("role_definition: wrong fields")
    role = RoleDefinition(**role_raw)

    flow = [
        FlowStage(stage=str(item.get("stage", "")), guidance=str(item.get("guidance", "")))
        for item in _obj_list(data["conversation_flow"], "conversation_flow")
    ]
    tactics = [
        ObjectionTactic(
            objection=str(item.get("objection", "")),
            tactic=str(item.get("tactic", "")),
            source_call_ids=_str_list(item.get("source_call_ids", []), "objection_tactics"),
        )
        for item in _obj_list(data["objection_tactics"], "objection_tactics")
    ]
    facts = [
        Fact(
            statement=str(item.get("statement", "")),
            source_call_ids=_str_list(item.get("source_call_ids", []), "product_knowledge"),
        )
        for item in _obj_list(data["product_knowledge"], "product_knowledge")
    ]
    terminology = [
        TerminologyRule(
            jargon=str(item.get("jargon", "")), replacement=str(item.get("replacement", ""))
        )
        for item in _obj_list(data["terminology_rules"], "terminology_rules")
    ]
    dialogues = []
    for item in _obj_list(data["example_dialogues"], "example_dialogues"):
        turns = [
            Turn(
                speaker=str(t.get("speaker", "")),
                text=str(t.get("text", "")),
                start_ms=int(t.get("start_ms", 0)),
                end_ms=int(t.get("end_ms", 0)),
            )
            for t in item.get("turns", [])
        ]
        dialogues.append(
            ExampleDialogue(
                stage=str(item.get("stage", "")),
                turns=turns,
                source_call_ids=_str_list(item.get("source_call_ids", []), "example_dialogues"),
            )
        )

    slots_raw = data["context_slots"]
    allowed_slots = {
        "agent_name_slot",
        "agent_id_slot",
        "customer_plan_slot",
        "customer_tenure_slot",
    }
    if not isinstance(slots_raw, dict) or not set(slots_raw) <= allowed_slots:
        raise PlaybookError("context_slots: wrong fields")
    if "agent_name_slot" not in slots_raw or "agent_id_slot" not in slots_raw:
        raise PlaybookError("context_slots: agent_name_slot and agent_id_slot are required")
    slots = ContextSlots(**slots_raw)

    playbook = AgentPlaybook(
        role_definition=role,
        persona_style=_str_list(data["persona_style"], "persona_style"),
        conversation_flow=flow,
        objection_tactics=tactics,
        product_knowledge=facts,
        terminology_rules=terminology,
        example_dialogues=dialogues,
        compliance_rules=_str_list(data["compliance_rules"], "compliance_rules"),
        context_slots=slots,
    )
    problems = validate_playbook(playbook)
    if problems:
        raise PlaybookError("; ".join(problems))
    return playbook


def parse_playbook(text: str) -> AgentPlaybook:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlaybookError(f"invalid JSON: {exc.msg}") from exc
    return playbook_from_dict(data)


def roundtrip(playbook: AgentPlaybook) -> AgentPlaybook:
    """Serialize to canonical JSON and parse back; the result is structurally equal."""
    return parse_playbook(to_canonical_json(playbook))


# --------------------------------------------------------------------------
# Rendering


def required_slots(playbook: AgentPlaybook) -> list[tuple[str, str]]:
    return playbook.context_slots.declared()


def render_system_prompt(playbook: AgentPlaybook, slot_values: dict[str, str]) -> str:
    """Render the playbook to the prose system prompt.

    All declared slots must be covered by slot_values; the output carries
    no list markers and contains the nine sections in fixed order.
    """
    for field_name, slot in required_slots(playbook):
        if slot not in slot_values or not str(slot_values[slot]).strip():
            raise PlaybookError(f"missing slot value for {field_name} ({{{{{slot}}}}})")

    role = playbook.role_definition
    parts: list[str] = []

    parts.append(SECTION_HEADERS["role_definition"])
    parts.append(
        f"You are {role.agent_name}, a virtual telesales agent calling on behalf of "
        f"{_collapse(role.company)} to tell customers about the {_collapse(role.product)}. "
        f"Your primary goal: {_prose(role.primary_goal)}"
    )

    parts.append(SECTION_HEADERS["persona_style"])
    parts.append(
        "Carry this manner through the whole call. "
        + " ".join(_prose(d) for d in playbook.persona_style)
    )

    parts.append(SECTION_HEADERS["conversation_flow"])
    flow_sentences = [
        f"During the {_STAGE_LABELS[s.stage]} stage, {_lower_first(_prose(s.guidance))}"
        for s in playbook.conversation_flow
    ]
    parts.append(" ".join(flow_sentences))

    parts.append(SECTION_HEADERS["objection_tactics"])
    tactic_sentences = [
        f'{_prose(t.objection)} A good response: "{_collapse(t.tactic)}"'
        for t in playbook.objection_tactics
    ]
    parts.append(
        "Handle pushback with the tactics that follow. " + " ".join(tactic_sentences)
        if tactic_sentences
        else "Acknowledge any concern, answer it with concrete value, and stay positive."
    )

    parts.append(SECTION_HEADERS["product_knowledge"])
    fact_sentences = [_prose(f.statement) for f in playbook.product_knowledge]
    parts.append(
        "You may state the following facts and nothing beyond them. " + " ".join(fact_sentences)
        if fact_sentences
        else "Only state facts you have been given."
    )

    parts.append(SECTION_HEADERS["terminology_rules"])
    term_sentences = [
        f'Avoid the internal term "{_collapse(t.jargon)}"; say "{_collapse(t.replacement)}" instead.'
        for t in playbook.terminology_rules
    ]
    parts.append(
        " ".join(term_sentences)
        if term_sentences
        else "Use plain, customer-friendly language and avoid internal jargon."
    )

    parts.append(SECTION_HEADERS["example_dialogues"])
    for dialogue in playbook.example_dialogues:
        lines = [f"Here is {_DIALOGUE_LABELS[dialogue.stage]} example, kept brief on purpose:"]
        for turn in dialogue.turns:
            speaker = "Agent" if turn.speaker == "agent" else "Customer"
            lines.append(f'{speaker}: "{_collapse(turn.text)}"')
        parts.append("\n".join(lines))
    if not playbook.example_dialogues:
        parts.append("No example dialogue is provided for this campaign.")

    parts.append(SECTION_HEADERS["compliance_rules"])
    parts.append(
        "These rules are absolute. "
        + " ".join(_prose(r) for r in playbook.compliance_rules)
    )

    parts.append(SECTION_HEADERS["context_slots"])
    slots = playbook.context_slots
    context_sentences = [
        f"You are calling as {{{{{slots.agent_name_slot}}}}} with agent ID "
        f"{{{{{slots.agent_id_slot}}}}}."
    ]
    if slots.customer_plan_slot:
        context_sentences.append(
            f"The customer currently uses the {{{{{slots.customer_plan_slot}}}}}."
        )
    if slots.customer_tenure_slot:
        context_sentences.append(
            f"The customer has been with {role.company} since "
            f"{{{{{slots.customer_tenure_slot}}}}}, so loyalty offers may apply."
        )
    parts.append(" ".join(context_sentences))

    text = "\n\n".join(parts) + "\n"

    def _substitute(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in slot_values:
            raise PlaybookError(f"missing slot value for {{{{{name}}}}}")
        return str(slot_values[name])

    return SLOT_RE.sub(_substitute, text)


def _collapse(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def _prose(text: str) -> str:
    """Single-line sentence form: collapsed whitespace, terminal punctuation."""
    text = _collapse(text)
    if text and text[-1] not in ".!?\"":
        text += "."
    return text


def _lower_first(text: str) -> str:
    return text[0].lower() + text[1:] if text else text


# --------------------------------------------------------------------------
# Lints


def _iter_section_texts(playbook: AgentPlaybook) -> Iterator[tuple[str, str]]:
    role = playbook.role_definition
    yield "role_definition.agent_name", role.agent_name
    yield "role_definition.company", role.company
    yield "role_definition.product", role.product
    yield "role_definition.primary_goal", role.primary_goal
    for i, directive in enumerate(playbook.persona_style):
        yield f"persona_style[{i}]", directive
    for stage in playbook.conversation_flow:
        yield f"conversation_flow.{stage.stage}", stage.guidance
    for i, tactic in enumerate(playbook.objection_tactics):
        yield f"objection_tactics[{i}].objection", tactic.objection
        yield f"objection_tactics[{i}].tactic", tactic.tactic
    for i, fact in enumerate(playbook.product_knowledge):
        yield f"product_knowledge[{i}].statement", fact.statement
    for i, rule in enumerate(playbook.terminology_rules):
        yield f"terminology_rules[{i}].replacement", rule.replacement
    for i, dialogue in enumerate(playbook.example_dialogues):
        for j, turn in enumerate(dialogue.turns):
            yield f"example_dialogues[{i}].turns[{j}]", turn.text
    for i, rule in enumerate(playbook.compliance_rules):
        yield f"compliance_rules[{i}]", rule


def _trigrams(text: str) -> set[tuple[str, ...]]:
    words = re.findall(r"[a-z0-9']+", text.lower())
    return {tuple(words[i : i + 3]) for i in range(len(words) - 2)}


def _overlap(a: str, b: str) -> float:
    ta, tb = _trigrams(a), _trigrams(b)
    if not ta or not tb:
        # Too short for 3-grams: only exact duplicates count.
        return 1.0 if a.strip().lower() == b.strip().lower() and a.strip() else 0.0
    return len(ta & tb) / min(len(ta), len(tb))


def lint_playbook(
    playbook: AgentPlaybook, options: LintOptions | None = None
) -> list[LintDiagnostic]:
    """Check the four known prompt failure modes.

    Errors: AMBIGUOUS_OBJECTIVE (goal empty or with no actionable verb),
    FORMATTING_ARTEFACTS (list markers in any section text).
    Warnings: REDUNDANT_INSTRUCTIONS (directive pairs with >= threshold
    3-gram overlap), OVERCAUTIOUS_POLITENESS (politeness directives
    outnumber steering material beyond the configured ratio).
    """
    options = options or LintOptions()
    diagnostics: list[LintDiagnostic] = []

    goal = playbook.role_definition.primary_goal.strip()
    goal_words = set(re.findall(r"[a-z]+", goal.lower()))
    if not goal:
        diagnostics.append(
            LintDiagnostic(
                "AMBIGUOUS_OBJECTIVE",
                "error",
                "role_definition.primary_goal",
                "primary goal is empty",
            )
        )
    elif not goal_words & set(options.goal_verbs):
        diagnostics.append(
            LintDiagnostic(
                "AMBIGUOUS_OBJECTIVE",
                "error",
                "role_definition.primary_goal",
                f"primary goal lacks an actionable verb (expected one of: "
                f"{', '.join(options.goal_verbs)})",
            )
        )

    directives: list[tuple[str, str]] = []
    for i, text in enumerate(playbook.persona_style):
        directives.append((f"persona_style[{i}]", text))
    for stage in playbook.conversation_flow:
        directives.append((f"conversation_flow.{stage.stage}", stage.guidance))
    for i, rule in enumerate(playbook.compliance_rules):
        directives.append((f"compliance_rules[{i}]", rule))
    for a in range(len(directives)):
        for b in range(a + 1, len(directives)):
            score = _overlap(directives[a][1], directives[b][1])
            if score >= options.redundancy_threshold:
                diagnostics.append(
                    LintDiagnostic(
                        "REDUNDANT_INSTRUCTIONS",
                        "warning",
                        directives[b][0],
                        f"overlaps {directives[a][0]} "
                        f"({score:.2f} three-gram overlap)",
                    )
                )

    seen_paths: set[str] = set()
    for path, text in _iter_section_texts(playbook):
        if LIST_MARKER_RE.search(text) and path not in seen_paths:
            seen_paths.add(path)
            diagnostics.append(
                LintDiagnostic(
                    "FORMATTING_ARTEFACTS",
                    "error",
                    path,
                    "section text carries list markers that leak into speech",
                )
            )

    politeness = sum(1 for d in playbook.persona_style if _POLITENESS_RE.search(d))
    steering_texts: list[str] = list(playbook.persona_style)
    steering_texts.extend(s.guidance for s in playbook.conversation_flow)
    for dialogue in playbook.example_dialogues:
        steering_texts.extend(t.text for t in dialogue.turns if t.speaker == "agent")
    steering = sum(1 for t in steering_texts if _STEERING_RE.search(t))
    if politeness > options.politeness_ratio * steering:
        diagnostics.append(
            LintDiagnostic(
                "OVERCAUTIOUS_POLITENESS",
                "warning",
                "persona_style",
                f"{politeness} politeness directive(s) against {steering} steering "
                f"example(s) exceeds the {options.politeness_ratio:g}x ratio",
            )
        )

    order = {"AMBIGUOUS_OBJECTIVE": 0, "REDUNDANT_INSTRUCTIONS": 1,
             "FORMATTING_ARTEFACTS": 2, "OVERCAUTIOUS_POLITENESS": 3}
    diagnostics.sort(key=lambda d: order[d.code])
    return diagnostics


# --------------------------------------------------------------------------
# Fine-tune export


def export_finetune_dataset(manual: "KnowledgeManual", target_n: int = 50) -> list[QaPair]:
    """Q&A pairs grounded in the knowledge manual.

    Up to target_n product pairs (facts in manual order) plus one pair per
    objection tactic; every answer traces back to its manual entry.
    """
    from .cloning import KnowledgeManual  # local import to avoid a cycle

    assert isinstance(manual, KnowledgeManual)
    if target_n <= 0:
        raise PlaybookError("target_n must be positive")
    if not manual.topics and not manual.objections:
        raise PlaybookError("empty knowledge manual")

    pairs: list[QaPair] = []
    for topic, facts in manual.topics.items():
        for i, fact in enumerate(facts):
            if len(pairs) >= target_n:
                break
            question = (
                f"What should I know about {topic}?"
                if i == 0
                else f"What else can you tell me about {topic}?"
            )
            pairs.append(
                QaPair(
                    question=question,
                    answer=fact.statement,
                    source={"kind": "fact", "topic": topic, "index": i},
                )
            )
        if len(pairs) >= target_n:
            break

    for i, tactic in enumerate(manual.objections):
        pairs.append(
            QaPair(
                question=(
                    "How should you respond when a customer raises this objection: "
                    f"{tactic.objection}"
                ),
                answer=tactic.tactic,
                source={"kind": "objection", "index": i},
            )
        )
    return pairs


def qa_pairs_to_jsonl(pairs: Iterable[QaPair]) -> str:
    lines = [
        json.dumps({"question": p.question, "answer": p.answer}, ensure_ascii=False)
        for p in pairs
    ]
    return "\n".join(lines) + ("\n" if lines else "")
