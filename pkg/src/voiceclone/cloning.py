"""Cloning pipeline: from a call corpus to a composed agent playbook.

Stages: sample calls, rank agents into top/average tiers, pick exemplar
calls, draft the job description, extract the knowledge manual per topic,
distill example dialogues, and compose everything into the playbook.
With the mock extractor the whole pipeline is a deterministic function of
(corpus, config, seed), which the golden-file tests rely on.
"""

from __future__ import annotations

import json
import os
import random
import re
import statistics
from dataclasses import dataclass, field

from .config import AppConfig, CloningConfig, PlaybookConfig
from .corpus import CallRecord, Corpus, Turn, median_duration_ms
from .extraction import (
    INSTRUCTION_DIALOGUES,
    INSTRUCTION_JOB_DESCRIPTION,
    ExtractionError,
    ExternalTextModel,
    MockExtractor,
    TextModelAdapter,
    instruction_knowledge,
)
from .playbook import (
    AgentPlaybook,
    ComplianceRules,
    ContextSlots,
    ExampleDialogue,
    Fact,
    FlowStage,
    ObjectionTactic,
    PlaybookError,
    RoleDefinition,
    TerminologyRule,
    lint_playbook,
    validate_playbook,
)

WIN_OUTCOMES = ("sale", "appointment")


class CloningError(Exception):
    """Pipeline precondition or invariant failure."""


@dataclass
class AgentTier:
    agent_id: str
    quality_score: float
    tier: str  # "top" | "average"


@dataclass
class JobDescription:
    tasks: list[str]
    responsibilities: list[str]
    style_notes: list[str]
    source_call_ids: list[str]
    product: str = "service"
    primary_goal: str | None = None


@dataclass
class KnowledgeManual:
    topics: dict[str, list[Fact]]
    objections: list[ObjectionTactic]
    closing_strategies: list[str]

    def all_facts(self) -> list[Fact]:
        return [fact for facts in self.topics.values() for fact in facts]


# --------------------------------------------------------------------------
# Sampling and ranking


def _seeded_sample(records: list[CallRecord], n: int, seed: int) -> list[CallRecord]:
    """Fisher-Yates draw over records ordered by call_id; stable per seed."""
    pool = sorted(records, key=lambda r: r.call_id)
    rng = random.Random(seed)
    picked: list[CallRecord] = []
    for _ in range(min(n, len(pool))):
        picked.append(pool.pop(rng.randrange(len(pool))))
    return picked


def sample_calls(corpus: Corpus, n: int, seed: int) -> list[CallRecord]:
    if n < 1:
        raise CloningError("sample size must be >= 1")
    if not corpus.records:
        raise CloningError("empty corpus")
    if n >= len(corpus.records):
        return sorted(corpus.records, key=lambda r: r.call_id)
    return _seeded_sample(corpus.records, n, seed)


def tier_agents(
    corpus: Corpus,
    threshold: float,
    weights: tuple[float, float] = (0.8, 0.2),
) -> list[AgentTier]:
    """Score every agent and split into top vs. average at the threshold.

    score = w_conv * conversion_rate + w_dur * duration_consistency, where
    conversion_rate counts sale/appointment outcomes and
    duration_consistency is 1 minus the agent's mean-duration deviation
    from the corpus median (normalized by the median, clamped to [0, 1]).
    """
    if not 0.0 <= threshold <= 1.0:
        raise CloningError("threshold must be in [0, 1]")
    if not corpus.records:
        raise CloningError("empty corpus")
    w_conv, w_dur = weights
    median = median_duration_ms(corpus.records)
    tiers = []
    for agent_id, calls in sorted(corpus.by_agent().items()):
        wins = sum(1 for c in calls if c.outcome in WIN_OUTCOMES)
        conversion = wins / len(calls)
        mean_duration = statistics.fmean(c.duration_ms for c in calls)
        consistency = max(0.0, 1.0 - abs(mean_duration - median) / median)
        score = w_conv * conversion + w_dur * consistency
        tiers.append(
            AgentTier(
                agent_id=agent_id,
                quality_score=score,
                tier="top" if score >= threshold else "average",
            )
        )
    return tiers


def exemplar_order_key(record: CallRecord) -> tuple[int, int, str]:
    """Total order: winning outcomes first, longer calls first, id as tie-break."""
    return (
        0 if record.outcome in WIN_OUTCOMES else 1,
        -record.duration_ms,
        record.call_id,
    )


def select_exemplars(corpus: Corpus, tiers: list[AgentTier], k: int) -> list[CallRecord]:
    if k < 1:
        raise CloningError("k must be >= 1")
    top_agents = {t.agent_id for t in tiers if t.tier == "top"}
    if not top_agents:
        raise CloningError("no top tier")
    candidates = [r for r in corpus.records if r.agent_id in top_agents]
    return sorted(candidates, key=exemplar_order_key)[:k]


# --------------------------------------------------------------------------
# Extraction steps


def render_transcript(record: CallRecord) -> str:
    return "\n".join(f"{t.speaker}: {t.text}" for t in record.turns)


_LEADING_MARKER_RE = re.compile(r"(?m)^[ \t]*(?:\d+[.)]|[•\-\*])\s+")


def _clean(text: str) -> str:
    """Normalize extractor text for prompt use: no leading markers, one line."""
    text = _LEADING_MARKER_RE.sub("", text)
    return re.sub(r"\s+", " ", text).strip()


def _parse_adapter_json(raw: str) -> dict:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ExtractionError(f"adapter returned unparseable output: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ExtractionError("adapter returned non-object output")
    return data


def _map_sources(sources: object, calls: list[CallRecord], where: str) -> list[str]:
    if not isinstance(sources, list) or not sources:
        raise ExtractionError(f"{where}: missing source indexes")
    ids = []
    for idx in sources:
        if not isinstance(idx, int) or not 0 <= idx < len(calls):
            raise ExtractionError(f"{where}: source index {idx!r} out of range")
        ids.append(calls[idx].call_id)
    return sorted(set(ids))


def _items(data: dict, key: str, calls: list[CallRecord]) -> list[tuple[str, list[str]]]:
    out = []
    for i, item in enumerate(data.get(key) or []):
        if not isinstance(item, dict) or "text" not in item:
            raise ExtractionError(f"{key}[{i}]: malformed item")
        out.append((_clean(str(item["text"])), _map_sources(item.get("sources"), calls, f"{key}[{i}]")))
    return out


def draft_job_description(
    calls: list[CallRecord], model: TextModelAdapter
) -> JobDescription:
    if not calls:
        raise CloningError("no calls to draft a job description from")
    raw = model.complete(INSTRUCTION_JOB_DESCRIPTION, [render_transcript(c) for c in calls])
    data = _parse_adapter_json(raw)

    tasks = _items(data, "tasks", calls)
    responsibilities = _items(data, "responsibilities", calls)
    style_notes = _items(data, "style_notes", calls)
    if not tasks or not responsibilities or not style_notes:
        raise ExtractionError("job description is missing a required list")

    source_ids: set[str] = set()
    for _, ids in tasks + responsibilities + style_notes:
        source_ids.update(ids)

    product = "service"
    if isinstance(data.get("product"), dict):
        product = _clean(str(data["product"].get("text", ""))) or "service"

    primary_goal = None
    goal_raw = data.get("primary_goal")
    if isinstance(goal_raw, dict) and goal_raw.get("text"):
        primary_goal = _clean(str(goal_raw["text"]))
        source_ids.update(_map_sources(goal_raw.get("sources"), calls, "primary_goal"))

    return JobDescription(
        tasks=[t for t, _ in tasks],
        responsibilities=[t for t, _ in responsibilities],
        style_notes=[t for t, _ in style_notes],
        source_call_ids=sorted(source_ids),
        product=product,
        primary_goal=primary_goal,
    )


def extract_knowledge(
    calls_by_topic: dict[str, list[CallRecord]], model: TextModelAdapter
) -> KnowledgeManual:
    """Run per-topic extraction and merge; output is keyed and sorted by topic,
    so it does not depend on per-topic completion order."""
    if not calls_by_topic:
        raise CloningError("no topics to extract")
    for topic, calls in calls_by_topic.items():
        if not calls:
            raise CloningError(f"topic '{topic}' has zero calls")

    topics: dict[str, list[Fact]] = {}
    objections: dict[str, ObjectionTactic] = {}
    strategies: list[str] = []
    for topic in sorted(calls_by_topic):
        calls = calls_by_topic[topic]
        raw = model.complete(instruction_knowledge(topic), [render_transcript(c) for c in calls])
        data = _parse_adapter_json(raw)

        facts = []
        for i, item in enumerate(data.get("facts") or []):
            if not isinstance(item, dict) or "statement" not in item:
                raise ExtractionError(f"facts[{i}]: malformed item")
            facts.append(
                Fact(
                    statement=_clean(str(item["statement"])),
                    source_call_ids=_map_sources(item.get("sources"), calls, f"facts[{i}]"),
                )
            )
        topics[topic] = facts

        for i, item in enumerate(data.get("objections") or []):
            if not isinstance(item, dict) or "objection" not in item or "tactic" not in item:
                raise ExtractionError(f"objections[{i}]: malformed item")
            objection = _clean(str(item["objection"]))
            ids = _map_sources(item.get("sources"), calls, f"objections[{i}]")
            if objection in objections:
                merged = sorted(set(objections[objection].source_call_ids) | set(ids))
                objections[objection].source_call_ids = merged
            else:
                objections[objection] = ObjectionTactic(
                    objection=objection,
                    tactic=_clean(str(item["tactic"])),
                    source_call_ids=ids,
                )

        for text, _ in _items(data, "closing_strategies", calls):
            if text not in strategies:
                strategies.append(text)

    return KnowledgeManual(
        topics=topics,
        objections=[objections[k] for k in sorted(objections)],
        closing_strategies=strategies,
    )


def generate_example_dialogues(
    calls: list[CallRecord], model: TextModelAdapter
) -> list[ExampleDialogue]:
    if not calls:
        raise CloningError("no calls to distill dialogues from")
    raw = model.complete(INSTRUCTION_DIALOGUES, [render_transcript(c) for c in calls])
    data = _parse_adapter_json(raw)

    dialogues = []
    for i, item in enumerate(data.get("dialogues") or []):
        if not isinstance(item, dict):
            raise ExtractionError(f"dialogues[{i}]: malformed item")
        turns = [
            Turn(
                speaker=str(t.get("speaker", "")),
                text=_clean(str(t.get("text", ""))),
                start_ms=0,
                end_ms=0,
            )
            for t in item.get("turns") or []
        ]
        dialogues.append(
            ExampleDialogue(
                stage=str(item.get("stage", "")),
                turns=turns[: 8],
                source_call_ids=_map_sources(item.get("sources"), calls, f"dialogues[{i}]"),
            )
        )
    return dialogues


# --------------------------------------------------------------------------
# Composition


_FLOW_GUIDANCE = {
    "opening": (
        "Introduce yourself and the company, state why you are calling, and confirm "
        "it is a good time to talk before going further."
    ),
    "discovery": (
        "Ask one or two short questions to learn how the customer uses the service "
        "today and what matters to them."
    ),
    "pitch": (
        "Present at least two concrete benefits of the offer, chosen to match what "
        "the customer told you during discovery."
    ),
    "objection_handling": (
        "Acknowledge the concern first, answer it with empathy and a concrete point "
        "of value, and if the customer rambles, gently steer the conversation back "
        "on track."
    ),
    "closing_followup": (
        "Politely attempt to schedule the installation or, failing that, agree a "
        "specific follow-up, and thank the customer for their time either way."
    ),
}

_BASE_PERSONA = (
    "Sound warm and friendly while staying professional.",
    "Use clear, simple vocabulary the customer can follow.",
    "Address the customer by name to build rapport.",
    "Show empathy before answering any concern, and never push.",
)


def compose_playbook(
    jd: JobDescription,
    manual: KnowledgeManual,
    dialogues: list[ExampleDialogue],
    compliance: ComplianceRules,
    context: ContextSlots,
    config: PlaybookConfig | None = None,
) -> AgentPlaybook:
    """Assemble the nine playbook sections; the result passes lint cleanly."""
    if compliance is None:
        raise CloningError("compliance rules are mandatory")
    config = config or PlaybookConfig()

    primary_goal = jd.primary_goal or config.default_primary_goal

    persona = list(_BASE_PERSONA)
    persona.extend(jd.style_notes)

    flow = [FlowStage(stage=s, guidance=_FLOW_GUIDANCE[s]) for s in _FLOW_GUIDANCE]

    facts: list[Fact] = []
    seen_statements: set[str] = set()
    for fact in manual.all_facts():
        key = fact.statement.lower()
        if key in seen_statements:
            for existing in facts:
                if existing.statement.lower() == key:
                    existing.source_call_ids = sorted(
                        set(existing.source_call_ids) | set(fact.source_call_ids)
                    )
            continue
        seen_statements.add(key)
        facts.append(Fact(fact.statement, list(fact.source_call_ids)))

    playbook = AgentPlaybook(
        role_definition=RoleDefinition(
            agent_name="{{agent_name}}",
            company=config.company,
            product=jd.product,
            primary_goal=primary_goal,
        ),
        persona_style=persona,
        conversation_flow=flow,
        objection_tactics=[
            ObjectionTactic(o.objection, o.tactic, list(o.source_call_ids))
            for o in manual.objections
        ],
        product_knowledge=facts,
        terminology_rules=[
            TerminologyRule(t["jargon"], t["replacement"]) for t in config.terminology
        ],
        example_dialogues=dialogues,
        compliance_rules=compliance.as_rule_list(),
        context_slots=context,
    )

    problems = validate_playbook(playbook)
    if problems:
        raise PlaybookError("composed playbook is invalid: " + "; ".join(problems))
    errors = [d for d in lint_playbook(playbook) if d.severity == "error"]
    if errors:
        raise PlaybookError(
            "composed playbook fails lint: " + "; ".join(str(d) for d in errors)
        )
    return playbook


# --------------------------------------------------------------------------
# Whole pipeline


def make_text_model(config: CloningConfig, seed: int) -> TextModelAdapter:
    if config.adapter == "mock":
        return MockExtractor(seed=seed)
    return ExternalTextModel(
        endpoint=os.environ.get("VC_TEXT_MODEL_URL", ""),
        api_key=os.environ.get("VC_TEXT_MODEL_KEY", ""),
    )


def group_calls_by_topic(
    calls: list[CallRecord], topics: list[str], cap: int
) -> dict[str, list[CallRecord]]:
    """Topic -> up to cap calls carrying that tag, in exemplar order."""
    grouped: dict[str, list[CallRecord]] = {}
    for topic in topics:
        tagged = [c for c in calls if topic in c.topic_tags]
        if tagged:
            grouped[topic] = sorted(tagged, key=exemplar_order_key)[:cap]
    return grouped


@dataclass
class CloneResult:
    playbook: AgentPlaybook
    job_description: JobDescription
    manual: KnowledgeManual
    dialogues: list[ExampleDialogue]
    tiers: list[AgentTier] = field(default_factory=list)
    exemplar_ids: list[str] = field(default_factory=list)


def run_clone_pipeline(
    corpus: Corpus, app_config: AppConfig, seed: int | None = None
) -> CloneResult:
    cfg = app_config.cloning
    seed = cfg.seed if seed is None else seed
    model = make_text_model(cfg, seed)

    sample = sample_calls(corpus, cfg.sample_n, seed)
    sampled = Corpus(records=sample)
    tiers = tier_agents(
        sampled, cfg.tier_threshold, (cfg.conversion_weight, cfg.duration_weight)
    )
    exemplars = select_exemplars(sampled, tiers, cfg.exemplar_k)

    jd = draft_job_description(exemplars, model)
    calls_by_topic = group_calls_by_topic(sample, cfg.topics, cfg.topic_call_cap)
    if not calls_by_topic:
        raise CloningError("no sampled call carries any configured topic tag")
    manual = extract_knowledge(calls_by_topic, model)
    dialogues = generate_example_dialogues(exemplars, model)

    compliance = ComplianceRules(
        closing_phrase=app_config.playbook.required_closing_phrase
    )
    context = ContextSlots(
        customer_plan_slot="customer_plan", customer_tenure_slot="customer_tenure"
    )
    playbook = compose_playbook(
        jd, manual, dialogues, compliance, context, app_config.playbook
    )
    return CloneResult(
        playbook=playbook,
        job_description=jd,
        manual=manual,
        dialogues=dialogues,
        tiers=tiers,
        exemplar_ids=[c.call_id for c in exemplars],
    )
