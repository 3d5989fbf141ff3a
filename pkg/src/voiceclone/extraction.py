"""Text-model adapters used by the cloning pipeline.

The pipeline talks to a model through one narrow contract: given an
instruction and a list of plain-text transcripts, return structured JSON
text. Two implementations ship here:

- MockExtractor: deterministic keyword/frequency heuristics, a pure
  function of (instruction, transcripts, seed). It is the backend used by
  every test and golden file.
- ExternalTextModel: thin HTTP connector for a hosted model, configured
  only; never exercised by the test suite.

Transcripts are rendered one utterance per line as ``speaker: text``.
Every extracted item carries ``sources``: indexes into the transcript
list, which callers map back to call ids for provenance.
"""

from __future__ import annotations

import json
import re
import urllib.request
from dataclasses import dataclass, field
from typing import Protocol, Sequence


class ExtractionError(Exception):
    """Adapter failure; retriable, carries the adapter diagnostics."""


class TextModelAdapter(Protocol):
    def complete(self, instruction: str, transcripts: Sequence[str]) -> str:
        """Return structured JSON text for the given instruction."""
        ...


# Instruction templates. The mock dispatches on their marker phrases, and
# the external connector forwards them verbatim.
INSTRUCTION_JOB_DESCRIPTION = (
    "Summarize the tasks, responsibilities and conversational style of the sales "
    "agents in these transcripts. Respond with JSON containing 'tasks', "
    "'responsibilities', 'style_notes' (lists of {text, sources}) and "
    "'primary_goal' ({text, sources} or null); 'sources' are transcript indexes."
)

INSTRUCTION_DIALOGUES = (
    "Select short example exchanges that illustrate the opening, value_proposition, "
    "objection_handling and closing stages of these calls. Respond with JSON "
    "{'dialogues': [{stage, turns: [{speaker, text}], sources}]}. Keep every "
    "exchange under eight turns."
)


def instruction_knowledge(topic: str) -> str:
    return (
        f"Extract knowledge about the topic '{topic}' from these transcripts: product "
        "facts, common objections together with the tactic the agent used to answer "
        "them, and closing strategies. Respond with JSON {'facts': [{statement, "
        "sources}], 'objections': [{objection, tactic, sources}], "
        "'closing_strategies': [{text, sources}]}."
    )


_TOPIC_RE = re.compile(r"topic '([^']+)'")

PRODUCT_NOUNS = ("internet", "package", "plan", "fiber", "broadband", "wifi")
BENEFIT_WORDS = (
    "speed",
    "free",
    "promotion",
    "discount",
    "unlimited",
    "benefit",
    "upgrade",
    "save",
    "faster",
)
_FACT_RE = re.compile(
    r"\b\d[\d,.]*\s*(?:mbps|gbps|baht|dollars?|months?|gb|percent|%)\b|\bper month\b",
    re.IGNORECASE,
)
_QUESTION_RE = re.compile(r"\?\s*$")

# Ordered objection taxonomy: (label, canonical phrasing, trigger substrings).
OBJECTION_RULES: tuple[tuple[str, str, tuple[str, ...]], ...] = (
    (
        "price",
        "Price concern: the customer says the offer is too expensive.",
        ("expensive", "cost too much", "price", "cheaper", "afford"),
    ),
    (
        "hesitation",
        "Hesitation: the customer wants to think about it before deciding.",
        ("think about it", "not sure", "maybe later", "need some time"),
    ),
    (
        "busy",
        "Busy: the customer says this is not a good time to talk.",
        ("busy", "no time", "in a meeting", "call back later", "call me later"),
    ),
    (
        "existing_provider",
        "Existing provider: the customer already has a contract elsewhere.",
        ("already have", "current provider", "another provider", "contract with"),
    ),
)

_CLOSING_STRATEGIES: tuple[tuple[tuple[str, ...], str], ...] = (
    (
        ("appointment", "schedule", "install", "book"),
        "Propose a concrete installation date instead of leaving the next step open.",
    ),
    (
        ("follow up", "follow-up", "send you the details"),
        "Offer a follow-up call or written details when the customer cannot decide today.",
    ),
    (
        ("sign up", "confirm"),
        "Confirm the agreement back to the customer before ending the call.",
    ),
)

_CLOSING_MARKERS = tuple(
    marker for markers, _ in _CLOSING_STRATEGIES for marker in markers
)

POLITENESS_MARKERS = ("thank you", "please", "khun", "sawaddee", "sorry")
_REMOVAL_MARKERS = ("remove me", "take me off", "call list", "stop calling")

MAX_FACTS_PER_TOPIC = 12


@dataclass
class _Line:
    speaker: str
    text: str


def _parse_transcript(text: str) -> list[_Line]:
    lines = []
    for raw in text.splitlines():
        raw = raw.strip()
        if not raw:
            continue
        speaker, _, uttered = raw.partition(":")
        lines.append(_Line(speaker.strip().lower(), uttered.strip()))
    return lines


def _sentences(text: str) -> list[str]:
    parts = re.split(r"(?<=[.!?])\s+", text)
    return [p.strip() for p in parts if p.strip()]


def _norm(text: str) -> str:
    return re.sub(r"\s+", " ", text.lower().strip())


@dataclass
class MockExtractor:
    """Rule-based stand-in for the extraction model.

    All rules are exhaustive scans, so output is a deterministic function
    of the inputs; ``seed`` is part of the contract and reserved for any
    future sampling-based rule.
    """

    seed: int = 0
    max_facts_per_topic: int = MAX_FACTS_PER_TOPIC

    def complete(self, instruction: str, transcripts: Sequence[str]) -> str:
        if not transcripts:
            raise ExtractionError("no transcripts given")
        calls = [_parse_transcript(t) for t in transcripts]
        if "conversational style" in instruction:
            payload = self._job_description(calls)
        elif "'facts'" in instruction or "closing strategies" in instruction:
            match = _TOPIC_RE.search(instruction)
            if not match:
                raise ExtractionError("knowledge instruction without a topic")
            payload = self._knowledge(calls)
        elif "example exchanges" in instruction:
            payload = self._dialogues(calls)
        else:
            raise ExtractionError(f"unsupported instruction: {instruction[:60]}...")
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)

    # -- shared scans -------------------------------------------------

    def _product_phrase(self, calls: list[list[_Line]]) -> tuple[str, list[int]]:
        """Most frequent product-noun phrase in agent lines, ties lexical."""
        counts: dict[str, int] = {}
        sources: dict[str, set[int]] = {}
        for idx, lines in enumerate(calls):
            for line in lines:
                if line.speaker != "agent":
                    continue
                words = re.findall(r"[a-z]+", line.text.lower())
                for i, word in enumerate(words):
                    if word not in PRODUCT_NOUNS:
                        continue
                    phrase = word
                    if i > 0:
                        phrase = f"{words[i - 1]} {word}"
                    counts[phrase] = counts.get(phrase, 0) + 1
                    sources.setdefault(phrase, set()).add(idx)
        if not counts:
            return "service", list(range(len(calls)))
        best = min(counts, key=lambda p: (-counts[p], p))
        return best, sorted(sources[best])

    def _objection_hits(
        self, calls: list[list[_Line]]
    ) -> dict[str, dict[str, object]]:
        """label -> {phrase, tactic, sources}; tactic is the first agent reply."""
        hits: dict[str, dict[str, object]] = {}
        for idx, lines in enumerate(calls):
            for pos, line in enumerate(lines):
                if line.speaker != "customer":
                    continue
                lowered = line.text.lower()
                for label, phrase, triggers in OBJECTION_RULES:
                    if not any(t in lowered for t in triggers):
                        continue
                    reply = next(
                        (l.text for l in lines[pos + 1 :] if l.speaker == "agent"),
                        None,
                    )
                    entry = hits.setdefault(
                        label, {"objection": phrase, "tactic": reply, "sources": set()}
                    )
                    entry["sources"].add(idx)  # type: ignore[union-attr]
                    if entry["tactic"] is None and reply is not None:
                        entry["tactic"] = reply
        return {k: v for k, v in hits.items() if v["tactic"] is not None}

    # -- job description ----------------------------------------------

    def _job_description(self, calls: list[list[_Line]]) -> dict:
        everyone = list(range(len(calls)))
        product, product_sources = self._product_phrase(calls)
        objections = self._objection_hits(calls)
        closing_sources = sorted(
            {
                idx
                for idx, lines in enumerate(calls)
                for line in lines
                if line.speaker == "agent"
                and any(m in line.text.lower() for m in _CLOSING_MARKERS)
            }
        )
        question_sources = sorted(
            {
                idx
                for idx, lines in enumerate(calls)
                for line in lines
                if line.speaker == "agent" and _QUESTION_RE.search(line.text)
            }
        )

        tasks = [
            {
                "text": f"Call customers to present the {product} and explain its benefits.",
                "sources": product_sources or everyone,
            }
        ]
        if question_sources:
            tasks.append(
                {
                    "text": "Ask brief discovery questions to understand the customer's situation.",
                    "sources": question_sources,
                }
            )
        if objections:
            tasks.append(
                {
                    "text": "Listen to customer concerns and answer objections with empathy and concrete value.",
                    "sources": sorted(
                        set().union(*(e["sources"] for e in objections.values()))  # type: ignore[arg-type]
                    ),
                }
            )
        if closing_sources:
            tasks.append(
                {
                    "text": "Close each call by booking an installation appointment or agreeing a follow-up.",
                    "sources": closing_sources,
                }
            )

        removal_sources = sorted(
            {
                idx
                for idx, lines in enumerate(calls)
                for line in lines
                if any(m in line.text.lower() for m in _REMOVAL_MARKERS)
            }
        )
        responsibilities = [
            {"text": "Record the outcome of every call accurately.", "sources": everyone},
            {
                "text": "Stay within the approved product scope and offers.",
                "sources": everyone,
            },
        ]
        if removal_sources:
            responsibilities.append(
                {
                    "text": "Remove customers from the call list immediately when they ask.",
                    "sources": removal_sources,
                }
            )

        style_notes = self._style_notes(calls, everyone)
        primary_goal = None
        if closing_sources:
            primary_goal = {
                "text": "Book an installation appointment with every interested customer.",
                "sources": closing_sources,
            }
        return {
            "tasks": tasks,
            "responsibilities": responsibilities,
            "style_notes": style_notes,
            "primary_goal": primary_goal,
            "product": {"text": product, "sources": product_sources or everyone},
        }

    def _style_notes(self, calls: list[list[_Line]], everyone: list[int]) -> list[dict]:
        agent_lines = [l for lines in calls for l in lines if l.speaker == "agent"]
        notes: list[dict] = []
        if agent_lines:
            question_ratio = sum(
                1 for l in agent_lines if _QUESTION_RE.search(l.text)
            ) / len(agent_lines)
            if question_ratio >= 0.2:
                notes.append(
                    {
                        "text": "Asks short questions to keep the customer involved.",
                        "sources": everyone,
                    }
                )
            politeness = sum(
                1
                for l in agent_lines
                if any(m in l.text.lower() for m in POLITENESS_MARKERS)
            )
            if politeness >= max(1, len(calls)):
                notes.append(
                    {
                        "text": "Uses appreciative, customer-friendly language from greeting to goodbye.",
                        "sources": everyone,
                    }
                )
            mean_words = sum(len(l.text.split()) for l in agent_lines) / len(agent_lines)
            if mean_words < 22:
                notes.append(
                    {
                        "text": "Keeps explanations short and conversational rather than reciting specifications.",
                        "sources": everyone,
                    }
                )
            else:
                notes.append(
                    {
                        "text": "Explains at a measured pace with full product detail.",
                        "sources": everyone,
                    }
                )
        if not notes:
            notes.append(
                {"text": "Speaks plainly and stays on topic.", "sources": everyone}
            )
        return notes

    # -- knowledge ------------------------------------------------------

    def _knowledge(self, calls: list[list[_Line]]) -> dict:
        facts: list[dict] = []
        seen: set[str] = set()
        for idx, lines in enumerate(calls):
            for line in lines:
                if line.speaker != "agent":
                    continue
                for sentence in _sentences(line.text):
                    if not _FACT_RE.search(sentence):
                        continue
                    key = _norm(sentence)
                    if key in seen:
                        for fact in facts:
                            if _norm(fact["statement"]) == key and idx not in fact["sources"]:
                                fact["sources"].append(idx)
                        continue
                    seen.add(key)
                    facts.append({"statement": sentence, "sources": [idx]})
        facts = facts[: self.max_facts_per_topic]

        objections = [
            {
                "objection": entry["objection"],
                "tactic": entry["tactic"],
                "sources": sorted(entry["sources"]),  # type: ignore[arg-type]
            }
            for _, entry in sorted(self._objection_hits(calls).items())
        ]

        strategies: list[dict] = []
        for markers, text in _CLOSING_STRATEGIES:
            sources = sorted(
                {
                    idx
                    for idx, lines in enumerate(calls)
                    for pos, line in enumerate(lines)
                    if line.speaker == "agent"
                    and pos >= len(lines) * 3 // 5
                    and any(m in line.text.lower() for m in markers)
                }
            )
            if sources:
                strategies.append({"text": text, "sources": sources})
        return {"facts": facts, "objections": objections, "closing_strategies": strategies}

    # -- dialogues ------------------------------------------------------

    def _dialogues(self, calls: list[list[_Line]]) -> dict:
        dialogues: list[dict] = []

        opening = next(
            (
                (idx, lines)
                for idx, lines in enumerate(calls)
                if lines and lines[0].speaker == "agent"
            ),
            None,
        )
        if opening:
            idx, lines = opening
            turns = [{"speaker": l.speaker, "text": l.text} for l in lines[:2]]
            dialogues.append({"stage": "opening", "turns": turns, "sources": [idx]})

        for idx, lines in enumerate(calls):
            found = False
            for pos, line in enumerate(lines):
                lowered = line.text.lower()
                if line.speaker == "agent" and any(
                    n in lowered for n in PRODUCT_NOUNS
                ) and any(b in lowered for b in BENEFIT_WORDS):
                    turns = []
                    if pos > 0:
                        prev = lines[pos - 1]
                        turns.append({"speaker": prev.speaker, "text": prev.text})
                    turns.append({"speaker": line.speaker, "text": line.text})
                    dialogues.append(
                        {"stage": "value_proposition", "turns": turns, "sources": [idx]}
                    )
                    found = True
                    break
            if found:
                break

        for idx, lines in enumerate(calls):
            found = False
            for pos, line in enumerate(lines):
                if line.speaker != "customer":
                    continue
                lowered = line.text.lower()
                if not any(
                    t in lowered for _, _, triggers in OBJECTION_RULES for t in triggers
                ):
                    continue
                reply = next((l for l in lines[pos + 1 :] if l.speaker == "agent"), None)
                if reply is None:
                    continue
                dialogues.append(
                    {
                        "stage": "objection_handling",
                        "turns": [
                            {"speaker": "customer", "text": line.text},
                            {"speaker": "agent", "text": reply.text},
                        ],
                        "sources": [idx],
                    }
                )
                found = True
                break
            if found:
                break

        for idx, lines in enumerate(calls):
            closing_turns = None
            for pos in range(len(lines) - 1, -1, -1):
                line = lines[pos]
                if line.speaker == "agent" and any(
                    m in line.text.lower() for m in _CLOSING_MARKERS
                ):
                    closing_turns = [{"speaker": "agent", "text": line.text}]
                    if pos + 1 < len(lines):
                        nxt = lines[pos + 1]
                        closing_turns.append({"speaker": nxt.speaker, "text": nxt.text})
                    break
            if closing_turns:
                dialogues.append(
                    {"stage": "closing", "turns": closing_turns, "sources": [idx]}
                )
                break

        return {"dialogues": dialogues}


@dataclass
class ExternalTextModel:
    """Configuration-only connector for a hosted extraction model.

    Posts {instruction, transcripts} as JSON and expects {"output": text}.
    Excluded from the test suite; any transport problem surfaces as a
    retriable ExtractionError.
    """

    endpoint: str
    api_key: str = ""
    timeout_s: float = 30.0
    extra_headers: dict[str, str] = field(default_factory=dict)

    def complete(self, instruction: str, transcripts: Sequence[str]) -> str:
        if not self.endpoint:
            raise ExtractionError("external text model: endpoint not configured")
        body = json.dumps(
            {"instruction": instruction, "transcripts": list(transcripts)}
        ).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        if self.api_key:
            request.add_header("Authorization", f"Bearer {self.api_key}")
        for key, value in self.extra_headers.items():
            request.add_header(key, value)
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_s) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except Exception as exc:  # network failures are retriable by the caller
            raise ExtractionError(f"external text model call failed: {exc}") from exc
        if "output" not in payload:
            raise ExtractionError("external text model returned no 'output' field")
        return payload["output"]
