"""Call-transcript corpus: loading, validation, and summary statistics.

The corpus is a JSONL file, one call record per line, snake_case keys,
timestamps ISO-8601 UTC with a 'Z' suffix. Unknown keys on records and
turns are preserved opaquely and re-emitted on save so richer CRM exports
survive a round trip.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable

SPEAKERS = ("agent", "customer")
OUTCOMES = ("sale", "appointment", "follow_up", "rejection", "removed_from_list")

_TURN_FIELDS = ("speaker", "text", "start_ms", "end_ms")
_RECORD_FIELDS = (
    "call_id",
    "agent_id",
    "timestamp",
    "duration_ms",
    "outcome",
    "topic_tags",
    "turns",
)


class CorpusError(Exception):
    """Fatal corpus problem (unreadable file, empty corpus, bad shape)."""


@dataclass
class Turn:
    speaker: str
    text: str
    start_ms: int
    end_ms: int
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "speaker": self.speaker,
            "text": self.text,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
        }
        out.update(self.extra)
        return out


@dataclass
class CallRecord:
    call_id: str
    agent_id: str
    timestamp: str
    duration_ms: int
    outcome: str
    topic_tags: list[str]
    turns: list[Turn]
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "call_id": self.call_id,
            "agent_id": self.agent_id,
            "timestamp": self.timestamp,
            "duration_ms": self.duration_ms,
            "outcome": self.outcome,
            "topic_tags": list(self.topic_tags),
            "turns": [t.to_dict() for t in self.turns],
        }
        out.update(self.extra)
        return out


@dataclass
class Violation:
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


@dataclass
class LoadDiagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class Corpus:
    records: list[CallRecord]
    diagnostics: list[LoadDiagnostic] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def by_agent(self) -> dict[str, list[CallRecord]]:
        grouped: dict[str, list[CallRecord]] = {}
        for rec in self.records:
            grouped.setdefault(rec.agent_id, []).append(rec)
        return grouped


@dataclass
class CorpusStats:
    total_calls: int
    calls_per_agent: dict[str, int]
    outcome_distribution: dict[str, int]
    mean_duration_ms: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "total_calls": self.total_calls,
            "calls_per_agent": dict(sorted(self.calls_per_agent.items())),
            "outcome_distribution": dict(sorted(self.outcome_distribution.items())),
            "mean_duration_ms": self.mean_duration_ms,
        }


def _require(obj: dict[str, Any], key: str, kind: type | tuple, where: str) -> Any:
    if key not in obj:
        raise CorpusError(f"{where}: missing key '{key}'")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise CorpusError(f"{where}: key '{key}' has wrong type")
    return value


def turn_from_dict(obj: dict[str, Any], where: str = "turn") -> Turn:
    if not isinstance(obj, dict):
        raise CorpusError(f"{where}: not an object")
    speaker = _require(obj, "speaker", str, where)
    text = _require(obj, "text", str, where)
    start_ms = _require(obj, "start_ms", int, where)
    end_ms = _require(obj, "end_ms", int, where)
    extra = {k: v for k, v in obj.items() if k not in _TURN_FIELDS}
    return Turn(speaker=speaker, text=text, start_ms=start_ms, end_ms=end_ms, extra=extra)


def record_from_dict(obj: dict[str, Any]) -> CallRecord:
    """Build a CallRecord from parsed JSON; structural problems raise CorpusError."""
    if not isinstance(obj, dict):
        raise CorpusError("record is not a JSON object")
    call_id = _require(obj, "call_id", str, "record")
    agent_id = _require(obj, "agent_id", str, "record")
    timestamp = _require(obj, "timestamp", str, "record")
    duration_ms = _require(obj, "duration_ms", int, "record")
    outcome = _require(obj, "outcome", str, "record")
    topic_tags = _require(obj, "topic_tags", list, "record")
    turns_raw = _require(obj, "turns", list, "record")
    if not all(isinstance(t, str) for t in topic_tags):
        raise CorpusError("record: topic_tags must be strings")
    turns = [turn_from_dict(t, f"turns[{i}]") for i, t in enumerate(turns_raw)]
    extra = {k: v for k, v in obj.items() if k not in _RECORD_FIELDS}
    return CallRecord(
        call_id=call_id,
        agent_id=agent_id,
        timestamp=timestamp,
        duration_ms=duration_ms,
        outcome=outcome,
        topic_tags=list(topic_tags),
        turns=turns,
        extra=extra,
    )


def _is_utc_timestamp(value: str) -> bool:
    if not value.endswith("Z"):
        return False
    try:
        datetime.fromisoformat(value[:-1] + "+00:00")
    except ValueError:
        return False
    return True


def validate_record(record: CallRecord) -> list[Violation]:
    """Check every CallRecord invariant; an empty list means the record is valid."""
    violations: list[Violation] = []
    if not record.call_id:
        violations.append(Violation("call_id", "empty"))
    if not record.agent_id:
        violations.append(Violation("agent_id", "empty"))
    if not _is_utc_timestamp(record.timestamp):
        violations.append(Violation("timestamp", "not ISO-8601 UTC with Z suffix"))
    if record.duration_ms <= 0:
        violations.append(Violation("duration_ms", "not positive"))
    if record.outcome not in OUTCOMES:
        violations.append(Violation("outcome", f"unknown outcome '{record.outcome}'"))

    if not record.turns:
        violations.append(Violation("turns", "no turns"))
    speakers = set()
    last_start = None
    max_end = 0
    for i, turn in enumerate(record.turns):
        where = f"turns[{i}]"
        if turn.speaker not in SPEAKERS:
            violations.append(Violation(f"{where}.speaker", f"unknown speaker '{turn.speaker}'"))
        else:
            speakers.add(turn.speaker)
        if not turn.text.strip():
            violations.append(Violation(f"{where}.text", "empty after trim"))
        if turn.start_ms < 0:
            violations.append(Violation(f"{where}.start_ms", "negative"))
        if turn.end_ms < turn.start_ms:
            violations.append(Violation(f"{where}.end_ms", "end precedes start"))
        if last_start is not None and turn.start_ms < last_start:
            violations.append(Violation(f"{where}.start_ms", "turns not ordered by start_ms"))
        last_start = turn.start_ms
        max_end = max(max_end, turn.end_ms)
    if record.turns:
        if "agent" not in speakers:
            violations.append(Violation("turns", "no agent turn"))
        if "customer" not in speakers:
            violations.append(Violation("turns", "no customer turn"))
        if record.duration_ms < max_end:
            violations.append(Violation("duration_ms", "shorter than last turn end"))
    return violations


def load_corpus(path: str | Path) -> Corpus:
    """Load a JSONL corpus.

    Every line is either parsed into a valid CallRecord or reported as a
    per-line diagnostic; nothing is silently dropped. Records failing any
    invariant (including duplicate call_id) are excluded with a diagnostic.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    records: list[CallRecord] = []
    diagnostics: list[LoadDiagnostic] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            diagnostics.append(LoadDiagnostic(lineno, f"malformed JSON: {exc.msg}"))
            continue
        try:
            record = record_from_dict(obj)
        except CorpusError as exc:
            diagnostics.append(LoadDiagnostic(lineno, str(exc)))
            continue
        violations = validate_record(record)
        if violations:
            summary = "; ".join(str(v) for v in violations)
            diagnostics.append(LoadDiagnostic(lineno, f"invalid record: {summary}"))
            continue
        if record.call_id in seen_ids:
            diagnostics.append(LoadDiagnostic(lineno, f"duplicate call_id '{record.call_id}'"))
            continue
        seen_ids.add(record.call_id)
        records.append(record)
    return Corpus(records=records, diagnostics=diagnostics)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write records back out as JSONL; load(save(c)) round-trips field-for-field."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for record in corpus.records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")


def corpus_stats(corpus: Corpus) -> CorpusStats:
    if not corpus.records:
        raise CorpusError("empty corpus")
    calls_per_agent: dict[str, int] = {}
    outcome_distribution: dict[str, int] = {}
    total_duration = 0
    for rec in corpus.records:
        calls_per_agent[rec.agent_id] = calls_per_agent.get(rec.agent_id, 0) + 1
        outcome_distribution[rec.outcome] = outcome_distribution.get(rec.outcome, 0) + 1
        total_duration += rec.duration_ms
    return CorpusStats(
        total_calls=len(corpus.records),
        calls_per_agent=calls_per_agent,
        outcome_distribution=outcome_distribution,
        mean_duration_ms=total_duration / len(corpus.records),
    )


def median_duration_ms(records: Iterable[CallRecord]) -> float:
    durations = [r.duration_ms for r in records]
    if not durations:
        raise CorpusError("empty corpus")
    return float(statistics.median(durations))
