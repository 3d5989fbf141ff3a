"""Evaluation harness: scripted trials, blind packets, score aggregation.

Workflow: run paired scripted trials (AI side through the gateway,
human side packaged from reference transcripts), anonymize and shuffle the
recordings into a blind packet with a separately sealed label key, ingest
evaluator score sheets against the bundled 22-criterion rubric, then
aggregate into per-scenario/per-category means with evaluator standard
deviations and AI-minus-human deltas. Version-over-version comparison
reports percentage changes per category.
"""

from __future__ import annotations

import asyncio
import csv
import io
import json
import math
import os
import random
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from importlib.resources import files as _resource_files

from .adapters import (
    SAMPLES_PER_FRAME,
    ScenarioScript,
    ScriptedAdapter,
    make_adapter,
    synth_tone_pcm,
)
from .corpus import Turn
from .gateway.frames import AudioFrame, BYTES_PER_MS, decode_frame, split_pcm_frames
from .gateway.session import GatewaySession
from .playbook import parse_playbook, render_system_prompt

RUBRIC_CATEGORY_NAMES = (
    "Introduction & framing",
    "Product communication",
    "Salesmanship & drive",
    "Objection handling",
    "Closing & next steps",
)
RUBRIC_TOTAL_CRITERIA = 22
SCALE_MIN = 1
SCALE_MAX = 5

AGENT_KINDS = ("human", "ai")

# Tokens that must never appear in a serialized blind packet.
BLINDING_TOKENS = ("agent_kind", "agent_id", "playbook_version")


class EvaluationError(Exception):
    pass


class RubricError(EvaluationError):
    pass


class ScoreValidationError(EvaluationError):
    pass


# --------------------------------------------------------------------------
# Rubric


@dataclass
class Criterion:
    id: str
    text: str


@dataclass
class Category:
    name: str
    criteria: list[Criterion]


@dataclass
class Rubric:
    categories: list[Category]
    scale_min: int = SCALE_MIN
    scale_max: int = SCALE_MAX

    def criterion_ids(self) -> list[str]:
        return [c.id for cat in self.categories for c in cat.criteria]

    def category_of(self, criterion_id: str) -> str | None:
        for cat in self.categories:
            if any(c.id == criterion_id for c in cat.criteria):
                return cat.name
        return None

    def validate(self) -> None:
        names = tuple(cat.name for cat in self.categories)
        if names != RUBRIC_CATEGORY_NAMES:
            raise RubricError(
                "rubric categories must be exactly: " + ", ".join(RUBRIC_CATEGORY_NAMES)
            )
        ids = self.criterion_ids()
        if len(ids) != RUBRIC_TOTAL_CRITERIA:
            raise RubricError(
                f"rubric must contain {RUBRIC_TOTAL_CRITERIA} criteria, found {len(ids)}"
            )
        if len(set(ids)) != len(ids):
            raise RubricError("criterion ids must be unique")
        if (self.scale_min, self.scale_max) != (SCALE_MIN, SCALE_MAX):
            raise RubricError(f"scale must be {SCALE_MIN}-{SCALE_MAX}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "scale_min": self.scale_min,
            "scale_max": self.scale_max,
            "categories": [
                {
                    "name": cat.name,
                    "criteria": [{"id": c.id, "text": c.text} for c in cat.criteria],
                }
                for cat in self.categories
            ],
        }


def rubric_from_dict(data: dict[str, Any]) -> Rubric:
    categories = [
        Category(
            name=str(cat.get("name", "")),
            criteria=[
                Criterion(id=str(c.get("id", "")), text=str(c.get("text", "")))
                for c in cat.get("criteria", [])
            ],
        )
        for cat in data.get("categories", [])
    ]
    rubric = Rubric(
        categories=categories,
        scale_min=int(data.get("scale_min", SCALE_MIN)),
        scale_max=int(data.get("scale_max", SCALE_MAX)),
    )
    rubric.validate()
    return rubric


def load_rubric(path: str | Path | None = None) -> Rubric:
    """Load a rubric file, or the bundled default when no path is given."""
    if path:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = (
            _resource_files("voiceclone.data").joinpath("rubric.json").read_text("utf-8")
        )
    return rubric_from_dict(json.loads(text))


# --------------------------------------------------------------------------
# Trials


@dataclass
class TrialRecording:
    trial_id: str
    scenario_id: str
    agent_kind: str
    transcript: list[Turn]
    audio_path: str | None = None
    playbook_version: str | None = None
    valid: bool = True
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "trial_id": self.trial_id,
            "scenario_id": self.scenario_id,
            "agent_kind": self.agent_kind,
            "transcript": [t.to_dict() for t in self.transcript],
            "audio_path": self.audio_path,
            "playbook_version": self.playbook_version,
            "valid": self.valid,
            "error": self.error,
        }


def recording_from_dict(data: dict[str, Any]) -> TrialRecording:
    return TrialRecording(
        trial_id=str(data["trial_id"]),
        scenario_id=str(data["scenario_id"]),
        agent_kind=str(data["agent_kind"]),
        transcript=[
            Turn(
                speaker=str(t["speaker"]),
                text=str(t["text"]),
                start_ms=int(t.get("start_ms", 0)),
                end_ms=int(t.get("end_ms", 0)),
            )
            for t in data.get("transcript", [])
        ],
        audio_path=data.get("audio_path"),
        playbook_version=data.get("playbook_version"),
        valid=bool(data.get("valid", True)),
        error=data.get("error"),
    )


class LocalGateway:
    """In-process gateway front: opens engine sessions against a playbook dir."""

    def __init__(
        self,
        playbook_dir: str | Path,
        slot_values: dict[str, str] | None = None,
        queue_capacity: int = 100,
    ) -> None:
        self.playbook_dir = Path(playbook_dir)
        self.slot_values = slot_values or {
            "agent_name": "Arisa",
            "agent_id": "A-100",
            "customer_plan": "standard 300 Mbps plan",
            "customer_tenure": "2019",
        }
        self.queue_capacity = queue_capacity

    def open(self, playbook_id: str, adapter) -> GatewaySession:
        path = self.playbook_dir / f"{playbook_id}.json"
        if not path.is_file():
            raise EvaluationError(f"unknown playbook '{playbook_id}'")
        playbook = parse_playbook(path.read_text(encoding="utf-8"))
        prompt = render_system_prompt(playbook, self.slot_values)
        return GatewaySession(
            session_id=f"trial-{playbook_id}",
            playbook_id=playbook_id,
            adapter=adapter,
            system_prompt=prompt,
            queue_capacity=self.queue_capacity,
        )


def customer_tone_pcm(step_index: int, n_frames: int = 5) -> bytes:
    """Synthetic customer-side audio; frequency keyed by turn index."""
    return synth_tone_pcm(220.0 + 15.0 * step_index, SAMPLES_PER_FRAME * n_frames)


async def _drive_trial(
    session: GatewaySession, script: ScenarioScript
) -> tuple[list[Turn], list[dict]]:
    """Feed the scripted customer side and collect the interleaved transcript."""
    transcript: list[Turn] = []
    events: list[dict] = []
    await session.start()

    client_seq = 0
    cursor_ms = 0
    pending_text: list[str] = []
    agent_audio_bytes = 0

    def pump() -> bool:
        """Drain queued messages into the transcript; True once the session ends."""
        nonlocal cursor_ms, agent_audio_bytes
        ended = False
        while True:
            message = session.try_next_message()
            if message is None:
                return ended
            kind, body = message
            if kind == "end":
                return True
            if kind == "binary":
                frame = decode_frame(body)
                agent_audio_bytes += len(frame.pcm)
                continue
            events.append(body)
            mtype = body.get("type")
            if mtype == "agent.transcript.delta":
                pending_text.append(body.get("text", ""))
            elif mtype == "agent.turn.complete":
                text = "".join(pending_text).strip()
                pending_text.clear()
                duration = int(agent_audio_bytes / BYTES_PER_MS)
                agent_audio_bytes = 0
                if text:
                    transcript.append(Turn("agent", text, cursor_ms, cursor_ms + duration))
                    cursor_ms += duration
            elif mtype == "session.end":
                ended = True
            elif mtype == "error":
                raise EvaluationError(
                    f"session error: {body.get('code')}: {body.get('message')}"
                )

    ended = False
    for index, step in enumerate(script.customer_turns):
        if ended:
            break
        turn_end = cursor_ms + 100 * (1 + index % 3)
        transcript.append(Turn("customer", step.text, cursor_ms, turn_end))
        cursor_ms = turn_end
        pcm = step.synthetic_pcm or customer_tone_pcm(index)
        for chunk in split_pcm_frames(pcm):
            client_seq += 1
            await session.ingest_audio(AudioFrame(seq=client_seq, pts_ms=0, pcm=chunk))
            ended = pump() or ended
        # Adapters reply synchronously to end-of-utterance, so everything
        # for this turn is queued once this call returns.
        await session.end_of_utterance()
        ended = pump() or ended

    if session.state != "closed":
        await session.close()
    pump()
    return transcript, events


def run_scripted_trial(
    gateway: LocalGateway,
    scenario: ScenarioScript,
    adapter_kind: str = "scripted",
    playbook_id: str = "playbook",
    trial_id: str | None = None,
) -> TrialRecording:
    """Run one AI-side trial against the gateway with a scripted customer."""
    scenario.validate()
    trial_id = trial_id or f"trial-{scenario.scenario_id}-ai"
    try:
        if adapter_kind == "scripted":
            adapter = ScriptedAdapter(scenario)
        else:
            adapter = make_adapter(adapter_kind, scenario=scenario.scenario_id)
        session = gateway.open(playbook_id, adapter)
        transcript, _ = asyncio.run(_drive_trial(session, scenario))
    except Exception as exc:
        return TrialRecording(
            trial_id=trial_id,
            scenario_id=scenario.scenario_id,
            agent_kind="ai",
            transcript=[],
            playbook_version=playbook_id,
            valid=False,
            error=str(exc),
        )
    return TrialRecording(
        trial_id=trial_id,
        scenario_id=scenario.scenario_id,
        agent_kind="ai",
        transcript=transcript,
        playbook_version=playbook_id,
    )


def reference_trial(
    scenario: ScenarioScript, agent_kind: str = "human", trial_id: str | None = None
) -> TrialRecording:
    """Package a reference recording directly from the script interleaving.

    Used for the human side of paired trials, where the transcript comes
    from the recorded human call rather than the gateway.
    """
    scenario.validate()
    transcript: list[Turn] = []
    cursor = 0
    for step in scenario.customer_turns:
        transcript.append(Turn("customer", step.text, cursor, cursor + 100))
        cursor += 100
        transcript.append(Turn("agent", step.agent_reply, cursor, cursor + 200))
        cursor += 200
    return TrialRecording(
        trial_id=trial_id or f"trial-{scenario.scenario_id}-{agent_kind}",
        scenario_id=scenario.scenario_id,
        agent_kind=agent_kind,
        transcript=transcript,
    )


def script_interleaving(scenario: ScenarioScript) -> list[tuple[str, str]]:
    """The expected (speaker, text) sequence for a faithful trial transcript."""
    expected: list[tuple[str, str]] = []
    for step in scenario.customer_turns:
        expected.append(("customer", step.text))
        expected.append(("agent", step.agent_reply))
    return expected


# --------------------------------------------------------------------------
# Blind packets


@dataclass
class BlindPacket:
    items: list[dict[str, Any]]
    sealed_key: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"items": self.items}

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def blind_label(index: int, total: int) -> str:
    width = max(2, len(str(total)))
    return f"R{index + 1:0{width}d}"


def build_blind_packet(recordings: list[TrialRecording], seed: int) -> BlindPacket:
    """Anonymize and shuffle recordings; the label map goes to the sealed key.

    Shuffle algorithm (shared with the committed oracle): order recordings
    by trial_id, then random.Random(seed).shuffle the list; labels R01..
    are assigned in shuffled order.
    """
    if len(recordings) < 2:
        raise EvaluationError("need at least 2 recordings to blind")
    ids = [r.trial_id for r in recordings]
    if len(set(ids)) != len(ids):
        raise EvaluationError("duplicate trial_ids")
    ordered = sorted(recordings, key=lambda r: r.trial_id)
    rng = random.Random(seed)
    rng.shuffle(ordered)

    items = []
    key_labels: dict[str, Any] = {}
    for i, recording in enumerate(ordered):
        label = blind_label(i, len(ordered))
        items.append(
            {
                "label": label,
                "scenario_id": recording.scenario_id,
                "transcript": [
                    {"speaker": t.speaker, "text": t.text} for t in recording.transcript
                ],
            }
        )
        key_labels[label] = {
            "trial_id": recording.trial_id,
            "agent_kind": recording.agent_kind,
            "playbook_version": recording.playbook_version,
        }
    sealed_key = {"seed": seed, "labels": key_labels}
    return BlindPacket(items=items, sealed_key=sealed_key)


def blinding_violations(serialized_packet: str) -> list[str]:
    """Identity tokens present in a serialized packet (must be empty)."""
    return [token for token in BLINDING_TOKENS if token in serialized_packet]


def write_blind_packet(
    packet: BlindPacket, packet_path: str | Path, key_path: str | Path
) -> None:
    packet_path = Path(packet_path)
    key_path = Path(key_path)
    packet_path.write_text(packet.serialize(), encoding="utf-8")
    key_path.write_text(
        json.dumps(packet.sealed_key, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    try:
        os.chmod(key_path, 0o600)
    except OSError:
        pass


# --------------------------------------------------------------------------
# Score sheets


@dataclass
class ScoreSheet:
    evaluator_id: str
    label: str
    scores: dict[str, int]


@dataclass
class ScoreTable:
    # label -> evaluator -> criterion -> score
    scores: dict[str, dict[str, dict[str, int]]]
    scenarios: dict[str, str]

    def evaluators(self) -> list[str]:
        return sorted({e for by_eval in self.scores.values() for e in by_eval})


def parse_scoresheets_csv(text: str) -> list[ScoreSheet]:
    """Parse rows of evaluator_id,label,criterion_id,score into sheets."""
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ScoreValidationError("empty score sheet file")
    if [c.strip().lower() for c in rows[0]] == ["evaluator_id", "label", "criterion_id", "score"]:
        rows = rows[1:]
    sheets: dict[tuple[str, str], dict[str, int]] = {}
    for i, row in enumerate(rows, start=1):
        if len(row) != 4:
            raise ScoreValidationError(f"row {i}: expected 4 columns")
        evaluator, label, criterion, score_text = (c.strip() for c in row)
        try:
            score = int(score_text)
        except ValueError:
            raise ScoreValidationError(f"row {i}: score '{score_text}' is not an integer")
        cell = sheets.setdefault((evaluator, label), {})
        if criterion in cell:
            raise ScoreValidationError(
                f"row {i}: duplicate criterion {criterion} for {evaluator}/{label}"
            )
        cell[criterion] = score
    return [
        ScoreSheet(evaluator_id=e, label=l, scores=scores)
        for (e, l), scores in sorted(sheets.items())
    ]


def ingest_score_sheets(
    packet: BlindPacket, sheets: list[ScoreSheet], rubric: Rubric
) -> ScoreTable:
    """Validate sheets against the packet and rubric; only complete sheets pass."""
    rubric.validate()
    known_labels = {item["label"]: item["scenario_id"] for item in packet.items}
    criterion_ids = rubric.criterion_ids()
    table: dict[str, dict[str, dict[str, int]]] = {}
    for sheet in sheets:
        if sheet.label not in known_labels:
            raise ScoreValidationError(f"unknown label '{sheet.label}'")
        unknown = sorted(set(sheet.scores) - set(criterion_ids))
        if unknown:
            raise ScoreValidationError(
                f"sheet {sheet.evaluator_id}/{sheet.label}: unknown criterion {unknown[0]}"
            )
        missing = [c for c in criterion_ids if c not in sheet.scores]
        if missing:
            raise ScoreValidationError(
                f"sheet {sheet.evaluator_id}/{sheet.label}: missing criterion {missing[0]}"
            )
        for criterion in criterion_ids:
            score = sheet.scores[criterion]
            if not rubric.scale_min <= score <= rubric.scale_max:
                raise ScoreValidationError(
                    f"sheet {sheet.evaluator_id}/{sheet.label}: score {score} for "
                    f"{criterion} outside [{rubric.scale_min}, {rubric.scale_max}]"
                )
        by_eval = table.setdefault(sheet.label, {})
        if sheet.evaluator_id in by_eval:
            raise ScoreValidationError(
                f"duplicate sheet for {sheet.evaluator_id}/{sheet.label}"
            )
        by_eval[sheet.evaluator_id] = dict(sheet.scores)
    scenarios = {label: known_labels[label] for label in table}
    return ScoreTable(scores=table, scenarios=scenarios)


# --------------------------------------------------------------------------
# Aggregation


def _sample_std(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return statistics.stdev(values)


@dataclass
class AggregateReport:
    categories: list[str]
    scenarios: list[str]
    # scenario -> agent_kind -> {"categories": {name: {"mean","std"}}, "overall_mean"}
    cells: dict[str, dict[str, dict[str, Any]]]
    # scenario -> category -> ai minus human
    deltas: dict[str, dict[str, float]]
    overall: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "categories": list(self.categories),
            "scenarios": list(self.scenarios),
            "cells": self.cells,
            "deltas": self.deltas,
            "overall": self.overall,
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["scenario", "agent_kind", "category", "mean", "std"])
        for scenario in self.scenarios:
            for kind in sorted(self.cells.get(scenario, {})):
                cell = self.cells[scenario][kind]
                for category in self.categories:
                    stats = cell["categories"][category]
                    writer.writerow(
                        [scenario, kind, category, f"{stats['mean']:.6f}", f"{stats['std']:.6f}"]
                    )
                writer.writerow(
                    [scenario, kind, "OVERALL", f"{cell['overall_mean']:.6f}", ""]
                )
        return out.getvalue()


def report_from_dict(data: dict[str, Any]) -> AggregateReport:
    return AggregateReport(
        categories=[str(c) for c in data["categories"]],
        scenarios=[str(s) for s in data["scenarios"]],
        cells=data["cells"],
        deltas=data.get("deltas", {}),
        overall=data.get("overall", {}),
    )


def aggregate_scores(
    table: ScoreTable, sealed_key: dict[str, Any], rubric: Rubric
) -> AggregateReport:
    """Unblind via the sealed key and average across evaluators and criteria.

    Criterion mean: over every (evaluator, recording) sample in the
    (scenario, agent kind) cell. Category mean: over its criteria means.
    Std: sample (n-1) over per-evaluator category means. Overall mean:
    over all criterion means.
    """
    rubric.validate()
    key_labels = sealed_key.get("labels", {})
    for label in table.scores:
        if label not in key_labels:
            raise EvaluationError(f"sealed key mismatch: no entry for label '{label}'")
    unscored = sorted(set(key_labels) - set(table.scores))
    if unscored:
        raise EvaluationError(
            f"every recording needs at least one evaluator; no scores for {unscored[0]}"
        )
    for label, by_eval in table.scores.items():
        if not by_eval:
            raise EvaluationError(f"no evaluators for label '{label}'")

    # (scenario, agent_kind) -> list of labels
    groups: dict[tuple[str, str], list[str]] = {}
    for label in sorted(table.scores):
        kind = str(key_labels[label].get("agent_kind", ""))
        if kind not in AGENT_KINDS:
            raise EvaluationError(f"sealed key has unknown agent kind '{kind}'")
        scenario = table.scenarios[label]
        groups.setdefault((scenario, kind), []).append(label)

    scenarios = sorted({scenario for scenario, _ in groups})
    categories = [cat.name for cat in rubric.categories]
    cells: dict[str, dict[str, dict[str, Any]]] = {}
    for (scenario, kind), labels in sorted(groups.items()):
        criterion_means: dict[str, float] = {}
        for criterion in rubric.criterion_ids():
            samples = [
                float(table.scores[label][evaluator][criterion])
                for label in labels
                for evaluator in sorted(table.scores[label])
            ]
            criterion_means[criterion] = statistics.fmean(samples)

        category_stats: dict[str, dict[str, float]] = {}
        for cat in rubric.categories:
            ids = [c.id for c in cat.criteria]
            category_stats[cat.name] = {
                "mean": statistics.fmean(criterion_means[c] for c in ids)
            }
            evaluator_means = []
            evaluators = sorted({e for label in labels for e in table.scores[label]})
            for evaluator in evaluators:
                values = [
                    float(table.scores[label][evaluator][c])
                    for label in labels
                    if evaluator in table.scores[label]
                    for c in ids
                ]
                if values:
                    evaluator_means.append(statistics.fmean(values))
            category_stats[cat.name]["std"] = _sample_std(evaluator_means)

        overall_mean = statistics.fmean(criterion_means.values())
        cells.setdefault(scenario, {})[kind] = {
            "categories": category_stats,
            "overall_mean": overall_mean,
        }

    deltas: dict[str, dict[str, float]] = {}
    for scenario in scenarios:
        kinds = cells.get(scenario, {})
        if "ai" in kinds and "human" in kinds:
            deltas[scenario] = {
                category: kinds["ai"]["categories"][category]["mean"]
                - kinds["human"]["categories"][category]["mean"]
                for category in categories
            }

    overall: dict[str, float] = {}
    for kind in AGENT_KINDS:
        values = [
            cells[scenario][kind]["overall_mean"]
            for scenario in scenarios
            if kind in cells.get(scenario, {})
        ]
        if values:
            overall[kind] = statistics.fmean(values)

    return AggregateReport(
        categories=categories,
        scenarios=scenarios,
        cells=cells,
        deltas=deltas,
        overall=overall,
    )


# --------------------------------------------------------------------------
# Comparison


def compare_reports(
    v1: AggregateReport, v2: AggregateReport, delta_threshold: float = 0.5
) -> dict[str, Any]:
    """Per-category AI change from v1 to v2, plus flagged AI-human gaps in v2."""
    if v1.categories != v2.categories:
        raise EvaluationError("reports use different rubric categories")
    if v1.scenarios != v2.scenarios:
        raise EvaluationError("reports cover different scenarios")

    def pooled_ai_mean(report: AggregateReport, category: str) -> float | None:
        values = [
            report.cells[scenario]["ai"]["categories"][category]["mean"]
            for scenario in report.scenarios
            if "ai" in report.cells.get(scenario, {})
        ]
        return statistics.fmean(values) if values else None

    changes: dict[str, Any] = {}
    for category in v1.categories:
        before = pooled_ai_mean(v1, category)
        after = pooled_ai_mean(v2, category)
        if before is None or after is None:
            continue
        pct = ((after - before) / before * 100.0) if before else math.inf
        changes[category] = {
            "v1_ai_mean": before,
            "v2_ai_mean": after,
            "pct_change": pct,
        }

    flagged = []
    for scenario, by_cat in sorted(v2.deltas.items()):
        for category, delta in by_cat.items():
            if abs(delta) > delta_threshold:
                flagged.append(
                    {"scenario": scenario, "category": category, "delta": delta}
                )

    return {
        "categories": changes,
        "flagged": flagged,
        "deltas_v1": v1.deltas,
        "deltas_v2": v2.deltas,
        "overall_v1": v1.overall,
        "overall_v2": v2.overall,
        "delta_threshold": delta_threshold,
    }
