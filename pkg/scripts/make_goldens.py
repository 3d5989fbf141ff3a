#!/usr/bin/env python3
"""Build the committed fixtures and golden files.

Counting-style goldens (corpus stats, tier table, exemplar order, blind
labels) come from the independent oracle modules in tests/oracles.
Pipeline goldens (playbook, rendered prompt, packet, reports) are the
output of a verified run, cross-checked against the oracles before being
written. Evaluation score sheets are constructed so that the AI
objection-handling category moves from exactly 3.0 (V1) to exactly 3.6
(V2): a +20.0% change.

Run from the repo root: python scripts/make_goldens.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from tests.oracles import aggregate_bruteforce, corpus_counts, shuffle_oracle, tier_oracle

from voiceclone.adapters import load_scenario
from voiceclone.cloning import run_clone_pipeline
from voiceclone.config import AppConfig
from voiceclone.corpus import load_corpus
from voiceclone.evaluation import (
    LocalGateway,
    aggregate_scores,
    build_blind_packet,
    compare_reports,
    ingest_score_sheets,
    load_rubric,
    parse_scoresheets_csv,
    reference_trial,
    run_scripted_trial,
    write_blind_packet,
)
from voiceclone.playbook import render_system_prompt, to_canonical_json

CORPUS = ROOT / "fixtures" / "corpus_50.jsonl"
GOLDEN = ROOT / "fixtures" / "golden"
RECORDINGS = ROOT / "fixtures" / "recordings"
SCORESHEETS = ROOT / "fixtures" / "scoresheets"

SCENARIOS = ("happy_path", "negotiation", "complaining")

# Per-evaluator category scores. "uniform": evaluator i scores every
# criterion of the category with values[i]; "pattern": every evaluator
# scores the category's criteria with the given per-criterion values.
V1_DESIGN = {
    "human": {
        "Introduction & framing": ("uniform", [4, 4, 5, 4, 4, 5, 4]),
        "Product communication": ("uniform", [4, 4, 4, 5, 4, 4, 4]),
        "Salesmanship & drive": ("uniform", [4, 5, 4, 4, 4, 4, 4]),
        "Objection handling": ("uniform", [4, 4, 4, 4, 5, 4, 4]),
        "Closing & next steps": ("uniform", [4, 4, 5, 4, 4, 4, 5]),
    },
    "ai": {
        "Introduction & framing": ("uniform", [4, 4, 4, 5, 4, 4, 4]),
        "Product communication": ("uniform", [4, 4, 4, 4, 4, 3, 4]),
        "Salesmanship & drive": ("uniform", [3, 3, 4, 3, 3, 3, 3]),
        "Objection handling": ("uniform", [3, 3, 3, 3, 3, 3, 3]),
        "Closing & next steps": ("uniform", [3, 4, 3, 3, 4, 3, 3]),
    },
}
V2_DESIGN = {
    "human": V1_DESIGN["human"],
    "ai": {
        "Introduction & framing": ("uniform", [4, 4, 4, 5, 4, 4, 4]),
        "Product communication": ("uniform", [4, 4, 4, 4, 4, 4, 4]),
        "Salesmanship & drive": ("uniform", [4, 4, 4, 3, 4, 4, 4]),
        "Objection handling": ("pattern", [4, 4, 4, 3, 3]),
        "Closing & next steps": ("uniform", [4, 4, 4, 4, 4, 3, 4]),
    },
}

EVALUATORS = [f"E{i}" for i in range(1, 8)]


def _rotate(values: list[int], by: int) -> list[int]:
    by %= len(values)
    return values[by:] + values[:by]


def build_scoresheet_csv(design: dict, packet, rubric) -> str:
    scenario_of = {item["label"]: item["scenario_id"] for item in packet.items}
    kind_of = {
        label: entry["agent_kind"] for label, entry in packet.sealed_key["labels"].items()
    }
    lines = ["evaluator_id,label,criterion_id,score"]
    for e_idx, evaluator in enumerate(EVALUATORS):
        for item in packet.items:
            label = item["label"]
            scenario_idx = SCENARIOS.index(scenario_of[label])
            table = design[kind_of[label]]
            for category in rubric.categories:
                mode, values = table[category.name]
                for c_idx, criterion in enumerate(category.criteria):
                    if mode == "uniform":
                        # Rotating by scenario varies the raw sheets without
                        # changing any mean or std.
                        score = _rotate(values, scenario_idx)[e_idx]
                    else:
                        score = values[c_idx]
                    lines.append(f"{evaluator},{label},{criterion.id},{score}")
    return "\n".join(lines) + "\n"


def check_close(a: float, b: float, what: str) -> None:
    if abs(a - b) > 1e-9 * max(1.0, abs(b)):
        raise SystemExit(f"golden verification failed for {what}: {a} != {b}")


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    RECORDINGS.mkdir(parents=True, exist_ok=True)
    SCORESHEETS.mkdir(parents=True, exist_ok=True)

    # Oracle-derived goldens.
    stats = corpus_counts.compute_stats(CORPUS)
    (GOLDEN / "corpus_stats.json").write_text(json.dumps(stats, indent=2) + "\n")

    tiers = tier_oracle.tier_table(CORPUS)
    exemplars = tier_oracle.exemplar_ids(CORPUS, 5)
    (GOLDEN / "tier_table.json").write_text(json.dumps(tiers, indent=2) + "\n")
    (GOLDEN / "exemplars_k5.json").write_text(json.dumps(exemplars, indent=2) + "\n")

    # Pipeline goldens: clone at seed 7 and render.
    corpus = load_corpus(CORPUS)
    config = AppConfig()
    result = run_clone_pipeline(corpus, config, seed=7)
    (GOLDEN / "playbook.json").write_text(to_canonical_json(result.playbook))
    prompt = render_system_prompt(result.playbook, config.gateway.slot_values)
    (GOLDEN / "rendered_prompt.txt").write_text(prompt)

    # Trial recordings: AI via the gateway, human from the reference script.
    gateway = LocalGateway(GOLDEN, slot_values=config.gateway.slot_values)
    recordings = []
    for scenario_id in SCENARIOS:
        scenario = load_scenario(scenario_id)
        ai = run_scripted_trial(
            gateway, scenario, playbook_id="playbook", trial_id=f"t-{scenario_id}-ai"
        )
        if not ai.valid:
            raise SystemExit(f"trial failed: {ai.error}")
        human = reference_trial(scenario, trial_id=f"t-{scenario_id}-human")
        recordings.extend([ai, human])
    for recording in recordings:
        (RECORDINGS / f"{recording.trial_id}.json").write_text(
            json.dumps(recording.to_dict(), indent=2, ensure_ascii=False) + "\n"
        )

    # Blind packet at seed 42, verified against the shuffle oracle.
    packet = build_blind_packet(recordings, seed=42)
    expected_labels = shuffle_oracle.label_assignment(
        [r.trial_id for r in recordings], 42
    )
    actual_labels = {
        label: entry["trial_id"] for label, entry in packet.sealed_key["labels"].items()
    }
    if actual_labels != expected_labels:
        raise SystemExit("blind packet labels disagree with the shuffle oracle")
    write_blind_packet(packet, GOLDEN / "packet_seed42.json", GOLDEN / "key_seed42.json")
    (GOLDEN / "blind_seed42_labels.json").write_text(
        json.dumps(expected_labels, indent=2, sort_keys=True) + "\n"
    )

    # Score sheets and aggregate reports.
    rubric = load_rubric()
    v1_csv = build_scoresheet_csv(V1_DESIGN, packet, rubric)
    v2_csv = build_scoresheet_csv(V2_DESIGN, packet, rubric)
    (SCORESHEETS / "scores_v1.csv").write_text(v1_csv)
    (SCORESHEETS / "scores_v2.csv").write_text(v2_csv)

    reports = {}
    for version, csv_text in (("v1", v1_csv), ("v2", v2_csv)):
        sheets = parse_scoresheets_csv(csv_text)
        table = ingest_score_sheets(packet, sheets, rubric)
        report = aggregate_scores(table, packet.sealed_key, rubric)
        brute = aggregate_bruteforce.from_csv_and_key(
            SCORESHEETS / f"scores_{version}.csv",
            GOLDEN / "key_seed42.json",
            GOLDEN / "packet_seed42.json",
            ROOT / "src" / "voiceclone" / "data" / "rubric.json",
        )
        for scenario, kinds in brute.items():
            for kind, cell in kinds.items():
                ours = report.cells[scenario][kind]
                check_close(
                    ours["overall_mean"], cell["overall_mean"], f"{version} overall"
                )
                for category, stats_block in cell["categories"].items():
                    check_close(
                        ours["categories"][category]["mean"],
                        stats_block["mean"],
                        f"{version} {scenario}/{kind}/{category} mean",
                    )
                    check_close(
                        ours["categories"][category]["std"],
                        stats_block["std"],
                        f"{version} {scenario}/{kind}/{category} std",
                    )
        reports[version] = report
        (GOLDEN / f"report_{version}.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        )

    v1_obj = [
        reports["v1"].cells[s]["ai"]["categories"]["Objection handling"]["mean"]
        for s in SCENARIOS
    ]
    v2_obj = [
        reports["v2"].cells[s]["ai"]["categories"]["Objection handling"]["mean"]
        for s in SCENARIOS
    ]
    print("AI objection-handling means v1:", v1_obj, "v2:", v2_obj)

    comparison = compare_reports(reports["v1"], reports["v2"])
    (GOLDEN / "compare_v1_v2.json").write_text(
        json.dumps(comparison, indent=2, sort_keys=True) + "\n"
    )
    pct = comparison["categories"]["Objection handling"]["pct_change"]
    print(f"objection-handling change: {pct:+.2f}%")
    if abs(pct - 20.0) > 0.1:
        raise SystemExit("V1->V2 objection-handling change is not +20%")
    print("goldens written")


if __name__ == "__main__":
    main()
