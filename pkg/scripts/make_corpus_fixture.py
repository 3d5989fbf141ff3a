#!/usr/bin/env python3
"""Generate the synthetic 50-call fixture corpus (deterministic, stdlib only).

Run once; the output JSONL is committed at fixtures/corpus_50.jsonl and the
golden files derive from it. Regenerating with the same seed reproduces the
file byte-for-byte.

Usage: python scripts/make_corpus_fixture.py [out.jsonl]
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

SEED = 20260114

CUSTOMER_NAMES = [
    "Somchai", "Malee", "Anong", "Prasert", "Suda", "Kiet", "Nok", "Chai",
    "Dara", "Wichai", "Pim", "Tana", "Ying", "Boon", "Lek",
]

OPENING_VARIANTS = [
    "Sawaddee ka, this is {agent} calling from Siam Broadband. Am I speaking with Khun {customer}?",
    "Good morning, this is {agent} from Siam Broadband. Is this Khun {customer}?",
    "Hello, {agent} here from Siam Broadband. May I speak with Khun {customer}, please?",
]

OPENING_REPLIES = [
    "Yes, speaking. What is this about?",
    "Hello, yes, this is {customer}.",
    "Speaking. Who did you say you were?",
]

PURPOSE_LINES = [
    "Thank you for taking my call. I am calling about our premium internet package upgrade for your area. Do you have two minutes?",
    "I appreciate you picking up. We have a new offer on the premium internet package and I wanted to check if it fits you. Is now a good time?",
]

PURPOSE_REPLIES = [
    "Alright, go ahead.",
    "Two minutes then, I was about to go out.",
    "Okay, tell me quickly.",
]

DISCOVERY_QUESTIONS = [
    "May I ask how you use your internet at home, mostly streaming or working from home?",
    "Could you tell me whether your current speed feels slow at peak times?",
]

DISCOVERY_REPLIES = [
    "Mostly streaming in the evenings, and sometimes video calls.",
    "It gets slow after dinner when everyone is online.",
    "My children play games online and complain about lag.",
]

FACT_LINES = {
    "speed": "The premium internet package gives you 600 Mbps of download speed, double a standard plan.",
    "price": "It costs 799 baht per month on a 12 month contract, with the price fixed for the whole term.",
    "installation": "Installation is free this month and normally costs 1500 baht, and the engineer comes within 2 days.",
    "promotion": "With the current promotion the first 3 months are half price, and you keep a 30 day window to cancel without any fee.",
}

FACT_ACKS = [
    "I see, that is more than I expected.",
    "Okay, noted.",
    "Right, go on.",
]

OBJECTIONS = {
    "price": (
        "That sounds too expensive for me.",
        "I understand the concern, khun. Over the first year the promotion makes it cheaper than most standard plans, and the speed doubles, so you pay less per megabit.",
    ),
    "hesitation": (
        "I need to think about it first.",
        "Of course, take your time. You also get a 30 day cancellation window, so you can try it with no risk while you decide.",
    ),
    "busy": (
        "I am quite busy right now, can you call back later?",
        "I understand completely, I will take only one more minute and then let you go.",
    ),
    "existing_provider": (
        "I already have a contract with another provider.",
        "That is very common, khun. Many customers note the switch date now so the promotion is reserved when the old contract expires.",
    ),
}

CLOSING_SALE = [
    (
        "Shall we confirm your sign up today so the promotion is locked in?",
        "Alright, let us do it.",
        "Wonderful, I will confirm the sign up and send the contract summary. Thank you for your time today, and have a wonderful day.",
    ),
]

CLOSING_APPOINTMENT = [
    (
        "Shall I book the installation appointment for this week?",
        "Thursday afternoon would work for me.",
        "Perfect, I will schedule the installation for Thursday afternoon. Thank you for your time today, and have a wonderful day.",
    ),
    (
        "Would you like me to schedule the installation for next week?",
        "Next Tuesday morning suits me.",
        "Great, the installation appointment is booked for Tuesday morning. Thank you for your time today, and have a wonderful day.",
    ),
]

CLOSING_FOLLOW_UP = [
    (
        "Then I will follow up with a call on Friday with the details in writing, is that alright?",
        "Yes, Friday is fine.",
        "Thank you, I will send you the details and follow up on Friday. Thank you for your time today, and have a wonderful day.",
    ),
]

CLOSING_REJECTION = [
    (
        "Is there anything that would make the offer work for you?",
        "No, I am really not interested, thank you.",
        "I understand, thank you for hearing me out. Thank you for your time today, and have a wonderful day.",
    ),
]

CLOSING_REMOVED = [
    (
        "Would you like to hear the promotion details?",
        "No. Please remove me from your call list.",
        "Of course, I will remove you from the call list right away, and I apologize for the disturbance. Thank you for your time today, and have a wonderful day.",
    ),
]

# agent -> (call count, outcomes, duration profile)
# Duration profile: target mean in ms and jitter; top agents sit near the
# corpus median, weaker agents drift.
AGENTS = [
    ("A01", ["sale"] * 5 + ["appointment"] * 3 + ["follow_up", "rejection"], 240_000, 20_000),
    ("A02", ["sale"] * 4 + ["appointment"] * 2 + ["follow_up", "rejection"], 250_000, 25_000),
    ("A03", ["sale"] * 2 + ["appointment"] * 2 + ["follow_up"] * 2 + ["rejection"] * 2 + ["removed_from_list"], 180_000, 40_000),
    ("A04", ["sale", "appointment"] + ["follow_up"] * 2 + ["rejection"] * 3 + ["removed_from_list"], 320_000, 50_000),
    ("A05", ["appointment"] + ["follow_up"] * 2 + ["rejection"] * 4 + ["removed_from_list"], 150_000, 35_000),
    ("A06", ["sale"] * 3 + ["appointment"] * 2 + ["follow_up", "rejection"], 255_000, 15_000),
]

CLOSINGS = {
    "sale": CLOSING_SALE,
    "appointment": CLOSING_APPOINTMENT,
    "follow_up": CLOSING_FOLLOW_UP,
    "rejection": CLOSING_REJECTION,
    "removed_from_list": CLOSING_REMOVED,
}


def build_call(rng: random.Random, call_no: int, agent_id: str, outcome: str,
               target_ms: int, jitter_ms: int) -> dict:
    customer = rng.choice(CUSTOMER_NAMES)
    agent_name = {"A01": "Arisa", "A02": "Nicha", "A03": "Somsak", "A04": "Preeda",
                  "A05": "Kamol", "A06": "Waan"}[agent_id]

    lines: list[tuple[str, str]] = []
    lines.append(("agent", rng.choice(OPENING_VARIANTS).format(agent=agent_name, customer=customer)))
    lines.append(("customer", rng.choice(OPENING_REPLIES).format(customer=customer)))
    lines.append(("agent", rng.choice(PURPOSE_LINES)))
    lines.append(("customer", rng.choice(PURPOSE_REPLIES)))
    lines.append(("agent", rng.choice(DISCOVERY_QUESTIONS)))
    lines.append(("customer", rng.choice(DISCOVERY_REPLIES)))

    topics = rng.sample(list(FACT_LINES), k=2)
    for topic in topics:
        lines.append(("agent", FACT_LINES[topic]))
        lines.append(("customer", rng.choice(FACT_ACKS)))

    # One or two objection exchanges, keyed to topics when possible.
    objection_keys = []
    if "price" in topics and outcome != "sale":
        objection_keys.append("price")
    extra = rng.choice(["hesitation", "busy", "existing_provider"])
    if outcome in ("follow_up", "rejection", "removed_from_list") or rng.random() < 0.5:
        objection_keys.append(extra)
    if outcome == "rejection" and "price" not in objection_keys and rng.random() < 0.5:
        objection_keys.insert(0, "price")
    for key in objection_keys:
        said, reply = OBJECTIONS[key]
        lines.append(("customer", said))
        lines.append(("agent", reply))

    ask, answer, farewell = rng.choice(CLOSINGS[outcome])
    lines.append(("agent", ask))
    lines.append(("customer", answer))
    lines.append(("agent", farewell))

    tags = sorted(set(topics) | ({"price"} if "price" in objection_keys else set()))

    turns = []
    cursor = 0
    for speaker, text in lines:
        duration = max(1200, 260 * len(text.split()))
        turns.append({
            "speaker": speaker,
            "text": text,
            "start_ms": cursor,
            "end_ms": cursor + duration,
        })
        cursor += duration + rng.randrange(200, 900)

    talk_ms = turns[-1]["end_ms"]
    target = max(talk_ms + 1000, target_ms + rng.randrange(-jitter_ms, jitter_ms))
    minute = call_no * 7
    timestamp = f"2025-11-{3 + call_no % 24:02d}T{9 + minute // 60 % 8:02d}:{minute % 60:02d}:00Z"
    return {
        "call_id": f"call-{call_no:04d}",
        "agent_id": agent_id,
        "timestamp": timestamp,
        "duration_ms": target,
        "outcome": outcome,
        "topic_tags": tags,
        "turns": turns,
    }


def main() -> None:
    out_path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("fixtures/corpus_50.jsonl")
    rng = random.Random(SEED)
    records = []
    call_no = 0
    for agent_id, outcomes, target_ms, jitter_ms in AGENTS:
        for outcome in outcomes:
            call_no += 1
            records.append(build_call(rng, call_no, agent_id, outcome, target_ms, jitter_ms))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {len(records)} records to {out_path}")


if __name__ == "__main__":
    main()
