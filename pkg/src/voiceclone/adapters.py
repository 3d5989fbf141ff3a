"""Speech-to-speech backends behind one session-scoped contract.

Three implementations:
- EchoAdapter: loops customer audio back verbatim; the reference backend
  for fidelity and latency tests.
- ScriptedAdapter: replays a scenario script's agent lines with
  deterministic tone-coded placeholder audio; drives evaluation trials.
- ExternalSpeechConnector: configuration plus a connection state machine
  for a hosted realtime speech model; excluded from the test suite.

Adapters are created per session and owned by it; they are never shared.
"""

from __future__ import annotations

import asyncio
import importlib.resources
import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

SAMPLE_RATE = 16000
FRAME_MS = 20
SAMPLES_PER_FRAME = SAMPLE_RATE * FRAME_MS // 1000  # 320
FRAME_BYTES = SAMPLES_PER_FRAME * 2  # 640

SCENARIO_IDS = ("happy_path", "negotiation", "complaining")
TRIGGERS = ("on_session_start", "on_turn_complete")

# Event kinds. session_end extends the core set: a scripted backend must be
# able to signal that its material is exhausted.
EVENT_KINDS = ("audio_delta", "transcript_delta", "turn_complete", "session_end", "error")


class AdapterError(Exception):
    """Adapter initialization or protocol failure."""


@dataclass
class AdapterEvent:
    kind: str
    audio: bytes = b""
    text: str = ""

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise AdapterError(f"unknown adapter event kind '{self.kind}'")


class SpeechAdapter:
    """Base contract: async, ordered, one logical turn at a time."""

    async def start(self, system_prompt: str) -> list[AdapterEvent]:
        return []

    async def handle_audio(self, pcm: bytes) -> list[AdapterEvent]:
        raise NotImplementedError

    async def end_of_input(self) -> list[AdapterEvent]:
        raise NotImplementedError

    async def interrupt(self) -> None:
        """Barge-in notification; stateless mocks ignore it."""

    async def close(self) -> None:
        pass


class EchoAdapter(SpeechAdapter):
    """Loopback backend: every input frame comes straight back out.

    processing_delay_ms simulates model work once per turn (on end of
    input) so real-time-factor measurements have something to measure.
    """

    def __init__(self, processing_delay_ms: int = 0) -> None:
        self.processing_delay_ms = processing_delay_ms

    async def handle_audio(self, pcm: bytes) -> list[AdapterEvent]:
        return [AdapterEvent("audio_delta", audio=pcm)]

    async def end_of_input(self) -> list[AdapterEvent]:
        if self.processing_delay_ms > 0:
            await asyncio.sleep(self.processing_delay_ms / 1000.0)
        return [AdapterEvent("turn_complete")]


@dataclass
class ScenarioStep:
    trigger: str
    text: str
    agent_reply: str
    synthetic_pcm: bytes | None = None


@dataclass
class ScenarioScript:
    scenario_id: str
    customer_turns: list[ScenarioStep]
    expected_agent_behaviors: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.scenario_id not in SCENARIO_IDS:
            raise AdapterError(f"unknown scenario_id '{self.scenario_id}'")
        if not self.customer_turns:
            raise AdapterError("scenario script has no customer turns")
        for i, step in enumerate(self.customer_turns):
            if step.trigger not in TRIGGERS:
                raise AdapterError(f"customer_turns[{i}]: unknown trigger '{step.trigger}'")
            expected = "on_session_start" if i == 0 else "on_turn_complete"
            if step.trigger != expected:
                raise AdapterError(
                    f"customer_turns[{i}]: trigger must be '{expected}' at this position"
                )
            if not step.text.strip() or not step.agent_reply.strip():
                raise AdapterError(f"customer_turns[{i}]: empty text")


def script_from_dict(data: dict) -> ScenarioScript:
    steps = []
    for item in data.get("customer_turns", []):
        pcm = None
        if item.get("synthetic_pcm"):
            import base64

            pcm = base64.b64decode(item["synthetic_pcm"])
        steps.append(
            ScenarioStep(
                trigger=str(item.get("trigger", "")),
                text=str(item.get("text", "")),
                agent_reply=str(item.get("agent_reply", "")),
                synthetic_pcm=pcm,
            )
        )
    script = ScenarioScript(
        scenario_id=str(data.get("scenario_id", "")),
        customer_turns=steps,
        expected_agent_behaviors=[str(b) for b in data.get("expected_agent_behaviors", [])],
    )
    script.validate()
    return script


def load_scenario(name_or_path: str) -> ScenarioScript:
    """Load a bundled scenario by id, or any script from a JSON file path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        data = json.loads(path.read_text(encoding="utf-8"))
    else:
        resource = importlib.resources.files("voiceclone.data.scenarios").joinpath(
            f"{name_or_path}.json"
        )
        try:
            data = json.loads(resource.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise AdapterError(f"unknown scenario '{name_or_path}'") from exc
    return script_from_dict(data)


def synth_tone_pcm(frequency_hz: float, n_samples: int, amplitude: float = 0.3) -> bytes:
    """Deterministic 16-bit LE mono sine tone at the gateway sample rate."""
    scale = amplitude * 32767.0
    step = 2.0 * math.pi * frequency_hz / SAMPLE_RATE
    return b"".join(
        struct.pack("<h", int(scale * math.sin(step * i))) for i in range(n_samples)
    )


def reply_tone_frames(step_index: int, n_frames: int) -> list[bytes]:
    """Placeholder agent audio: tone frequency keyed by script step index."""
    frequency = 300.0 + 40.0 * step_index
    pcm = synth_tone_pcm(frequency, SAMPLES_PER_FRAME * n_frames)
    return [pcm[i * FRAME_BYTES : (i + 1) * FRAME_BYTES] for i in range(n_frames)]


class ScriptedAdapter(SpeechAdapter):
    """Replays the script's agent lines, one step per completed customer turn.

    The reply to each customer utterance is one transcript delta (the
    scripted line plus a newline so deltas concatenate readably) and
    frames_per_reply tone-coded audio frames. A trigger arriving after the
    script is exhausted yields turn_complete plus session_end.
    """

    def __init__(self, script: ScenarioScript, frames_per_reply: int = 10) -> None:
        script.validate()
        self.script = script
        self.frames_per_reply = frames_per_reply
        self.step_index = 0

    async def handle_audio(self, pcm: bytes) -> list[AdapterEvent]:
        return []

    async def end_of_input(self) -> list[AdapterEvent]:
        if self.step_index >= len(self.script.customer_turns):
            return [AdapterEvent("turn_complete"), AdapterEvent("session_end")]
        step = self.script.customer_turns[self.step_index]
        events = [AdapterEvent("transcript_delta", text=step.agent_reply + "\n")]
        for frame_pcm in reply_tone_frames(self.step_index, self.frames_per_reply):
            events.append(AdapterEvent("audio_delta", audio=frame_pcm))
        events.append(AdapterEvent("turn_complete"))
        self.step_index += 1
        if self.step_index >= len(self.script.customer_turns):
            events.append(AdapterEvent("session_end"))
        return events


ENV_UPSTREAM_URL = "VC_UPSTREAM_URL"
ENV_UPSTREAM_KEY = "VC_UPSTREAM_KEY"

_CONNECTOR_STATES = ("disconnected", "connecting", "ready", "closed")


class ExternalSpeechConnector(SpeechAdapter):
    """Connector for a hosted realtime speech-to-speech service.

    Reads endpoint and credentials from VC_UPSTREAM_URL / VC_UPSTREAM_KEY
    (constructor arguments win). Only the configuration checks and the
    connection state machine run offline; the websocket leg needs a real
    upstream and is not exercised by the test suite.
    """

    def __init__(self, url: str | None = None, api_key: str | None = None) -> None:
        self.url = url if url is not None else os.environ.get(ENV_UPSTREAM_URL, "")
        self.api_key = (
            api_key if api_key is not None else os.environ.get(ENV_UPSTREAM_KEY, "")
        )
        self.state = "disconnected"
        self._ws = None

    def _transition(self, new_state: str) -> None:
        allowed = {
            "disconnected": ("connecting", "closed"),
            "connecting": ("ready", "closed"),
            "ready": ("closed",),
            "closed": (),
        }
        if new_state not in allowed[self.state]:
            raise AdapterError(f"illegal connector transition {self.state} -> {new_state}")
        self.state = new_state

    async def start(self, system_prompt: str) -> list[AdapterEvent]:
        if not self.url:
            raise AdapterError(f"external connector: {ENV_UPSTREAM_URL} is not configured")
        self._transition("connecting")
        import websockets

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            self._ws = await websockets.connect(self.url, additional_headers=headers)
            await self._ws.send(json.dumps({"type": "session.start", "prompt": system_prompt}))
        except Exception as exc:
            self._transition("closed")
            raise AdapterError(f"external connector: connect failed: {exc}") from exc
        self._transition("ready")
        return []

    async def handle_audio(self, pcm: bytes) -> list[AdapterEvent]:
        if self.state != "ready":
            raise AdapterError("external connector: not connected")
        await self._ws.send(pcm)
        return await self._drain_nonblocking()

    async def end_of_input(self) -> list[AdapterEvent]:
        if self.state != "ready":
            raise AdapterError("external connector: not connected")
        await self._ws.send(json.dumps({"type": "audio.end"}))
        events: list[AdapterEvent] = []
        while True:
            message = await self._ws.recv()
            event = self._to_event(message)
            events.append(event)
            if event.kind in ("turn_complete", "error", "session_end"):
                return events

    async def _drain_nonblocking(self) -> list[AdapterEvent]:
        events: list[AdapterEvent] = []
        while True:
            try:
                message = await asyncio.wait_for(self._ws.recv(), timeout=0.0)
            except (asyncio.TimeoutError, Exception):
                return events
            events.append(self._to_event(message))

    @staticmethod
    def _to_event(message: object) -> AdapterEvent:
        if isinstance(message, (bytes, bytearray)):
            return AdapterEvent("audio_delta", audio=bytes(message))
        data = json.loads(message)
        kind = data.get("type", "")
        if kind == "transcript.delta":
            return AdapterEvent("transcript_delta", text=data.get("text", ""))
        if kind == "turn.complete":
            return AdapterEvent("turn_complete")
        if kind == "session.end":
            return AdapterEvent("session_end")
        return AdapterEvent("error", text=json.dumps(data))

    async def close(self) -> None:
        if self.state in ("connecting", "ready", "disconnected"):
            if self._ws is not None:
                try:
                    await self._ws.close()
                except Exception:
                    pass
            if self.state == "disconnected":
                self.state = "closed"
            else:
                self._transition("closed")


ADAPTER_KINDS = ("echo", "scripted", "external")


def make_adapter(
    kind: str,
    *,
    scenario: str = "happy_path",
    processing_delay_ms: int = 0,
    frames_per_reply: int = 10,
) -> SpeechAdapter:
    if kind == "echo":
        return EchoAdapter(processing_delay_ms=processing_delay_ms)
    if kind == "scripted":
        return ScriptedAdapter(load_scenario(scenario), frames_per_reply=frames_per_reply)
    if kind == "external":
        return ExternalSpeechConnector()
    raise AdapterError(f"unsupported adapter kind '{kind}'")
