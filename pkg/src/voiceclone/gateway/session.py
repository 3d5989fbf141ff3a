"""Per-session relay engine between one client and one speech adapter.

Each session is owned by a single logical task; the outbound side is a
bounded queue the transport (or an in-process test client) drains with
next_message()/try_next_message(). Overflow drops the oldest queued agent
audio rather than blocking ingestion. Barge-in discards all
queued-but-unsent agent audio, emits playback.cancel, and returns the
session to listening; at most one already-popped frame can still reach
the client afterwards.

State machine: idle -> listening -> speaking -> listening ... -> closing
-> closed. "speaking" covers the span from the first queued agent audio
frame of a turn until its turn-complete marker is delivered (or a
barge-in cancels it). Every transition is checked against the legal set.

Metrics: first_response_latency_ms is measured from session start to the
first agent audio frame; one turn latency is measured from the client's
audio.end to the adapter's turn_complete; percentiles use nearest-rank;
rtf = wall time spent inside adapter calls / duration of agent audio
produced.
"""

from __future__ import annotations

import asyncio
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from ..adapters import AdapterEvent, SpeechAdapter
from .frames import (
    AudioFrame,
    BYTES_PER_MS,
    encode_frame,
    validate_payload,
)

SESSION_STATES = ("idle", "listening", "speaking", "closing", "closed")

_TRANSITIONS = {
    "idle": ("listening", "closing"),
    "listening": ("speaking", "closing"),
    "speaking": ("listening", "closing"),
    "closing": ("closed",),
    "closed": (),
}

DEFAULT_QUEUE_CAPACITY = 100


class SessionError(Exception):
    pass


class SessionClosedError(SessionError):
    pass


@dataclass
class OutMessage:
    kind: str  # "binary" | "json" | "end"
    data: bytes = b""
    payload: dict[str, Any] = field(default_factory=dict)
    droppable: bool = False
    turn_marker: bool = False


class OutboundQueue:
    """Bounded FIFO; overflow evicts the oldest droppable (audio) item."""

    def __init__(self, capacity: int = DEFAULT_QUEUE_CAPACITY) -> None:
        self._items: deque[OutMessage] = deque()
        self._capacity = capacity
        self._ready = asyncio.Event()
        self.dropped = 0

    def __len__(self) -> int:
        return len(self._items)

    def put(self, item: OutMessage) -> None:
        if item.droppable and len(self._items) >= self._capacity:
            for i, existing in enumerate(self._items):
                if existing.droppable:
                    del self._items[i]
                    self.dropped += 1
                    break
        self._items.append(item)
        self._ready.set()

    def try_get(self) -> OutMessage | None:
        if not self._items:
            return None
        item = self._items.popleft()
        if not self._items:
            self._ready.clear()
        return item

    async def get(self) -> OutMessage:
        while True:
            item = self.try_get()
            if item is not None:
                return item
            self._ready.clear()
            await self._ready.wait()

    def has_pending_speech(self) -> bool:
        return any(m.droppable or m.turn_marker for m in self._items)

    def drop_pending_speech(self) -> int:
        """Remove queued agent audio and turn markers; keep everything else."""
        kept = deque(m for m in self._items if not (m.droppable or m.turn_marker))
        removed = len(self._items) - len(kept)
        self._items = kept
        if not self._items:
            self._ready.clear()
        return removed


@dataclass
class SessionMetrics:
    first_response_latency_ms: int | None
    turn_latencies_ms: list[int]
    p50_latency_ms: int
    p95_latency_ms: int
    rtf: float
    frames_in: int
    frames_out: int
    frames_dropped: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "session.metrics",
            "first_response_latency_ms": self.first_response_latency_ms,
            "turn_latencies_ms": list(self.turn_latencies_ms),
            "p50_latency_ms": self.p50_latency_ms,
            "p95_latency_ms": self.p95_latency_ms,
            "rtf": self.rtf,
            "frames_in": self.frames_in,
            "frames_out": self.frames_out,
            "frames_dropped": self.frames_dropped,
        }


def nearest_rank(values: list[int], percentile: float) -> int:
    """Nearest-rank percentile (rank = ceil(p/100 * n)); 0 for an empty series."""
    if not values:
        return 0
    ordered = sorted(values)
    rank = max(1, math.ceil(percentile / 100.0 * len(ordered)))
    return ordered[rank - 1]


class GatewaySession:
    """One live voice session: client audio in, adapter events out."""

    def __init__(
        self,
        session_id: str,
        playbook_id: str,
        adapter: SpeechAdapter,
        system_prompt: str = "",
        queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
        clock: Callable[[], float] = time.monotonic,
    ) -> None:
        self.session_id = session_id
        self.playbook_id = playbook_id
        self.adapter = adapter
        self.system_prompt = system_prompt
        self.state = "idle"
        self.frames_in = 0
        self.frames_out = 0
        self._clock = clock
        self._queue = OutboundQueue(queue_capacity)
        self._last_seq_in = 0
        self._seq_out = 0
        self._out_bytes = 0
        self._processing_s = 0.0
        self._started_at: float | None = None
        self._first_response_ms: int | None = None
        self._turn_latencies: list[int] = []
        self._eou_at: float | None = None
        self._metrics: SessionMetrics | None = None

    # -- state machine --------------------------------------------------

    def _transition(self, new_state: str) -> None:
        if new_state not in _TRANSITIONS[self.state]:
            raise SessionError(
                f"illegal session transition {self.state} -> {new_state}"
            )
        self.state = new_state

    def _require_open(self) -> None:
        if self.state in ("closing", "closed"):
            raise SessionClosedError("session is closed")
        if self.state == "idle":
            raise SessionError("session not started")

    # -- lifecycle --------------------------------------------------------

    async def start(self) -> None:
        if self.state != "idle":
            raise SessionError("session already started")
        events = await self._timed_adapter_call(self.adapter.start(self.system_prompt))
        if events is None:
            # Adapter init failed; the session is already closed with an
            # error event queued for the client.
            raise SessionError("adapter failed during session start")
        self._started_at = self._clock()
        self._transition("listening")
        await self._process_events(events)

    async def close(self) -> SessionMetrics:
        """Close the session and emit the final metrics message."""
        if self._metrics is not None:
            return self._metrics
        if self.state != "closing":
            self._transition("closing")
        try:
            await self.adapter.close()
        except Exception:
            pass
        self._metrics = self._compute_metrics()
        self._queue.put(OutMessage("json", payload=self._metrics.to_dict()))
        self._transition("closed")
        self._queue.put(OutMessage("end"))
        return self._metrics

    # -- inbound ----------------------------------------------------------

    async def ingest_audio(self, frame: AudioFrame) -> None:
        self._require_open()
        expected = self._last_seq_in + 1
        if frame.seq != expected:
            self.emit_json(
                {
                    "type": "error",
                    "code": "seq_gap",
                    "message": f"seq gap at {frame.seq} (expected {expected})",
                }
            )
            await self.close()
            return
        self._last_seq_in = frame.seq
        problem = validate_payload(frame.pcm)
        if problem:
            self.emit_json(
                {"type": "error", "code": "invalid_payload", "message": problem}
            )
            return
        self.frames_in += 1
        events = await self._timed_adapter_call(self.adapter.handle_audio(frame.pcm))
        if events is not None:
            await self._process_events(events)

    def reject_payload(self, seq: int, message: str) -> None:
        """Record an undecodable payload for a frame whose header was valid."""
        self._last_seq_in = max(self._last_seq_in, seq)
        self.emit_json({"type": "error", "code": "invalid_payload", "message": message})

    async def end_of_utterance(self) -> None:
        self._require_open()
        self._eou_at = self._clock()
        events = await self._timed_adapter_call(self.adapter.end_of_input())
        if events is not None:
            await self._process_events(events)

    async def barge_in(self) -> None:
        self._require_open()
        if self.state != "speaking":
            self.emit_json(
                {
                    "type": "warning",
                    "code": "barge_in_ignored",
                    "message": "barge-in while the agent is not speaking",
                }
            )
            return
        self._queue.drop_pending_speech()
        self.emit_json({"type": "playback.cancel"})
        self._transition("listening")
        try:
            await self.adapter.interrupt()
        except Exception:
            pass

    # -- adapter event handling --------------------------------------------

    async def _timed_adapter_call(self, coro) -> list[AdapterEvent] | None:
        t0 = self._clock()
        try:
            return await coro
        except Exception as exc:
            self.emit_json(
                {"type": "error", "code": "adapter_error", "message": str(exc)}
            )
            await self.close()
            return None
        finally:
            self._processing_s += self._clock() - t0

    async def _process_events(self, events: list[AdapterEvent]) -> None:
        for event in events:
            if event.kind == "audio_delta":
                self._emit_audio(event.audio)
            elif event.kind == "transcript_delta":
                self.emit_json({"type": "agent.transcript.delta", "text": event.text})
            elif event.kind == "turn_complete":
                if self._eou_at is not None:
                    latency = int(round((self._clock() - self._eou_at) * 1000))
                    self._turn_latencies.append(latency)
                    self._eou_at = None
                self._queue.put(
                    OutMessage(
                        "json",
                        payload={"type": "agent.turn.complete"},
                        turn_marker=True,
                    )
                )
            elif event.kind == "session_end":
                self.emit_json({"type": "session.end"})
                await self.close()
                return
            elif event.kind == "error":
                self.emit_json(
                    {"type": "error", "code": "adapter_error", "message": event.text}
                )
                await self.close()
                return

    def _emit_audio(self, pcm: bytes) -> None:
        if not pcm:
            return
        self._seq_out += 1
        pts_ms = self._out_bytes // BYTES_PER_MS
        frame = AudioFrame(seq=self._seq_out, pts_ms=pts_ms, pcm=pcm)
        self._queue.put(OutMessage("binary", data=encode_frame(frame), droppable=True))
        self.frames_out += 1
        self._out_bytes += len(pcm)
        if self._first_response_ms is None and self._started_at is not None:
            self._first_response_ms = int(
                round((self._clock() - self._started_at) * 1000)
            )
        if self.state == "listening":
            self._transition("speaking")

    def emit_json(self, payload: dict[str, Any]) -> None:
        """Queue a JSON event for the client (also used by the transport layer)."""
        self._queue.put(OutMessage("json", payload=payload))

    # -- outbound ----------------------------------------------------------

    def _deliver(self, item: OutMessage) -> tuple[str, Any] | None:
        if item.kind == "end":
            return None
        if item.turn_marker and self.state == "speaking":
            if not self._queue.has_pending_speech():
                self._transition("listening")
        if item.kind == "binary":
            return ("binary", item.data)
        return ("json", item.payload)

    async def next_message(self) -> tuple[str, Any] | None:
        """Await the next outbound message; None once the session has ended."""
        item = await self._queue.get()
        return self._deliver(item)

    def try_next_message(self) -> tuple[str, Any] | None:
        """Non-blocking pop; None when the queue is currently empty.

        The end-of-stream sentinel is returned as ("end", None) so pumping
        clients can tell "nothing right now" from "session over".
        """
        item = self._queue.try_get()
        if item is None:
            return None
        delivered = self._deliver(item)
        if delivered is None:
            return ("end", None)
        return delivered

    @property
    def pending_messages(self) -> int:
        return len(self._queue)

    @property
    def frames_dropped(self) -> int:
        return self._queue.dropped

    # -- metrics -----------------------------------------------------------

    def _compute_metrics(self) -> SessionMetrics:
        audio_ms = self._out_bytes / BYTES_PER_MS
        rtf = (self._processing_s * 1000.0 / audio_ms) if audio_ms > 0 else 0.0
        return SessionMetrics(
            first_response_latency_ms=self._first_response_ms,
            turn_latencies_ms=list(self._turn_latencies),
            p50_latency_ms=nearest_rank(self._turn_latencies, 50),
            p95_latency_ms=nearest_rank(self._turn_latencies, 95),
            rtf=rtf,
            frames_in=self.frames_in,
            frames_out=self.frames_out,
            frames_dropped=self._queue.dropped,
        )


def open_session(
    playbook_id: str,
    adapter: SpeechAdapter,
    system_prompt: str = "",
    session_id: str = "s1",
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
    clock: Callable[[], float] = time.monotonic,
) -> GatewaySession:
    """Construct a session; callers await session.start() to begin listening."""
    return GatewaySession(
        session_id=session_id,
        playbook_id=playbook_id,
        adapter=adapter,
        system_prompt=system_prompt,
        queue_capacity=queue_capacity,
        clock=clock,
    )
