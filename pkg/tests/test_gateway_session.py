from __future__ import annotations

import asyncio

import pytest

from voiceclone.adapters import AdapterEvent, EchoAdapter, ScriptedAdapter, SpeechAdapter, load_scenario
from voiceclone.gateway.frames import AudioFrame, decode_frame
from voiceclone.gateway.session import (
    GatewaySession,
    OutboundQueue,
    OutMessage,
    SessionClosedError,
    SessionError,
    nearest_rank,
)


def run(coro):
    return asyncio.run(coro)


def drain(session):
    """Pop everything currently queued; returns (binary frames, json messages)."""
    frames, messages = [], []
    while True:
        item = session.try_next_message()
        if item is None:
            return frames, messages
        kind, body = item
        if kind == "binary":
            frames.append(decode_frame(body))
        elif kind == "json":
            messages.append(body)
        else:  # end sentinel
            return frames, messages


class FakeClock:
    def __init__(self):
        self.now = 1000.0

    def __call__(self):
        return self.now


class TimedAdapter(SpeechAdapter):
    """Replays (advance_seconds, events) behaviors per end_of_input call."""

    def __init__(self, clock, turns):
        self.clock = clock
        self.turns = list(turns)

    async def handle_audio(self, pcm):
        return []

    async def end_of_input(self):
        advance, events = self.turns.pop(0)
        self.clock.now += advance
        return events


def audio_second():
    # 1 s of 16 kHz 16-bit PCM, under the 64 KiB payload cap.
    return AdapterEvent("audio_delta", audio=bytes(32_000))


class TestLifecycle:
    def test_open_session_listening_with_zero_counters(self):
        session = GatewaySession("s", "pb", EchoAdapter())
        run(session.start())
        assert session.state == "listening"
        assert (session.frames_in, session.frames_out) == (0, 0)

    def test_double_start_rejected(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            await session.start()

        with pytest.raises(SessionError):
            run(go())

    def test_ingest_before_start_rejected(self):
        session = GatewaySession("s", "pb", EchoAdapter())
        with pytest.raises(SessionError):
            run(session.ingest_audio(AudioFrame(1, 0, b"\0\0")))

    def test_ingest_after_close_rejected(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            await session.close()
            await session.ingest_audio(AudioFrame(1, 0, b"\0\0"))

        with pytest.raises(SessionClosedError):
            run(go())

    def test_close_is_idempotent(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            first = await session.close()
            second = await session.close()
            return first, second

        first, second = run(go())
        assert first is second
        assert session.state == "closed"

    def test_illegal_transition_asserted(self):
        session = GatewaySession("s", "pb", EchoAdapter())
        with pytest.raises(SessionError, match="illegal"):
            session._transition("speaking")  # idle -> speaking is not legal


class TestIngestOrdering:
    def test_frames_forwarded_in_order(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            for i in range(1, 4):
                await session.ingest_audio(AudioFrame(i, 0, bytes([i]) * 640))

        run(go())
        frames, _ = drain(session)
        assert session.frames_in == 3
        assert [f.seq for f in frames] == [1, 2, 3]
        assert [f.pcm[0] for f in frames] == [1, 2, 3]

    def test_seq_gap_is_protocol_error(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            await session.ingest_audio(AudioFrame(1, 0, b"\0" * 640))
            await session.ingest_audio(AudioFrame(3, 0, b"\0" * 640))

        run(go())
        _, messages = drain(session)
        errors = [m for m in messages if m.get("type") == "error"]
        assert errors and errors[0]["code"] == "seq_gap"
        assert "seq gap at 3" in errors[0]["message"]
        assert session.state == "closed"
        assert any(m.get("type") == "session.metrics" for m in messages)

    def test_oversized_payload_rejected_session_survives(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            await session.ingest_audio(AudioFrame(1, 0, bytes(70_000)))
            await session.ingest_audio(AudioFrame(2, 0, b"\x05\x06" * 320))

        run(go())
        frames, messages = drain(session)
        assert [m["code"] for m in messages if m.get("type") == "error"] == [
            "invalid_payload"
        ]
        assert len(frames) == 1  # only the valid frame echoed
        assert session.state not in ("closing", "closed")

    def test_upstream_audio_gets_fresh_seq_and_pts(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            for i in range(1, 4):
                await session.ingest_audio(AudioFrame(i, 999, b"\x01\x00" * 320))

        run(go())
        frames, _ = drain(session)
        assert [f.seq for f in frames] == [1, 2, 3]
        assert [f.pts_ms for f in frames] == [0, 20, 40]

    def test_turn_complete_returns_to_listening(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            await session.ingest_audio(AudioFrame(1, 0, b"\0" * 640))
            await session.end_of_utterance()

        run(go())
        assert session.state == "speaking"  # marker not yet delivered
        _, messages = drain(session)
        assert any(m["type"] == "agent.turn.complete" for m in messages)
        assert session.state == "listening"


class TestScriptedFlow:
    def test_transcripts_match_script_lines_in_order(self):
        script = load_scenario("happy_path")
        session = GatewaySession("s", "pb", ScriptedAdapter(script))

        async def go():
            texts = []
            await session.start()
            seq = 0
            for _ in script.customer_turns:
                seq += 1
                await session.ingest_audio(AudioFrame(seq, 0, b"\0" * 640))
                await session.end_of_utterance()
                _, messages = drain(session)
                texts.extend(
                    m["text"] for m in messages if m["type"] == "agent.transcript.delta"
                )
            return texts

        texts = run(go())
        assert [t.strip() for t in texts] == [
            s.agent_reply for s in script.customer_turns
        ]


class TestBargeIn:
    def make_speaking_session(self):
        script = load_scenario("happy_path")
        session = GatewaySession("s", "pb", ScriptedAdapter(script, frames_per_reply=10))

        async def go():
            await session.start()
            await session.ingest_audio(AudioFrame(1, 0, b"\0" * 640))
            await session.end_of_utterance()

        run(go())
        return session

    def test_bounded_flush_after_four_frames(self):
        session = self.make_speaking_session()
        received_audio = 0
        saw_cancel = False
        while True:
            item = session.try_next_message()
            if item is None:
                break
            kind, body = item
            if kind == "binary":
                received_audio += 1
                if received_audio == 4:
                    run(session.barge_in())
            elif kind == "json" and body.get("type") == "playback.cancel":
                saw_cancel = True
                break
        assert saw_cancel
        assert received_audio <= 5
        assert session.state == "listening"

    def test_barge_in_while_listening_is_warned_noop(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            await session.barge_in()

        run(go())
        _, messages = drain(session)
        assert messages[-1]["type"] == "warning"
        assert session.state == "listening"

    def test_repeated_barge_in_idempotent(self):
        session = self.make_speaking_session()
        run(session.barge_in())
        run(session.barge_in())  # second one is a no-op warning
        frames, messages = drain(session)
        kinds = [m["type"] for m in messages]
        assert kinds.count("playback.cancel") == 1
        assert "warning" in kinds
        assert session.state == "listening"


class TestMetrics:
    def test_nearest_rank(self):
        assert nearest_rank([100, 200, 300], 50) == 200
        assert nearest_rank([100, 200, 300], 95) == 300
        assert nearest_rank([], 50) == 0
        assert nearest_rank([7], 95) == 7

    def test_rtf_half(self):
        clock = FakeClock()
        turns = [(5.0, [audio_second() for _ in range(10)] + [AdapterEvent("turn_complete")])]
        session = GatewaySession("s", "pb", TimedAdapter(clock, turns), clock=clock)

        async def go():
            await session.start()
            await session.ingest_audio(AudioFrame(1, 0, b"\0" * 640))
            await session.end_of_utterance()
            return await session.close()

        metrics = run(go())
        assert metrics.rtf == pytest.approx(0.5)

    def test_latency_percentiles(self):
        clock = FakeClock()
        turns = [
            (0.1, [AdapterEvent("turn_complete")]),
            (0.2, [AdapterEvent("turn_complete")]),
            (0.3, [AdapterEvent("turn_complete")]),
        ]
        session = GatewaySession("s", "pb", TimedAdapter(clock, turns), clock=clock)

        async def go():
            await session.start()
            seq = 0
            for _ in range(3):
                seq += 1
                await session.ingest_audio(AudioFrame(seq, 0, b"\0" * 640))
                await session.end_of_utterance()
            return await session.close()

        metrics = run(go())
        assert metrics.turn_latencies_ms == [100, 200, 300]
        assert metrics.p50_latency_ms == 200
        assert metrics.p95_latency_ms == 300

    def test_echo_session_drops_nothing_when_drained(self):
        session = GatewaySession("s", "pb", EchoAdapter())

        async def go():
            await session.start()
            for i in range(1, 301):
                await session.ingest_audio(AudioFrame(i, 0, b"\x01\x00" * 320))
                drain(session)
            return await session.close()

        metrics = run(go())
        assert metrics.frames_dropped == 0
        assert metrics.frames_in == metrics.frames_out == 300

    def test_backpressure_drops_oldest_audio(self):
        session = GatewaySession("s", "pb", EchoAdapter(), queue_capacity=10)

        async def go():
            await session.start()
            for i in range(1, 31):  # no draining: overflow expected
                await session.ingest_audio(AudioFrame(i, 0, bytes([i]) * 640))
            return await session.close()

        metrics = run(go())
        assert metrics.frames_dropped > 0
        frames, _ = drain(session)
        # Oldest frames were evicted; the newest survive in order.
        seqs = [f.seq for f in frames]
        assert seqs == sorted(seqs)
        assert seqs[-1] == 30


class TestIsolation:
    def test_concurrent_sessions_keep_independent_counters(self):
        a = GatewaySession("a", "pb", EchoAdapter())
        b = GatewaySession("b", "pb", EchoAdapter())

        async def go():
            await a.start()
            await b.start()
            for i in range(1, 4):
                await a.ingest_audio(AudioFrame(i, 0, b"\xaa\x00" * 320))
            await b.ingest_audio(AudioFrame(1, 0, b"\xbb\x00" * 320))
            return await a.close(), await b.close()

        metrics_a, metrics_b = run(go())
        assert metrics_a.frames_in == 3 and metrics_b.frames_in == 1
        frames_a, _ = drain(a)
        frames_b, _ = drain(b)
        assert [f.seq for f in frames_a] == [1, 2, 3]
        assert [f.seq for f in frames_b] == [1]


class TestOutboundQueue:
    def test_drop_policy_targets_droppable_only(self):
        queue = OutboundQueue(capacity=2)
        queue.put(OutMessage("json", payload={"type": "x"}))
        queue.put(OutMessage("binary", data=b"1", droppable=True))
        queue.put(OutMessage("binary", data=b"2", droppable=True))
        queue.put(OutMessage("binary", data=b"3", droppable=True))
        assert queue.dropped == 2
        items = [queue.try_get() for _ in range(len(queue))]
        assert items[0].payload == {"type": "x"}
        assert items[-1].data == b"3"

    def test_async_get_wakes_on_put(self):
        queue = OutboundQueue(capacity=4)

        async def go():
            async def producer():
                await asyncio.sleep(0.01)
                queue.put(OutMessage("json", payload={"type": "late"}))

            task = asyncio.create_task(producer())
            item = await queue.get()
            await task
            return item

        assert run(go()).payload == {"type": "late"}


class FailingAdapter(SpeechAdapter):
    async def start(self, system_prompt):
        raise RuntimeError("upstream unreachable")

    async def handle_audio(self, pcm):
        return []

    async def end_of_input(self):
        return []


def test_adapter_failure_at_start_closes_with_error():
    session = GatewaySession("s", "pb", FailingAdapter())
    with pytest.raises(SessionError, match="adapter failed"):
        run(session.start())
    assert session.state == "closed"
    _, messages = drain(session)
    codes = [m.get("code") for m in messages if m.get("type") == "error"]
    assert "adapter_error" in codes
    assert any(m.get("type") == "session.metrics" for m in messages)


class InterleavingAdapter(SpeechAdapter):
    """Emits audio and transcript deltas interleaved in a fixed order."""

    async def handle_audio(self, pcm):
        return []

    async def end_of_input(self):
        return [
            AdapterEvent("transcript_delta", text="first "),
            AdapterEvent("audio_delta", audio=b"\x01\x00" * 320),
            AdapterEvent("transcript_delta", text="second "),
            AdapterEvent("audio_delta", audio=b"\x02\x00" * 320),
            AdapterEvent("turn_complete"),
        ]


def test_delivery_preserves_adapter_emission_order():
    session = GatewaySession("s", "pb", InterleavingAdapter())

    async def go():
        await session.start()
        await session.ingest_audio(AudioFrame(1, 0, b"\0" * 640))
        await session.end_of_utterance()

    run(go())
    sequence = []
    while True:
        item = session.try_next_message()
        if item is None:
            break
        kind, body = item
        if kind == "binary":
            sequence.append("audio")
        elif kind == "json" and body["type"] == "agent.transcript.delta":
            sequence.append("text")
        elif kind == "json" and body["type"] == "agent.turn.complete":
            sequence.append("complete")
    assert sequence == ["text", "audio", "text", "audio", "complete"]
