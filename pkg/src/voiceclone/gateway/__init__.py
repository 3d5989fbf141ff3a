"""Realtime voice session gateway: frame codec, session engine, websocket server."""

from .frames import (
    AudioFrame,
    FRAME_BYTES,
    FRAME_MS,
    FrameError,
    FramePayloadError,
    MAX_PAYLOAD,
    SAMPLE_RATE,
    decode_frame,
    encode_frame,
    pcm_duration_ms,
    split_pcm_frames,
)
from .server import PlaybookStore, create_app
from .session import (
    GatewaySession,
    OutboundQueue,
    SessionClosedError,
    SessionError,
    SessionMetrics,
    nearest_rank,
    open_session,
)

__all__ = [
    "AudioFrame",
    "FRAME_BYTES",
    "FRAME_MS",
    "FrameError",
    "FramePayloadError",
    "MAX_PAYLOAD",
    "SAMPLE_RATE",
    "decode_frame",
    "encode_frame",
    "pcm_duration_ms",
    "split_pcm_frames",
    "PlaybookStore",
    "create_app",
    "GatewaySession",
    "OutboundQueue",
    "SessionClosedError",
    "SessionError",
    "SessionMetrics",
    "nearest_rank",
    "open_session",
]
