"""Binary audio frame layout for the session websocket.

Layout: 1-byte type tag (0x01 audio), 4-byte big-endian sequence number,
8-byte big-endian presentation timestamp in ms, then the PCM payload
(16-bit little-endian mono at 16 kHz). Nominal frame is 20 ms = 640
bytes of PCM; payloads must be even-length and at most 64 KiB.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

FRAME_TYPE_AUDIO = 0x01
HEADER = struct.Struct(">BIQ")
HEADER_SIZE = HEADER.size  # 13

SAMPLE_RATE = 16000
BYTES_PER_SAMPLE = 2
BYTES_PER_MS = SAMPLE_RATE * BYTES_PER_SAMPLE // 1000  # 32
FRAME_MS = 20
FRAME_BYTES = FRAME_MS * BYTES_PER_MS  # 640
MAX_PAYLOAD = 64 * 1024

MAX_SEQ = 2**32 - 1
MAX_PTS = 2**64 - 1


class FrameError(Exception):
    """Unusable frame: bad tag or truncated header."""


class FramePayloadError(Exception):
    """Decodable header but an invalid payload (odd length or oversized)."""

    def __init__(self, seq: int, message: str) -> None:
        super().__init__(message)
        self.seq = seq


@dataclass(frozen=True)
class AudioFrame:
    seq: int
    pts_ms: int
    pcm: bytes


def validate_payload(pcm: bytes) -> str | None:
    if len(pcm) % 2 != 0:
        return "payload length is odd"
    if len(pcm) > MAX_PAYLOAD:
        return f"payload exceeds {MAX_PAYLOAD} bytes"
    return None


def encode_frame(frame: AudioFrame) -> bytes:
    if not 0 <= frame.seq <= MAX_SEQ:
        raise FrameError(f"seq {frame.seq} out of u32 range")
    if not 0 <= frame.pts_ms <= MAX_PTS:
        raise FrameError(f"pts_ms {frame.pts_ms} out of u64 range")
    problem = validate_payload(frame.pcm)
    if problem:
        raise FramePayloadError(frame.seq, problem)
    return HEADER.pack(FRAME_TYPE_AUDIO, frame.seq, frame.pts_ms) + frame.pcm


def decode_frame(data: bytes) -> AudioFrame:
    if len(data) < HEADER_SIZE:
        raise FrameError("frame shorter than header")
    frame_type, seq, pts_ms = HEADER.unpack_from(data)
    if frame_type != FRAME_TYPE_AUDIO:
        raise FrameError(f"unknown frame type 0x{frame_type:02x}")
    pcm = data[HEADER_SIZE:]
    problem = validate_payload(pcm)
    if problem:
        raise FramePayloadError(seq, problem)
    return AudioFrame(seq=seq, pts_ms=pts_ms, pcm=pcm)


def pcm_duration_ms(n_bytes: int) -> float:
    return n_bytes / BYTES_PER_MS


def split_pcm_frames(pcm: bytes, frame_bytes: int = FRAME_BYTES) -> list[bytes]:
    """Chop a PCM buffer into frame-sized pieces (last piece may be short)."""
    return [pcm[i : i + frame_bytes] for i in range(0, len(pcm), frame_bytes)]
