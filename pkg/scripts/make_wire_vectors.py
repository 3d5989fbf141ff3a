#!/usr/bin/env python3
"""Generate the binary-frame conformance vectors shared by both clients.

Packs each case straight from the documented layout (1-byte type 0x01,
u32 BE seq, u64 BE pts_ms, PCM payload) with struct, independent of any
codec implementation. Output: fixtures/golden/wire_vectors.json.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path


def pack(seq: int, pts_ms: int, pcm: bytes) -> bytes:
    return struct.pack(">BIQ", 0x01, seq, pts_ms) + pcm


def ramp_pcm(n_samples: int, start: int = -1000, step: int = 25) -> bytes:
    values = [(start + i * step - 32768) % 65536 - 32768 for i in range(n_samples)]
    return struct.pack(f"<{n_samples}h", *values)


def main() -> None:
    cases = [
        {"name": "empty_payload", "seq": 1, "pts_ms": 0, "pcm": b""},
        {"name": "single_sample", "seq": 2, "pts_ms": 20, "pcm": struct.pack("<h", 12345)},
        {
            "name": "nominal_20ms_frame",
            "seq": 50,
            "pts_ms": 980,
            "pcm": ramp_pcm(320),
        },
        {
            "name": "large_seq_and_pts",
            "seq": 4294967295,
            "pts_ms": 1099511627776,
            "pcm": ramp_pcm(8, start=32000, step=191),
        },
    ]
    out = []
    for case in cases:
        frame = pack(case["seq"], case["pts_ms"], case["pcm"])
        out.append(
            {
                "name": case["name"],
                "seq": case["seq"],
                "pts_ms": case["pts_ms"],
                "pcm_hex": case["pcm"].hex(),
                "frame_hex": frame.hex(),
            }
        )
    path = Path("fixtures/golden/wire_vectors.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(out)} vectors to {path}")


if __name__ == "__main__":
    main()
