"""Reference implementation of the seeded sampling draw.

Documented algorithm: order call ids lexically, then repeatedly pop at
random.Random(seed).randrange(len(pool)). Implemented here from the raw
JSONL so the pipeline's selection can be checked against it.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path


def sample_ids(jsonl_path: str | Path, n: int, seed: int) -> list[str]:
    ids = sorted(
        json.loads(line)["call_id"]
        for line in Path(jsonl_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    )
    if n >= len(ids):
        return ids
    rng = random.Random(seed)
    pool = list(ids)
    picked = []
    for _ in range(n):
        picked.append(pool.pop(rng.randrange(len(pool))))
    return picked


if __name__ == "__main__":
    print(json.dumps(sample_ids(sys.argv[1], int(sys.argv[2]), int(sys.argv[3]))))
