"""Reference seeded shuffle for blind packet label assignment.

Documented algorithm: sort trial ids, random.Random(seed).shuffle the
list, assign labels R01.. (width grows past 99 items) in shuffled order.
"""

from __future__ import annotations

import json
import random
import sys


def label_assignment(trial_ids: list[str], seed: int) -> dict[str, str]:
    ordered = sorted(trial_ids)
    rng = random.Random(seed)
    rng.shuffle(ordered)
    width = max(2, len(str(len(ordered))))
    return {f"R{i + 1:0{width}d}": trial_id for i, trial_id in enumerate(ordered)}


if __name__ == "__main__":
    seed = int(sys.argv[1])
    ids = sys.argv[2:]
    print(json.dumps(label_assignment(ids, seed), indent=2, sort_keys=True))
