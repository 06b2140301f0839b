"""Counter-based seed derivation.

Every random stream is keyed by ``(master seed, *counters)`` so results do
not depend on the order or the process in which trials run.
"""

from __future__ import annotations

import numpy as np

# stream tags
GRAPH = 1
NOISE = 2
TIES = 3
DECISION_TIES = 4
PROCESS = 5


def derive_seed(master: int, *keys: int) -> int:
    """Return a 63-bit integer seed determined by ``master`` and ``keys``."""
    ss = np.random.SeedSequence([int(master) & (2**63 - 1), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def rng_for(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
