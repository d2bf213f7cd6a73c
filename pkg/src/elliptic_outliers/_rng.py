"""Counter-based random streams keyed by (seed, trial, stream)."""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def stream(seed: int, trial_index: int = 0, stream_id: int = 0) -> np.random.Generator:
    """Return an independent Philox generator for one (seed, trial, stream) key.

    Philox is counter based, so the sequence drawn for a key depends only on
    the key and never on which other keys were consumed before it.
    """
    if seed < 0 or trial_index < 0 or stream_id < 0:
        raise ValueError("seed, trial_index and stream_id must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed) & MASK64,
                                spawn_key=(int(trial_index), int(stream_id)))
    return np.random.Generator(np.random.Philox(ss))
