"""Seed-addressable random streams.

Studies run one named stream per replicate, keyed by (master seed,
replicate index) through a counter-based generator, so any single
replicate can be re-run in isolation and the replicate evaluation order
never affects results.  Session streams are keyed the same way by a
per-session seed.
"""

from __future__ import annotations

import numpy as np

__all__ = ["replicate_rng", "stream_seed"]


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` of a study."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def stream_seed(master_seed: int, index: int) -> int:
    """A derived 63-bit seed for handing to subsystems that keep their own
    generator (e.g. a session)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
