"""Splittable seeded random streams.

Every random draw in the package goes through :func:`stream`, so a result is
a pure function of ``(seed, stream_id)`` and parallel chunks never share state.
"""

import numpy as np

# stream ids for the fixed generators; chunked Monte Carlo uses the chunk index
# under its own namespace so the two never collide
SUPPORT = 1
PLANTED = 2
PATTERNS = 3
SEARCH = 4
MONTE_CARLO = 5
BOX = 6
DENSE_MODEL = 7
VERIFY = 8


def stream(seed, *stream_id):
    """Return an independent generator keyed by ``seed`` and a tuple of ids."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(i) for i in stream_id))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *stream_id):
    """A 63-bit integer seed for a sub-computation that takes its own ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(i) for i in stream_id))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
