"""Counter-based random streams.

Every draw in a run comes from a Philox stream addressed by
``(seed, replication, t)``.  The key is ``(seed, domain | replication)`` and
the time index lives in the third counter word, so the draws made at step
``t`` do not depend on how many draws earlier steps consumed, or on how
work inside a step is scheduled.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_DOMAIN_SHIFT = 56

#: stream families; keeps simulation draws disjoint from filter draws
FILTER = 0
SIMULATE = 1
SMOOTH = 2
INIT = 3


def _key(seed: int, replication: int, domain: int) -> np.ndarray:
    if seed < 0 or seed > _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if replication < 0 or replication >= (1 << _DOMAIN_SHIFT):
        raise ValueError(f"replication index out of range: {replication}")
    return np.array([seed, (domain << _DOMAIN_SHIFT) | replication], dtype=np.uint64)


def _state(key: np.ndarray, t: int) -> dict:
    return {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array([0, 0, t & _MASK64, 0], dtype=np.uint64),
            "key": key,
        },
        "buffer": np.zeros(4, dtype=np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }


class RngStream:
    """A positioned random stream.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit run seed.
    replication : int
        Replication index.
    t : int
        Time index.
    domain : int
        Stream family (``FILTER``, ``SIMULATE``, ...).

    Two ``RngStream`` objects with equal ``(seed, replication, t, domain)``
    produce identical draw sequences.
    """

    def __init__(self, seed: int, replication: int = 0, t: int = 0, domain: int = FILTER):
        self.seed = int(seed)
        self.stream_id = (int(replication), int(t))
        self.domain = int(domain)
        bitgen = np.random.Philox(key=_key(self.seed, self.stream_id[0], self.domain),
                                  counter=[0, 0, self.stream_id[1], 0])
        self.generator = np.random.Generator(bitgen)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, domain={self.domain})"


class StreamFactory:
    """Re-positions one Philox generator at ``(seed, replication, t)``.

    Cheaper than building a new bit generator per step; the generator
    returned by :meth:`at` is shared, so draw from it before calling
    :meth:`at` again.
    """

    def __init__(self, seed: int, replication: int = 0, domain: int = FILTER):
        self.seed = int(seed)
        self.replication = int(replication)
        self.domain = int(domain)
        self._key = _key(self.seed, self.replication, self.domain)
        self._bitgen = np.random.Philox(key=self._key)
        self._generator = np.random.Generator(self._bitgen)

    def at(self, t: int) -> np.random.Generator:
        self._bitgen.state = _state(self._key, int(t))
        return self._generator


def stream(seed: int, replication: int = 0, t: int = 0, domain: int = FILTER) -> np.random.Generator:
    """Fresh generator for one ``(seed, replication, t)`` address."""
    return RngStream(seed, replication, t, domain).generator
