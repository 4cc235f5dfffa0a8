"""Per-agent deterministic random streams.

Every random draw in a simulation comes from a stream derived from
``(master_seed, agent_id, purpose)``, so agents can be processed in any order
or on any number of workers without changing results.
"""
from __future__ import annotations

import hashlib
import random

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def tag_hash(tag: str) -> int:
    """Stable 64-bit hash of a text tag (unlike ``hash()``, not salted per process)."""
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "little")


def stream_state(master_seed: int, agent_id: int, purpose: str) -> int:
    # for a fixed purpose the key is a bijection of agent_id, so states never collide
    key = splitmix64((agent_id & MASK64) ^ splitmix64(tag_hash(purpose)))
    return splitmix64(splitmix64((master_seed & MASK64) ^ key))


class Stream(random.Random):
    """A ``random.Random`` seeded from a mixed 64-bit state."""

    def __init__(self, state: int):
        self.state = state
        super().__init__(state)


def derive_stream(master_seed: int, agent_id: int, purpose: str) -> Stream:
    return Stream(stream_state(master_seed, agent_id, purpose))


def unit_hash(*parts: object) -> float:
    """Deterministic uniform value in [0, 1) from arbitrary parts."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return (int.from_bytes(digest, "little") >> 11) / float(1 << 53)
