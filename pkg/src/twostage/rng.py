"""Keyed, counter-based random streams.

Every stream is a Philox generator whose key is derived from a master seed
plus a tuple of integers (cell, replication, purpose, ...). Two runs that
ask for the same key get the same stream, whatever order or process the
request comes from, so results do not depend on the worker count.
"""
from __future__ import annotations

import zlib

from numpy.random import Generator, Philox, SeedSequence

# purpose tags
STAGE1 = 1
STAGE2 = 2
BOOT = 3
PERMUTE = 4
SIGNAL = 5
LIMIT = 6
MISC = 7


def tag(name: str) -> int:
    """Stable integer tag for a string label (e.g. a method name)."""
    return zlib.crc32(name.encode("utf-8"))


def stream(master_seed: int, *key: int) -> Generator:
    ss = SeedSequence(entropy=int(master_seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return Generator(Philox(ss))


def rep_streams(master_seed: int, cell: int, rep: int) -> tuple[Generator, Generator]:
    """(stage-1, stage-2) data streams for one replication."""
    return stream(master_seed, cell, rep, STAGE1), stream(master_seed, cell, rep, STAGE2)


def boot_stream(master_seed: int, cell: int, rep: int, label: str = "") -> Generator:
    return stream(master_seed, cell, rep, BOOT, tag(label))


def as_generator(rng: Generator | int | None) -> Generator:
    if isinstance(rng, Generator):
        return rng
    return stream(0 if rng is None else rng)


def spawn_block_seeds(master_seed: int, n_blocks: int, *key: int) -> list[Generator]:
    return [stream(master_seed, *key, b) for b in range(n_blocks)]


__all__ = [
    "STAGE1",
    "STAGE2",
    "BOOT",
    "PERMUTE",
    "SIGNAL",
    "LIMIT",
    "MISC",
    "tag",
    "stream",
    "rep_streams",
    "boot_stream",
    "as_generator",
    "spawn_block_seeds",
]
