"""Labelled, splittable random streams.

Every stochastic component of a run (partitioning, client subsampling,
mini-batch order, weight init, attack sampling, exploration) draws from its
own stream derived from the single master seed plus a purpose label and an
optional index tuple. Streams are keyed, counter-based generators, so the
sequence a component sees never depends on scheduling order or on how much
randomness other components consumed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = ["RngStream", "derive_stream"]


def _purpose_key(purpose: str) -> int:
    # Stable across processes, unlike hash().
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass
class RngStream:
    """A labelled random stream backed by a counter-based generator.

    Identical (master_seed, purpose, indices) labels reproduce the identical
    sequence; changing any part of the label yields an independent stream.
    """

    stream_id: str
    gen: np.random.Generator

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def permutation(self, x):
        return self.gen.permutation(x)

    def choice(self, a, size=None, replace=True, p=None):
        return self.gen.choice(a, size=size, replace=replace, p=p)


def derive_stream(master_seed: int, purpose: str, indices=()) -> RngStream:
    """Derive the stream labelled (purpose, *indices) from the master seed.

    Deterministic in all arguments. Distinct labels give streams that are
    statistically independent (Philox keyed through a SeedSequence spawn key).
    """
    key = (_purpose_key(purpose),) + tuple(int(i) for i in indices)
    seq = np.random.SeedSequence(int(master_seed), spawn_key=key)
    gen = np.random.Generator(np.random.Philox(seq))
    label = purpose if not indices else f"{purpose}:{'.'.join(str(i) for i in indices)}"
    return RngStream(stream_id=label, gen=gen)
