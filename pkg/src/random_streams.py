"""
DynSC - Random Streams
Counter-based random streams keyed by integer tuples. Every walk draws from its
own Philox stream derived from (seed, namespace, edge, copy, side), so walk
generation is reproducible regardless of the order walks are produced in.
"""
from typing import List

import numpy as np

TERMINALS = 1
WALKS = 2
REBUILD = 3
HARNESS = 4
SPARSIFIER = 5


def generator(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for the given key path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


class UniformStream:
    """
    Lazily created stream of uniforms in [0, 1).

    Walks that start on a terminal never draw, so the generator is only
    built on first use; draws are buffered in small blocks.
    """

    __slots__ = ("_key", "_gen", "_buffer", "_block", "draws")

    def __init__(self, seed: int, *key: int, block: int = 64):
        self._key = (int(seed),) + tuple(int(k) for k in key)
        self._gen = None
        self._buffer: List[float] = []
        self._block = block
        self.draws = 0

    def random(self) -> float:
        if not self._buffer:
            if self._gen is None:
                self._gen = generator(*self._key)
            self._buffer = self._gen.random(self._block).tolist()
            self._buffer.reverse()
        self.draws += 1
        return self._buffer.pop()


def walk_stream(seed: int, edge_id: int, copy: int, side: int) -> UniformStream:
    return UniformStream(seed, WALKS, edge_id, copy, side)


def epoch_seed(seed: int, epoch: int) -> int:
    """Seed for the given rebuild epoch; epochs never share walk randomness."""
    return int(np.random.SeedSequence([int(seed), REBUILD, int(epoch)]).generate_state(1)[0])
