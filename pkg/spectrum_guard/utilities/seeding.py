"""
Named random sub-streams derived from one root seed.

Every random decision in the toolkit (scene layout, shadowing, weight init,
shuffling) draws from a stream keyed by ``(root seed, stream name, index)``, so
any sample can be regenerated independently of evaluation order.
"""

import zlib

import numpy as np

SCENE = "scene"
SHADOWING = "shadowing"
SENSORS = "sensors"
WEIGHTS = "weights"
SHUFFLE = "shuffle"


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode('utf-8'))


class SeedStreams:
    """Factory of independent ``numpy.random.Generator`` streams."""

    def __init__(self, root_seed: int):
        self.root_seed = int(root_seed)

    def generator(self, name: str, index: int = 0) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            entropy=self.root_seed,
            spawn_key=(_name_key(name), int(index))
        )
        return np.random.default_rng(sequence)

    def integer_seed(self, name: str, index: int = 0) -> int:
        """A 32-bit seed for libraries that take plain integers (torch)."""
        return int(self.generator(name, index).integers(0, 2**31 - 1))
