"""Deterministic random number generation.

All stochastic behaviour in the toolkit (weight init, epoch shuffling,
trajectory sampling, synthetic noise) flows through ``Rng`` so that a single
64-bit seed pins every output. The underlying bit generator is Philox, a
counter-based generator whose stream is identical on all platforms.
"""

from __future__ import annotations

import numpy as np


class Rng:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray | float:
        return self._gen.uniform(low, high, size)

    def standard_normal_pair(self, size=None) -> tuple[np.ndarray, np.ndarray]:
        """Two independent standard-normal draws via Box-Muller."""
        u1 = self._gen.uniform(np.finfo(np.float64).tiny, 1.0, size)
        u2 = self._gen.uniform(0.0, 1.0, size)
        r = np.sqrt(-2.0 * np.log(u1))
        return r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        z, _ = self.standard_normal_pair(size)
        return loc + scale * z

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def shuffle_order(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self) -> "Rng":
        """Derive an independent child stream (used per-window / per-command)."""
        child = Rng(0)
        child._gen = np.random.Generator(np.random.Philox(key=self._gen.integers(0, 2**63)))
        return child
