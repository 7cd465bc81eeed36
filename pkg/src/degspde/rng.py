"""
Counter-based Gaussian streams.

Every standard normal used by a trajectory is a pure function of
``(seed, trajectory, step)``: the Philox key carries ``seed`` and the
trajectory index, the top counter word carries the block number
``step // block``.  Resuming at any step, or running trajectories in a
different order or on a different number of threads, therefore reproduces
the same draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_BLOCK = 256


def _generator(seed: int, trajectory: int, block: int) -> np.random.Generator:
    key = ((int(seed) & (2**64 - 1)) << 64) | (int(trajectory) & (2**64 - 1))
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, int(block)])
    return np.random.Generator(bitgen)


@dataclass
class GaussianStreams:
    """Per-step standard normal vectors for a batch of trajectories.

    Parameters
    ----------
    seed : int
        Master seed.
    trajectories : array_like of int
        Global trajectory indices; the stream of index ``i`` does not depend on
        which other indices share the batch.
    n_modes : int
        Length of each draw.
    block : int
        Steps generated per Philox counter block.
    """

    seed: int
    trajectories: np.ndarray
    n_modes: int
    block: int = DEFAULT_BLOCK

    def __post_init__(self):
        self.trajectories = np.atleast_1d(np.asarray(self.trajectories, dtype=np.int64))
        self._cached_block = -1
        self._buffer = None

    def _fill(self, block: int):
        buf = np.empty((self.block, self.trajectories.shape[0], self.n_modes))
        for j, traj in enumerate(self.trajectories):
            buf[:, j, :] = _generator(self.seed, traj, block).standard_normal((self.block, self.n_modes))
        self._buffer = buf
        self._cached_block = block

    def normals(self, step: int) -> np.ndarray:
        """Standard normals of shape ``(n_trajectories, n_modes)`` for ``step``."""
        block, row = divmod(int(step), self.block)
        if block != self._cached_block:
            self._fill(block)
        return self._buffer[row]

    def lineage(self) -> dict:
        return {
            "generator": "philox4x64",
            "seed": int(self.seed),
            "block": int(self.block),
            "trajectories": [int(self.trajectories.min()), int(self.trajectories.max())],
        }


def normals_at(seed: int, trajectory: int, step: int, n_modes: int, block: int = DEFAULT_BLOCK) -> np.ndarray:
    """Single draw, without caching (for spot checks and tests)."""
    b, row = divmod(int(step), block)
    return _generator(seed, trajectory, b).standard_normal((block, n_modes))[row]
