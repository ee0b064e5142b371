"""Counter-based SplitMix64 streams shared by both kernel backends.

Each path owns a stream seeded from ``(base_seed, path_index, stream_id)``;
the k-th draw (k >= 1) of a stream with state ``s`` is ``mix64(s + k * GAMMA)``.
Uniforms are ``((z >> 11) + 0.5) * 2**-53``, strictly inside (0, 1); the top
value would round to 1.0 and is clamped to the largest double below one.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_MASK = (1 << 64) - 1

# stream ids
CHAIN_STREAM = 0
RATE_STREAM = 1


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


_U_MAX = 1.0 - 2.0**-53


def to_unit(z: np.ndarray) -> np.ndarray:
    return np.minimum(((z >> _S11).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0), _U_MAX)


def path_seeds(base_seed: int, path_index, stream: int) -> np.ndarray:
    """Per-path stream states; depends only on the three inputs."""
    base = np.array([int(base_seed) & _MASK], dtype=np.uint64)
    key = mix64(base + np.array([stream + 1], dtype=np.uint64) * GAMMA)
    idx = np.asarray(path_index, dtype=np.uint64) + np.uint64(1)
    return mix64(key + idx * GAMMA)


def draws(seeds: np.ndarray, count: int) -> np.ndarray:
    """First ``count`` raw outputs of each stream, shape ``(n, count)``."""
    k = np.arange(1, count + 1, dtype=np.uint64) * GAMMA
    return mix64(np.asarray(seeds, dtype=np.uint64)[:, None] + k[None, :])
