"""Counter-based random streams with reproducible per-path keying.

Every stochastic routine derives its randomness from a Philox bit generator
keyed by (seed, stream tag).  A path or block therefore owns a stream that
depends only on its global index, never on worker assignment or batch order,
which is what makes ensemble results bit-identical for any worker count.

Resample attempts use disjoint counter blocks of the same keyed stream, so a
rejected draw never perturbs its neighbours.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

# Stream kinds, kept in the high byte of the key's tag word so path streams
# and block streams can never collide.
KIND_PATH = 0
KIND_KAC_BLOCK = 1
KIND_PAIR_BLOCK = 2

# Pairs are drawn in fixed-size blocks; the block size is part of the
# determinism contract (results depend on it, not on worker count).
BLOCK_SIZE = 4096

_TAG_BITS = 56


def stream(seed: int, index: int, kind: int = KIND_PATH, attempt: int = 0) -> Generator:
    """Generator for stream ``index`` of the given kind under ``seed``."""
    if not 0 <= index < (1 << _TAG_BITS):
        raise ValueError("stream index out of range")
    if seed < 0 or index < 0 or attempt < 0:
        raise ValueError("seed, index and attempt must be nonnegative")
    tag = (np.uint64(kind) << np.uint64(_TAG_BITS)) | np.uint64(index)
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), tag], dtype=np.uint64)
    return Generator(Philox(key=key, counter=attempt << 64))


def path_stream(seed: int, path_index: int, attempt: int = 0) -> Generator:
    """Independent stream for one sampled path."""
    return stream(seed, path_index, KIND_PATH, attempt)


def coerce_stream(seed_or_stream: int | Generator) -> Generator:
    """Accept an integer seed or any object with a Generator-like .random."""
    if hasattr(seed_or_stream, "random"):
        return seed_or_stream
    return path_stream(int(seed_or_stream), 0)


def block_uniforms(
    seed: int, kind: int, block_index: int, attempt: int, shape: tuple[int, int]
) -> np.ndarray:
    """Uniform matrix for one fixed-size block of paths.

    Row i holds the draws of global path ``block_index * BLOCK_SIZE + i``;
    the matrix is always drawn at full block height so a partial final block
    consumes the same per-row values as a full one would.
    """
    gen = stream(seed, block_index, kind, attempt)
    return gen.random(shape)
