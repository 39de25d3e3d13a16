"""Counter-based random streams.

Every random object in the package is drawn from a Philox generator keyed by
``(seed, stream)`` where ``stream`` packs a purpose tag and an integer index.
Draws therefore depend only on the seed and the index, never on batch layout
or evaluation order.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_INDEX_BITS = 48

# purpose tags
DRIVING = 1
RESAMPLE = 2
TEST_DATA = 3


def stream_key(seed: int, index: int, tag: int = DRIVING) -> np.ndarray:
    if index < 0 or index >= (1 << _INDEX_BITS):
        raise ValueError(f"stream index out of range: {index}")
    return np.array([int(seed) & _MASK64, (int(tag) << _INDEX_BITS) | int(index)], dtype=np.uint64)


def generator(seed: int, index: int = 0, tag: int = DRIVING) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, index, tag)))


def normals(seed: int, indices, shape, tag: int = DRIVING, scale: float = 1.0) -> np.ndarray:
    """Stack of standard normal arrays, one independent stream per index."""
    indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    out = np.empty((len(indices),) + tuple(shape))
    for j, idx in enumerate(indices):
        out[j] = generator(seed, int(idx), tag).standard_normal(shape)
    if scale != 1.0:
        out *= scale
    return out
