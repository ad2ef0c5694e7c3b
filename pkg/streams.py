import logging
import zlib

import numpy as np

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

BLOCK_SIZE = 1000


def _tag_code(tag):
    """Stable integer for a stream tag"""
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    return zlib.crc32(str(tag).encode("utf-8"))


def stream(seed, tag, *counters):
    """Counter-based generator keyed by (seed, tag, counters...)

    The same key always yields the same Philox stream, independent of which
    worker draws it or in what order.
    """
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, _tag_code(tag)] + [int(c) for c in counters]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def blocks(n_samples, block_size=BLOCK_SIZE):
    """Split a sample budget into (block_index, size) pairs of fixed size"""
    if n_samples < 0:
        raise ValueError("Sample count must be non-negative")
    out = []
    start = 0
    index = 0
    while start < n_samples:
        size = min(block_size, n_samples - start)
        out.append((index, size))
        start += size
        index += 1
    return out


def run_blocks(func, n_samples, executor=None, block_size=BLOCK_SIZE):
    """Evaluate func(block_index, size) over all blocks, results in block order"""
    work = blocks(n_samples, block_size)
    if executor is None:
        return [func(index, size) for index, size in work]
    futures = [executor.submit(func, index, size) for index, size in work]
    return [f.result() for f in futures]


def run_ordered(func, items, executor=None):
    """Map func over items, optionally on a pool, preserving item order"""
    if executor is None:
        return [func(item) for item in items]
    return list(executor.map(func, items))
