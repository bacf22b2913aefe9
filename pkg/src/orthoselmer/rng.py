"""Seeded, splittable random streams.

Work is cut into fixed-size chunks and chunk ``i`` always draws from stream
``(seed, i)``, so results do not depend on how many workers run the chunks.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 2048


def stream(seed, *key):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def chunk_sizes(total, size=CHUNK):
    full, rest = divmod(int(total), size)
    return [size] * full + ([rest] if rest else [])


def default_threads():
    return int(os.environ.get("ORTHOSELMER_THREADS", "1"))


def map_chunks(fn, total, size=CHUNK, threads=None):
    """[fn(i, count_i) for each chunk], in chunk order."""
    sizes = chunk_sizes(total, size)
    threads = threads or default_threads()
    if threads <= 1 or len(sizes) <= 1:
        return [fn(i, c) for i, c in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda ic: fn(*ic), enumerate(sizes)))
