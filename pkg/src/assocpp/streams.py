"""Counter-based random streams keyed by (master seed, stream name, replicate).

Replicate ``i`` of a named stream always sees the same numbers, whatever
order or process the replicates run in.
"""

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def stream(master_seed: int, *keys) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def stream_id(master_seed: int, *keys) -> str:
    return ":".join([str(int(master_seed)), *(str(k) for k in keys)])
