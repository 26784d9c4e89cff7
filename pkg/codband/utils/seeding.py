"""
Seed derivation
Every random stream of a run derives from the master seed and the replication
index, never from execution order
"""

import zlib
from typing import List, Sequence, Union

import numpy as np

TRACE_STREAM = 0
SERVE_STREAM = 1
POLICY_STREAM = 2
LOG_STREAM = 3


def replication_seeds(master_seed: Union[int, Sequence[int]], replications: int) -> List[int]:
    """One 64-bit seed per replication; master_seed may carry extra salt words"""
    children = np.random.SeedSequence(master_seed).spawn(replications)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def stream(rep_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(rep_seed, spawn_key=key))


def trace_rng(rep_seed: int) -> np.random.Generator:
    return stream(rep_seed, TRACE_STREAM)


def serve_rng(rep_seed: int) -> np.random.Generator:
    # shared by all policies of a replication so they see the same candidates and noise
    return stream(rep_seed, SERVE_STREAM)


def policy_rng(rep_seed: int, policy_name: str) -> np.random.Generator:
    return stream(rep_seed, POLICY_STREAM, zlib.crc32(policy_name.encode()))


def log_rng(rep_seed: int) -> np.random.Generator:
    return stream(rep_seed, LOG_STREAM)
