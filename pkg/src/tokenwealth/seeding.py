"""Deterministic seeding.

Run seeds are ``master ^ run_index``. Inside a run, every stochastic source
(an interaction's demand, a rotation channel, the supply process, the kinetic
pair draws) gets its own substream keyed by a stable hash of a text label, so
results do not depend on the order in which sources are consumed.
"""
import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def run_seed(master_seed, run_index):
    return (int(master_seed) ^ int(run_index)) & SEED_MASK


def label_key(label):
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed, label):
    """Independent generator for ``label`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=(label_key(label),))
    return np.random.Generator(np.random.PCG64(ss))
