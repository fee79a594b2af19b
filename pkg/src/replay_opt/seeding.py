"""Seed-stream management for reproducible runs.

A run derives every source of randomness from one master seed, split into
named child streams so that adding consumers in one subsystem never shifts
the draws seen by another.
"""

from __future__ import annotations

import numpy as np

STREAM_NAMES = (
    "env",
    "eval_env",
    "actor_init",
    "critic_init",
    "noise",
    "sampler",
    "replay_policy_init",
    "replay_policy_draw",
)


def as_generator(seed) -> np.random.Generator:
    """Coerce an int, SeedSequence, Generator, or None into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def named_streams(seed: int) -> dict[str, np.random.Generator]:
    """Split a master seed into one independent generator per subsystem."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child) for name, child in zip(STREAM_NAMES, children)}
