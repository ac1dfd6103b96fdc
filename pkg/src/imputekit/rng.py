"""Reproducible random-number streams.

All randomness in the package flows through counter-based Philox (4x64-10)
generators keyed by ``(root_seed, index path)``.  Identical paths give
bit-identical streams on every platform, and sibling paths are statistically
independent, so replication-level work can be scheduled in any order (or in
parallel) without changing results.
"""

from __future__ import annotations

from typing import Iterable, Union

import numpy as np

RngLike = Union[int, np.random.SeedSequence, np.random.Generator]


def seed_tree(root_seed: int, path: Iterable[int] = ()) -> np.random.Generator:
    """Derive the RNG stream for one node of the seed tree.

    Parameters
    ----------
    root_seed : int
        64-bit root seed for the whole run.
    path : iterable of int
        Hierarchical index path, e.g. ``(replication, method, chain)``.

    Returns
    -------
    numpy.random.Generator
        Philox-backed generator. Equal ``(root_seed, path)`` pairs yield
        identical streams; distinct paths yield independent streams.
    """
    ss = np.random.SeedSequence(root_seed, spawn_key=tuple(int(i) for i in path))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(rng: RngLike) -> np.random.Generator:
    """Coerce a seed, SeedSequence, or Generator into a Philox Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(rng))
    return seed_tree(int(rng))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Split ``rng`` into ``n`` independent child streams (deterministic)."""
    return rng.spawn(n)
