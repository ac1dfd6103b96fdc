"""Index-ordered parallel map.

Work items carry their own RNG streams (derived by index before dispatch), so
results never depend on scheduling; ``jobs=1`` and ``jobs=8`` produce
identical output.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence


def run_indexed(fn: Callable, payloads: Sequence, jobs: int = 1) -> list:
    if jobs is None or jobs <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=min(jobs, len(payloads))) as pool:
        return list(pool.map(fn, payloads, chunksize=1))
