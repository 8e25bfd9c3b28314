"""Seeded random streams.

Every stream is a Philox generator (counter based) keyed by the run seed and
an integer path such as (setting index, chunk index). Results therefore do not
depend on how work is split across threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_SEED = 20091212
CHUNK = 1 << 17


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    """n uniform unit vectors from cos θ ~ U[-1, 1], φ ~ U[0, 2π)."""
    cos_t = rng.uniform(-1.0, 1.0, n)
    phi = rng.uniform(0.0, 2 * np.pi, n)
    sin_t = np.sqrt(1.0 - cos_t**2)
    return np.column_stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])


def chunks(total: int, size: int = CHUNK) -> list[int]:
    full, rest = divmod(total, size)
    return [size] * full + ([rest] if rest else [])


def worker_count(requested: int | None = None) -> int:
    env = os.environ.get("BELLKIT_THREADS")
    cap = int(env) if env and env.isdigit() and int(env) > 0 else (os.cpu_count() or 1)
    return max(1, min(cap, requested or cap))


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Ordered map over a thread pool capped by BELLKIT_THREADS."""
    items = list(items)
    n = worker_count(threads)
    if n == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
