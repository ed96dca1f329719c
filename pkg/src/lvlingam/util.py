"""Seeding, JSON, and small shared helpers."""

from __future__ import annotations

import json
import os
import tempfile
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

Seed = "int | np.random.SeedSequence"

THREADS_ENV = "LVLINGAM_THREADS"


def as_seed_seq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; all package randomness flows through these."""
    return np.random.Generator(np.random.Philox(as_seed_seq(seed)))


def spawn_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    return as_seed_seq(seed).spawn(n)


def child_seed(seed, *tags: int) -> np.random.SeedSequence:
    """Deterministic child stream addressed by integer tags (no spawn state)."""
    ss = as_seed_seq(seed)
    return np.random.SeedSequence(
        entropy=ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(tags)
    )


def canonical_json(obj) -> str:
    """Deterministic JSON rendering (byte-reproducible for equal inputs)."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def atomic_write_text(path: str, text: str) -> None:
    """Write-to-temp plus rename; never leaves a partial file behind."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def max_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Map preserving input order; threads capped by LVLINGAM_THREADS."""
    n = max_threads()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
