"""Small shared helpers: seeding, thread limits, integer apportionment."""
import os

import numpy as np

from .errors import ConfigError


def rng_for(*path: int) -> np.random.Generator:
    """Generator for a node in the seed tree.

    Same path, same stream. Used so that per-round and per-client streams
    are independent but reproducible from a single base seed.
    """
    return np.random.default_rng(np.random.SeedSequence(list(path)))


def derive_seed(*path: int) -> int:
    """Collapse a seed-tree path to one 64-bit integer seed."""
    seq = np.random.SeedSequence([int(p) for p in path])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def max_threads() -> int:
    """Thread budget from FEDTHRESH_THREADS, default 1.

    The simulator is deterministic only when BLAS reductions are not
    re-ordered by threading; keep the default conservative.
    """
    raw = os.environ.get("FEDTHRESH_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"FEDTHRESH_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"FEDTHRESH_THREADS must be >= 1, got {n}")
    return n


def largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Apportion `total` items proportionally to `weights`.

    Hamilton's method: floor the exact quotas, then hand the leftover
    items to the largest fractional parts (ties broken by lower index).
    Guarantees the result sums to `total` exactly.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 1 or weights.size == 0:
        raise ConfigError("weights must be a non-empty 1-d array")
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ConfigError("weights must be non-negative with a positive sum")
    quotas = weights / weights.sum() * total
    counts = np.floor(quotas).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        frac = quotas - counts
        order = np.lexsort((np.arange(weights.size), -frac))
        counts[order[:short]] += 1
    return counts
