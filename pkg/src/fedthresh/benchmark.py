"""Timing comparison of the F1-sweep backends.

The sweep is the only hot kernel in the package: every threshold search
evaluates a candidate grid against every client's error vector. This
module times the naive per-candidate recount, the numpy searchsorted
sweep, and the compiled two-pointer sweep (when built) on the same data
and checks they agree along the way.
"""
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .metrics import HAVE_FAST_SWEEP, f1_curve, naive_f1_curve


@dataclass(frozen=True)
class BenchResult:
    backend: str
    n_errors: int
    n_candidates: int
    repeats: int
    best_ms: float
    mean_ms: float


def _time(fn, repeats):
    times = []
    out = None
    for _ in range(repeats):
        started = time.perf_counter()
        out = fn()
        times.append((time.perf_counter() - started) * 1000.0)
    return out, min(times), float(np.mean(times))


def run_bench(n_errors: int = 200_000, n_candidates: int = 1000,
              repeats: int = 5, seed: int = 0, include_naive: bool = True):
    """Returns a list of BenchResult, one per available backend."""
    if n_errors < 1 or n_candidates < 2 or repeats < 1:
        raise ConfigError("need n_errors >= 1, n_candidates >= 2, "
                          "repeats >= 1")
    rng = np.random.default_rng(seed)
    errors = rng.gamma(2.0, 1.0, size=n_errors)
    labels = (rng.random(n_errors) < 0.02).astype(np.int64)
    errors[labels == 1] += 4.0
    candidates = np.linspace(errors.min(), errors.max(), n_candidates)

    results = []
    reference, best, mean = _time(
        lambda: f1_curve(errors, labels, candidates, backend="numpy"), repeats)
    results.append(BenchResult("numpy", n_errors, n_candidates, repeats,
                               best, mean))
    if HAVE_FAST_SWEEP:
        out, best, mean = _time(
            lambda: f1_curve(errors, labels, candidates, backend="compiled"),
            repeats)
        if not np.array_equal(out, reference):
            raise AssertionError("compiled sweep disagrees with numpy sweep")
        results.append(BenchResult("compiled", n_errors, n_candidates,
                                   repeats, best, mean))
    if include_naive:
        # the naive oracle is O(n*m); cap its grid so the benchmark stays fast
        naive_m = min(n_candidates, 50)
        out, best, mean = _time(
            lambda: naive_f1_curve(errors, labels, candidates[:naive_m]), 1)
        if not np.allclose(out, reference[:naive_m], rtol=0, atol=0):
            raise AssertionError("naive recount disagrees with numpy sweep")
        scaled = best * (n_candidates / naive_m)
        results.append(BenchResult(f"naive(est. from {naive_m} candidates)",
                                   n_errors, n_candidates, 1, scaled, scaled))
    return results


def format_bench(results) -> str:
    width = max(len(r.backend) for r in results) + 2
    lines = [f"{'backend':<{width}}{'best_ms':>12}{'mean_ms':>12}"]
    for r in results:
        lines.append(f"{r.backend:<{width}}{r.best_ms:>12.3f}"
                     f"{r.mean_ms:>12.3f}")
    return "\n".join(lines)
