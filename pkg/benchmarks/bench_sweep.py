"""Standalone F1-sweep backend benchmark.

Run after installing the package:

    python3 benchmarks/bench_sweep.py [n_errors] [n_candidates] [repeats]

Equivalent to `fedthresh bench`.
"""
import sys

from fedthresh.benchmark import format_bench, run_bench
from fedthresh.metrics import HAVE_FAST_SWEEP


def main(argv):
    n_errors = int(argv[1]) if len(argv) > 1 else 200_000
    n_candidates = int(argv[2]) if len(argv) > 2 else 1000
    repeats = int(argv[3]) if len(argv) > 3 else 5
    if not HAVE_FAST_SWEEP:
        print("note: compiled sweep not built; timing numpy + naive only")
    print(format_bench(run_bench(n_errors, n_candidates, repeats)))


if __name__ == "__main__":
    main(sys.argv)
