# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled two-pointer F1 sweep over a sorted error vector.

Shares the exact arithmetic of the numpy fallback in metrics.f1_curve:
integer tp/fp/fn and the expression (2.0*tp) / (2.0*tp + fp + fn), so the
two backends agree bit for bit.
"""
import numpy as np


def sweep_f1(double[::1] sorted_errors, long long[::1] anomaly_prefix,
             long long total_positive, double[::1] candidates):
    """Per-candidate F1 with the strict "error > threshold" rule.

    sorted_errors: ascending; anomaly_prefix: length n+1 prefix counts of
    anomaly labels in sorted order; candidates: ascending.
    """
    cdef Py_ssize_t n = sorted_errors.shape[0]
    cdef Py_ssize_t m = candidates.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef Py_ssize_t i = 0, j
    cdef long long tp, fp, fn
    cdef double denom
    for j in range(m):
        while i < n and sorted_errors[i] <= candidates[j]:
            i += 1
        # i == count of errors <= candidate; predicted positives are the rest
        tp = total_positive - anomaly_prefix[i]
        fp = (n - i) - tp
        fn = total_positive - tp
        denom = 2.0 * tp + fp + fn
        out_v[j] = 0.0 if denom == 0.0 else (2.0 * tp) / denom
    return out
