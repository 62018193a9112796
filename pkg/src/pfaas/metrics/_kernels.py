"""Array kernels behind the metrics, in two interchangeable builds.

``PFAAS_NUMBA=0`` forces the pure-numpy path, ``PFAAS_NUMBA=1`` asks for the
compiled path (falling back with a warning when numba is missing), and leaving
it unset uses numba whenever it imports. Both builds are always importable as
``numpy_kernels`` / ``numba_kernels`` so they can be compared directly.
"""

from __future__ import annotations

import os
import warnings
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without the accel extra
    numba = None


# numpy build

def _np_sliding_median(values, window):
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    out = np.empty(n, dtype=np.float64)
    head = min(n, window - 1)
    for i in range(head):
        out[i] = np.median(values[: i + 1])
    if n >= window:
        out[window - 1:] = np.median(np.lib.stride_tricks.sliding_window_view(values, window), axis=1)
    return out


def _np_overlap_sum(starts, ends, weights, lo, hi):
    s = np.maximum(np.asarray(starts, dtype=np.float64), lo)
    e = np.minimum(np.asarray(ends, dtype=np.float64), hi)
    return float(np.sum(np.asarray(weights, dtype=np.float64) * np.clip(e - s, 0.0, None)))


def _np_group_sum_count(codes, values, ngroups):
    codes = np.asarray(codes, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    sums = np.bincount(codes, weights=values, minlength=ngroups).astype(np.float64)
    counts = np.bincount(codes, minlength=ngroups).astype(np.int64)
    return sums, counts


def _np_rank_select(sorted_values, ranks):
    return np.asarray(sorted_values)[np.asarray(ranks, dtype=np.int64) - 1]


numpy_kernels = SimpleNamespace(
    name="numpy",
    sliding_median=_np_sliding_median,
    overlap_sum=_np_overlap_sum,
    group_sum_count=_np_group_sum_count,
    rank_select=_np_rank_select,
)


# numba build

def _build_numba():
    njit = numba.njit(cache=True)

    @njit
    def sliding_median(values, window):
        # keep the current window sorted; each step drops one value and inserts one
        n = values.shape[0]
        out = np.empty(n, dtype=np.float64)
        buf = np.empty(window, dtype=np.float64)
        m = 0
        for i in range(n):
            if m == window:
                old = values[i - window]
                j = 0
                while j < m - 1 and buf[j] != old:
                    j += 1
                for q in range(j, m - 1):
                    buf[q] = buf[q + 1]
                m -= 1
            x = values[i]
            j = m
            while j > 0 and buf[j - 1] > x:
                buf[j] = buf[j - 1]
                j -= 1
            buf[j] = x
            m += 1
            if m % 2 == 1:
                out[i] = buf[m // 2]
            else:
                out[i] = 0.5 * (buf[m // 2 - 1] + buf[m // 2])
        return out

    @njit
    def overlap_sum(starts, ends, weights, lo, hi):
        total = 0.0
        for i in range(starts.shape[0]):
            s = starts[i] if starts[i] > lo else lo
            e = ends[i] if ends[i] < hi else hi
            if e > s:
                total += weights[i] * (e - s)
        return total

    @njit
    def group_sum_count(codes, values, ngroups):
        sums = np.zeros(ngroups, dtype=np.float64)
        counts = np.zeros(ngroups, dtype=np.int64)
        for i in range(codes.shape[0]):
            sums[codes[i]] += values[i]
            counts[codes[i]] += 1
        return sums, counts

    @njit
    def rank_select(sorted_values, ranks):
        out = np.empty(ranks.shape[0], dtype=sorted_values.dtype)
        for i in range(ranks.shape[0]):
            out[i] = sorted_values[ranks[i] - 1]
        return out

    def as_f64(a):
        return np.ascontiguousarray(a, dtype=np.float64)

    return SimpleNamespace(
        name="numba",
        sliding_median=lambda v, w: sliding_median(as_f64(v), int(w)),
        overlap_sum=lambda s, e, w, lo, hi: float(overlap_sum(as_f64(s), as_f64(e), as_f64(w), float(lo), float(hi))),
        group_sum_count=lambda c, v, g: group_sum_count(np.ascontiguousarray(c, dtype=np.int64), as_f64(v), int(g)),
        rank_select=lambda sv, r: rank_select(np.ascontiguousarray(sv), np.ascontiguousarray(r, dtype=np.int64)),
    )


numba_kernels = _build_numba() if numba is not None else None


def select(flag: str | None = None):
    flag = os.environ.get("PFAAS_NUMBA") if flag is None else flag
    if flag is not None and flag.strip().lower() in ("0", "false", "no", "off"):
        return numpy_kernels
    if numba_kernels is None:
        if flag is not None and flag.strip() not in ("", "auto"):
            warnings.warn("PFAAS_NUMBA requested but numba is not installed; using numpy kernels")
        return numpy_kernels
    return numba_kernels


kernels = select()
