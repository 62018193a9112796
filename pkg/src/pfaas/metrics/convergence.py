"""How long a cold-start storm takes to settle back to warm latency."""

from __future__ import annotations

import numpy as np

from . import _kernels

DEFAULT_BAND = 1.1
DEFAULT_WINDOW = 20


class NoConvergence(RuntimeError):
    pass


def sliding_median(values, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Trailing median; the first ``window - 1`` entries use what is available."""
    if window < 1:
        raise ValueError("window must be positive")
    return _kernels.kernels.sliding_median(np.asarray(values, dtype=np.float64), window)


def convergence_time(starts_us, latencies_us, warm_p50_us: float,
                     band: float = DEFAULT_BAND, window: int = DEFAULT_WINDOW) -> int:
    """Virtual time from which new registrations see warm latency again.

    UEs are taken in start order. A UE counts as still disturbed when both its
    own latency and the trailing median ending at it exceed ``band * warm_p50``.
    The system has converged once the last disturbed UE has been served, i.e.
    at ``start + latency - warm_p50`` of the latest such UE. With no disturbed
    UEs the answer is the first start. A missing latency (timeout) means the
    run never settled.
    """
    if len(starts_us) != len(latencies_us):
        raise ValueError("starts and latencies differ in length")
    if not len(starts_us):
        raise NoConvergence("no samples")
    if any(x is None for x in latencies_us):
        raise NoConvergence("run contains registrations that never completed")
    order = np.argsort(np.asarray(starts_us, dtype=np.int64), kind="stable")
    starts = np.asarray(starts_us, dtype=np.int64)[order]
    lat = np.asarray(latencies_us, dtype=np.float64)[order]
    limit = band * warm_p50_us
    med = sliding_median(lat, window)
    disturbed = (lat > limit) & (med > limit)
    if not disturbed.any():
        return int(starts[0])
    settle = starts[disturbed] + lat[disturbed] - warm_p50_us
    return int(round(settle.max()))
