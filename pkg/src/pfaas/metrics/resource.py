"""Resource-time (GB-seconds) accounting over a time window."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels

MB_PER_GB = 1000.0
US_PER_S = 1_000_000
DEFAULT_PLATFORM_MB = 1640.0


@dataclass
class ResourceTimeReport:
    function_gb_s: float
    replica_gb_s: float
    platform_gb_s: float
    window_s: float

    @property
    def total_gb_s(self) -> float:
        return self.function_gb_s + self.replica_gb_s + self.platform_gb_s

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_gb_s"] = self.total_gb_s
        return d


def replica_segments(timeline, rss_mb: dict, end_us: float = float("inf")):
    """Turn (t, function, count) changes into (start, end, GB held) segments."""
    current: dict[str, tuple[int, int]] = {}
    starts, ends, gbs = [], [], []
    for t, name, count in timeline:
        prev = current.get(name)
        if prev is not None and prev[1] > 0:
            starts.append(prev[0])
            ends.append(t)
            gbs.append(prev[1] * rss_mb[name] / MB_PER_GB)
        current[name] = (t, count)
    for name, (t, count) in current.items():
        if count > 0:
            starts.append(t)
            ends.append(end_us)
            gbs.append(count * rss_mb[name] / MB_PER_GB)
    return np.array(starts, dtype=np.float64), np.array(ends, dtype=np.float64), np.array(gbs, dtype=np.float64)


def resource_time(ledger, replica_timeline=(), rss_mb: dict | None = None,
                  platform_mb: float = DEFAULT_PLATFORM_MB, start_us: int = 0, end_us: int = 0) -> ResourceTimeReport:
    """GB-seconds over [start_us, end_us]; every term is clipped to the window,
    so reports over adjacent windows add up to the report over their union."""
    k = _kernels.kernels
    lo, hi = float(start_us), float(end_us)
    if hi <= lo:
        return ResourceTimeReport(0.0, 0.0, 0.0, 0.0)

    if ledger:
        s = np.fromiter((r.started_at for r in ledger), dtype=np.float64, count=len(ledger))
        e = np.fromiter((r.finished_at for r in ledger), dtype=np.float64, count=len(ledger))
        w = np.fromiter((r.alloc_mb / MB_PER_GB for r in ledger), dtype=np.float64, count=len(ledger))
        function_gb_s = k.overlap_sum(s, e, w, lo, hi) / US_PER_S
    else:
        function_gb_s = 0.0

    replica_gb_s = 0.0
    if replica_timeline:
        s, e, w = replica_segments(replica_timeline, rss_mb or {}, end_us=hi)
        if s.size:
            replica_gb_s = k.overlap_sum(s, e, w, lo, hi) / US_PER_S

    window_s = (hi - lo) / US_PER_S
    return ResourceTimeReport(function_gb_s, replica_gb_s, platform_mb * window_s / MB_PER_GB, window_s)


def registration_gb_s(chain_us: float, alloc_mb: float = 128.0) -> float:
    """Analytic per-registration resource time: allocation x chain seconds."""
    return alloc_mb / MB_PER_GB * chain_us / US_PER_S
