"""Latency percentiles, outcome summaries and per-function execution statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels

# functions touched by one registration (three NAS steps) and by one PDU session
REGISTRATION_CHAIN = (
    "amf-initial-registration",
    "amf-auth-initiate",
    "udm-generate-auth-data",
    "ausf-authenticate",
    "udm-get-subscriber-data",
)
PDU_CHAIN = ("smf-pdu-session-create",)


class EmptySamples(ValueError):
    pass


def nearest_rank(p: float, n: int) -> int:
    """1-based nearest rank: ceil(p/100 * n), clamped to [1, n]."""
    if not 0 < p <= 100:
        raise ValueError(f"percentile must be in (0, 100], got {p}")
    if float(p).is_integer():
        rank = -(-int(p) * n // 100)
    else:
        rank = math.ceil(p * n / 100)
    return min(max(rank, 1), n)


def percentiles(samples, ps) -> list:
    arr = np.sort(np.asarray(samples))
    n = arr.shape[0]
    if n == 0:
        raise EmptySamples("no samples")
    ranks = np.array([nearest_rank(p, n) for p in ps], dtype=np.int64)
    return _kernels.kernels.rank_select(arr, ranks).tolist()


def percentile(samples, p: float):
    return percentiles(samples, [p])[0]


@dataclass
class LatencySummary:
    count: int
    p50: int | None
    p95: int | None
    p99: int | None
    mean: float | None
    max: int | None
    success_rate: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(latencies, terminal: int | None = None) -> LatencySummary:
    """``latencies`` are successful samples; ``terminal`` counts every finished
    attempt (defaults to the sample count)."""
    lat = [int(x) for x in latencies]
    terminal = len(lat) if terminal is None else terminal
    rate = (len(lat) / terminal) if terminal else None
    if not lat:
        return LatencySummary(0, None, None, None, None, None, rate)
    p50, p95, p99 = percentiles(lat, (50, 95, 99))
    return LatencySummary(len(lat), int(p50), int(p95), int(p99), float(np.mean(lat)), max(lat), rate)


def registration_summary(outcomes) -> LatencySummary:
    terminal = [o for o in outcomes if o.outcome != "pending"]
    return summarize([o.latency_us for o in terminal if o.outcome == "success"], len(terminal))


def pdu_summary(outcomes) -> LatencySummary:
    samples = [x for o in outcomes for x in o.pdu_latencies_us]
    failures = sum(o.pdu_failures for o in outcomes)
    return summarize(samples, len(samples) + failures)


def chain_stats(ledger) -> dict:
    """Per function: count, mean and total execution time, and share of the
    summed execution time across all functions."""
    names = sorted({r.function for r in ledger})
    if not names:
        return {}
    index = {n: i for i, n in enumerate(names)}
    codes = np.fromiter((index[r.function] for r in ledger), dtype=np.int64, count=len(ledger))
    durations = np.fromiter((r.finished_at - r.started_at for r in ledger), dtype=np.float64, count=len(ledger))
    sums, counts = _kernels.kernels.group_sum_count(codes, durations, len(names))
    grand = float(sums.sum())
    return {
        name: {
            "count": int(counts[i]),
            "total_us": int(round(sums[i])),
            "mean_us": float(sums[i] / counts[i]),
            "share_of_total": float(sums[i] / grand) if grand else 0.0,
        }
        for i, name in enumerate(names)
    }


def chain_time_per_registration(stats: dict, registrations: int, include_pdu: bool = False) -> float:
    """Execution time one registration spends in the chain, in microseconds."""
    if registrations <= 0:
        raise ValueError("need at least one registration")
    names = REGISTRATION_CHAIN + (PDU_CHAIN if include_pdu else ())
    return sum(stats[n]["total_us"] for n in names if n in stats) / registrations
