"""Latency, execution-time and resource-time metrics over completed runs."""

from ._kernels import kernels, numba_kernels, numpy_kernels
from .convergence import NoConvergence, convergence_time, sliding_median
from .report import aggregate, build_report, render_table
from .resource import DEFAULT_PLATFORM_MB, ResourceTimeReport, registration_gb_s, resource_time
from .stats import (
    PDU_CHAIN,
    REGISTRATION_CHAIN,
    EmptySamples,
    LatencySummary,
    chain_stats,
    chain_time_per_registration,
    nearest_rank,
    pdu_summary,
    percentile,
    percentiles,
    registration_summary,
    summarize,
)

__all__ = [
    "kernels", "numba_kernels", "numpy_kernels",
    "NoConvergence", "convergence_time", "sliding_median",
    "aggregate", "build_report", "render_table",
    "DEFAULT_PLATFORM_MB", "ResourceTimeReport", "registration_gb_s", "resource_time",
    "PDU_CHAIN", "REGISTRATION_CHAIN", "EmptySamples", "LatencySummary", "chain_stats",
    "chain_time_per_registration", "nearest_rank", "pdu_summary", "percentile", "percentiles",
    "registration_summary", "summarize",
]
