import dataclasses
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_percentile, chain_us
from pfaas.faas import InvocationRecord
from pfaas.loadgen import SimConfig, preset, run_scenario
from pfaas.metrics import _kernels
from pfaas.metrics import (
    EmptySamples,
    NoConvergence,
    aggregate,
    build_report,
    chain_stats,
    chain_time_per_registration,
    convergence_time,
    percentile,
    registration_gb_s,
    render_table,
    resource_time,
    summarize,
)
from pfaas.simkernel import seconds


def rec(fn, start, end, alloc=128.0):
    return InvocationRecord(fn, start, start, end, False, alloc)


def test_percentile_examples():
    data = list(range(1, 101))
    assert percentile(data, 50) == 50
    assert percentile(data, 99) == 99
    assert percentile([7], 95) == 7
    with pytest.raises(EmptySamples):
        percentile([], 50)
    with pytest.raises(ValueError):
        percentile(data, 0)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 99, 100, 101, 997, 10_000])
def test_percentile_matches_oracle_for_every_p(n):
    rnd = random.Random(n)
    samples = [rnd.randint(0, 50_000) for _ in range(n)]
    for p in range(1, 101):
        assert percentile(samples, p) == brute_percentile(samples, p)


@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=300), st.floats(0.01, 100))
def test_percentile_fractional_p(samples, p):
    assert percentile(samples, p) == brute_percentile(samples, p)


@given(st.lists(st.integers(0, 10**7), min_size=1, max_size=200))
def test_summary_is_ordered(samples):
    s = summarize(samples, terminal=len(samples) + 3)
    assert s.p50 <= s.p95 <= s.p99 <= s.max
    assert s.success_rate == len(samples) / (len(samples) + 3)


def test_chain_stats_shares_and_registration_chain():
    res = run_scenario(dataclasses.replace(preset("high"), pdu_per_ue=1))
    stats = chain_stats(res.ledger)
    assert stats["amf-initial-registration"]["share_of_total"] == pytest.approx(7680 / 16490, abs=1e-12)
    assert round(stats["amf-initial-registration"]["share_of_total"] * 100, 1) == 46.6
    assert chain_time_per_registration(stats, 1000) == chain_us(False) == 15_560
    assert chain_time_per_registration(stats, 1000, include_pdu=True) == chain_us(True) == 16_490
    assert sum(v["count"] for v in stats.values()) == len(res.ledger)


def test_chain_stats_single_invocation():
    assert chain_stats([rec("f", 0, 10)])["f"]["share_of_total"] == 1.0


def test_per_registration_gb_s():
    assert registration_gb_s(15_560) == pytest.approx(0.128 * 0.01556, rel=1e-12)
    assert round(registration_gb_s(15_560), 3) == 0.002


def test_resource_time_examples():
    idle = resource_time([], platform_mb=2105, end_us=seconds(600))
    assert idle.platform_gb_s == pytest.approx(1263.0)
    assert idle.function_gb_s == idle.replica_gb_s == 0
    zero = resource_time([rec("f", 0, 10)], end_us=0)
    assert zero.total_gb_s == 0


def test_resource_time_registration_additivity():
    ledger = run_scenario(dataclasses.replace(preset("low"), ue_count=1, pdu_per_ue=1)).ledger
    assert len(ledger) == 8
    r = resource_time(ledger, end_us=seconds(10))
    assert r.function_gb_s == pytest.approx(0.128 * 16_490e-6, rel=1e-12)


records = st.lists(st.tuples(st.integers(0, 10_000), st.integers(0, 5000), st.sampled_from([64.0, 128.0])), max_size=50)


@given(records, st.integers(0, 20_000), st.integers(0, 20_000))
def test_resource_time_additive_over_splits(raw, t, end):
    lo, hi = sorted((t, end))
    ledger = [rec("f", s, s + d, a) for s, d, a in raw]
    timeline = [(0, "f", 1), (3000, "f", 0), (7000, "f", 2)]
    full = resource_time(ledger, timeline, {"f": 15.0}, start_us=0, end_us=hi)
    left = resource_time(ledger, timeline, {"f": 15.0}, start_us=0, end_us=lo)
    right = resource_time(ledger, timeline, {"f": 15.0}, start_us=lo, end_us=hi)
    for part in ("function_gb_s", "replica_gb_s", "platform_gb_s"):
        assert getattr(left, part) + getattr(right, part) == pytest.approx(getattr(full, part), abs=1e-9)
    assert full.total_gb_s == pytest.approx(full.function_gb_s + full.replica_gb_s + full.platform_gb_s)
    assert min(full.function_gb_s, full.replica_gb_s, full.platform_gb_s) >= 0


def test_convergence_warm_run_is_first_start():
    res = run_scenario(preset("low"))
    starts = [o.start_us for o in res.outcomes]
    lat = [o.latency_us for o in res.outcomes]
    assert convergence_time(starts, lat, 456_500) == starts[0]


def test_convergence_cold_storm_low():
    res = run_scenario(preset("low"), cold_storm=True)
    t = convergence_time([o.start_us for o in res.outcomes], [o.latency_us for o in res.outcomes], 456_500)
    assert t <= 5_000_000
    assert t == 3_999_000


def test_convergence_with_timeouts_fails():
    res = run_scenario(dataclasses.replace(preset("low"), ue_count=20), cold_storm=True,
                       config=SimConfig(cold_start_us=seconds(20)))
    with pytest.raises(NoConvergence):
        convergence_time([o.start_us for o in res.outcomes], [o.latency_us for o in res.outcomes], 456_500)


def test_report_sections_and_aggregate():
    res = run_scenario(dataclasses.replace(preset("low"), ue_count=10))
    report = build_report(res)
    assert {"latency", "per_function", "resource_time", "success"} <= set(report)
    assert report["latency"]["registration"]["p50"] == 456_500
    assert aggregate([report]) == report
    agg = aggregate([report, report])
    assert agg["latency"]["registration"]["p50"] == {"mean": 456_500, "std": 0.0}
    assert "registration" in render_table(report)


# kernel builds

needs_numba = pytest.mark.skipif(_kernels.numba_kernels is None, reason="numba not installed")


def test_flag_selects_numpy():
    assert _kernels.select("0") is _kernels.numpy_kernels


@needs_numba
def test_flag_selects_numba():
    assert _kernels.select("1") is _kernels.numba_kernels
    assert _kernels.select("auto") is _kernels.numba_kernels


@needs_numba
@settings(max_examples=50)
@given(st.lists(st.floats(0, 1e7, allow_nan=False), max_size=120), st.integers(1, 25))
def test_sliding_median_builds_agree(values, window):
    a = _kernels.numpy_kernels.sliding_median(np.array(values), window)
    b = _kernels.numba_kernels.sliding_median(np.array(values), window)
    np.testing.assert_allclose(a, b)
    for i in range(len(values)):
        assert a[i] == pytest.approx(float(np.median(values[max(0, i - window + 1): i + 1])))


@needs_numba
@given(st.lists(st.tuples(st.integers(0, 1000), st.integers(0, 500), st.floats(0, 2)), max_size=60),
       st.integers(0, 1500), st.integers(0, 1500))
def test_overlap_sum_builds_agree(raw, lo, hi):
    s = np.array([r[0] for r in raw], dtype=float)
    e = s + np.array([r[1] for r in raw], dtype=float)
    w = np.array([r[2] for r in raw], dtype=float)
    a = _kernels.numpy_kernels.overlap_sum(s, e, w, lo, hi)
    b = _kernels.numba_kernels.overlap_sum(s, e, w, lo, hi)
    assert a == pytest.approx(b, abs=1e-9)


@needs_numba
@given(st.lists(st.tuples(st.integers(0, 6), st.floats(0, 1e6)), max_size=80))
def test_group_and_rank_builds_agree(raw):
    codes = np.array([c for c, _ in raw], dtype=np.int64)
    vals = np.array([v for _, v in raw], dtype=float)
    (s1, c1), (s2, c2) = (k.group_sum_count(codes, vals, 7) for k in (_kernels.numpy_kernels, _kernels.numba_kernels))
    np.testing.assert_allclose(s1, s2)
    np.testing.assert_array_equal(c1, c2)
    if raw:
        sv = np.sort(vals)
        ranks = np.arange(1, len(sv) + 1)
        np.testing.assert_array_equal(_kernels.numpy_kernels.rank_select(sv, ranks),
                                      _kernels.numba_kernels.rank_select(sv, ranks))
