"""Acceptance criteria 1-7. Each test records one PASS/FAIL line, printed in
the terminal summary (and directly when this file is run as a script)."""

import dataclasses
import json
import os
import subprocess
import sys
import time
from collections import Counter

import pytest

from oracles import chain_us
from pfaas.cli import main
from pfaas.loadgen import build_batches, preset, run_scenario
from pfaas.metrics import (
    build_report,
    chain_stats,
    chain_time_per_registration,
    convergence_time,
    registration_gb_s,
    resource_time,
)
from pfaas.procedures import CATALOG

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[n] = line
    print(line)


def test_criterion_1_invocation_counts(tmp_path):
    ledger = tmp_path / "ledger.jsonl"
    t0 = time.perf_counter()
    subprocess.run([sys.executable, "-m", "pfaas", "run", "--scenario", "high", "--seed", "7",
                    "--ledger-out", str(ledger), "--out", str(tmp_path / "report.json")], check=True)
    wall = time.perf_counter() - t0
    recs = [json.loads(line) for line in ledger.read_text().splitlines()]
    counts = Counter(r["function"] for r in recs)
    expected = {"amf-initial-registration": 1000, "amf-auth-initiate": 2000, "udm-generate-auth-data": 2000,
                "ausf-authenticate": 1000, "udm-get-subscriber-data": 1000, "smf-pdu-session-create": 3000}
    chain = set(expected) - {"smf-pdu-session-create"}
    # one registration's chain: its 7 NAS-step calls plus the first PDU session create
    per_ue = Counter(r["supi"] for r in recs if r["function"] in chain)
    pdu_per_ue = Counter(r["supi"] for r in recs if r["function"] == "smf-pdu-session-create")
    chain_sizes = {per_ue[s] + min(pdu_per_ue[s], 1) for s in per_ue}
    ok = (dict(counts) == expected and chain_sizes == {8} and len(per_ue) == 1000
          and set(pdu_per_ue.values()) == {3} and wall < 5.0)
    record(1, ok, f"counts={dict(counts)} chain/registration={sorted(chain_sizes)} wall={wall:.2f}s")
    assert ok


def test_criterion_2_cost_golden_values(capsys):
    assert main(["cost"]) == 0
    s = json.loads(capsys.readouterr().out)
    d_on, d_off = s["exact"]["d_star_platform_on"], s["exact"]["d_star_shutdown"]
    k_star, lam_star = s["rows"][2]["value"], s["rows"][3]["value"]
    r33, r50 = s["duty_ratios"]["0.33"], s["duty_ratios"]["0.50"]
    ok = (abs(d_on + 0.585) <= 0.005 and abs(d_off - 0.650) <= 0.001 and k_star == 2
          and abs(lam_star - 609) <= 0.5 and abs(r33 - 0.508) <= 0.003 and abs(r50 - 0.769) <= 0.003)
    record(2, ok, f"d_on={d_on:.4f} d_off={d_off:.4f} K*={k_star} lambda*={lam_star:.2f} "
                  f"r(0.33)={r33:.4f} r(0.50)={r50:.4f}")
    assert ok


def test_criterion_3_registration_gb_s():
    res = run_scenario(dataclasses.replace(preset("low"), ue_count=1, pdu_per_ue=0))
    assert len(res.ledger) == 7
    simulated = resource_time(res.ledger, end_us=res.window_us).function_gb_s
    analytic = registration_gb_s(chain_us(False), 128.0)
    ok = abs(simulated - 0.001992) <= 1e-6 and abs(analytic - 0.001992) <= 1e-6 and abs(simulated - analytic) < 1e-12
    record(3, ok, f"ledger={simulated:.8f} analytic={analytic:.8f} GB-s")
    assert ok


def test_criterion_4_chain_share():
    res = run_scenario(dataclasses.replace(preset("high"), pdu_per_ue=1))
    stats = chain_stats(res.ledger)
    share = stats["amf-initial-registration"]["share_of_total"] * 100
    without_smf = chain_time_per_registration(stats, 1000)
    ok = abs(share - 46.6) <= 0.2 and without_smf == 15_560
    record(4, ok, f"share={share:.2f}% chain_excl_smf={without_smf / 1000:.2f} ms")
    assert ok


def _storm(name):
    spec = preset(name)
    warm, cold = run_scenario(spec, seed=1), run_scenario(spec, cold_storm=True, seed=1)
    return warm, cold, build_report(warm), build_report(cold)


def test_criterion_5_cold_storm_structure():
    warm_low, cold_low, wl, cl = _storm("low")
    delta_low_ms = (cl["latency"]["registration"]["p50"] - wl["latency"]["registration"]["p50"]) / 1000
    a = abs(delta_low_ms - 4000) <= 0.02 * 4000

    warm_high, cold_high, wh, ch = _storm("high")
    delta_high = ch["latency"]["registration"]["p50"] - wh["latency"]["registration"]["p50"]
    first_batch = set(build_batches(preset("high"))[0].supis)
    cold_supis = {r.supi for r in cold_high.ledger if r.cold_start}
    b = abs(delta_high) <= 0.05 * wh["latency"]["registration"]["p50"] and cold_supis and cold_supis <= first_batch

    storms = [cold_low, cold_high] + [run_scenario(preset(n), cold_storm=True, seed=1) for n in ("medium", "burst")]
    c = all(o.outcome == "success" for r in storms for o in r.outcomes)

    conv = convergence_time([o.start_us for o in cold_low.outcomes], [o.latency_us for o in cold_low.outcomes],
                            wl["latency"]["registration"]["p50"])
    d = conv <= 5_000_000

    ok = bool(a and b and c and d)
    record(5, ok, f"(a) low dp50={delta_low_ms:.0f} ms vs 4000+-80 {'ok' if a else 'MISS'}; "
                  f"(b) high dp50={delta_high / 1000:.1f} ms, cold UEs={len(cold_supis)} in first batch "
                  f"{'ok' if b else 'MISS'}; (c) storms all successful {'ok' if c else 'MISS'}; "
                  f"(d) convergence={conv / 1e6:.3f} s {'ok' if d else 'MISS'}")
    assert b and c and d
    assert a, f"low-scenario cold p50 - warm p50 = {delta_low_ms:.0f} ms, outside 4000 +- 80 ms"


def test_criterion_6_scale_to_zero():
    res = run_scenario(preset("idle"))
    report = build_report(res, platform_mb=1640)
    rt = report["resource_time"]
    zero_after_window = all(c == 0 for c in res.final_replicas.values()) and len(res.final_replicas) == len(CATALOG)
    exact = rt["platform_gb_s"] == 984.0
    ok = zero_after_window and rt["function_gb_s"] == 0 and rt["replica_gb_s"] == 0 and exact
    record(6, ok, f"replicas={sum(res.final_replicas.values())} function={rt['function_gb_s']} "
                  f"replica={rt['replica_gb_s']} platform={rt['platform_gb_s']} GB-s")
    assert ok


PROPERTY_SUITES = [
    "tests/test_codec.py::test_codec_bijective",
    "tests/test_metrics.py::test_percentile_matches_oracle_for_every_p",
    "tests/test_statestore.py::test_transact_atomicity",
    "tests/test_procedures.py::test_registration_state_machine_safety",
    "tests/test_procedures.py::test_counter_underflow_and_conservation",
    "tests/test_proxy.py::test_rejects_never_mutate_store",
    "tests/test_proxy.py::test_out_of_order_rejected_without_backend_call",
    "tests/test_loadgen.py::test_determinism",
    "tests/test_cli.py::test_run_is_byte_identical",
]


def test_criterion_7_property_suites():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_SUITES],
                          cwd=root, capture_output=True, text=True)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0
    record(7, ok, f"{len(PROPERTY_SUITES)} property suites: {tail}")
    assert ok, proc.stdout[-3000:]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
