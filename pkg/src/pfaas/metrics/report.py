"""Run reports: JSON structure, multi-run aggregation and a text table view."""

from __future__ import annotations

import json
import statistics

from .resource import DEFAULT_PLATFORM_MB, resource_time
from .stats import PDU_CHAIN, REGISTRATION_CHAIN, chain_stats, pdu_summary, registration_summary


def build_report(result, platform_mb: float = DEFAULT_PLATFORM_MB) -> dict:
    outcomes = result.outcomes
    successes = sum(o.outcome == "success" for o in outcomes)
    timeouts = sum(o.outcome == "timeout" for o in outcomes)
    rejected = sum(o.outcome == "rejected" for o in outcomes)
    per_function = chain_stats(result.ledger)
    chain_calls = sum(per_function[n]["count"] for n in REGISTRATION_CHAIN if n in per_function)
    rt = resource_time(result.ledger, result.replica_timeline, result.replica_rss_mb,
                       platform_mb=platform_mb, start_us=0, end_us=result.window_us)
    cold_records = [r for r in result.ledger if r.cold_start]
    return {
        "run": {
            "scenario": result.spec.name,
            "ue_count": result.spec.ue_count,
            "r17": result.r17,
            "cold_storm": result.cold_storm,
            "seed": result.seed,
            "end_us": result.end_us,
        },
        "latency": {
            "registration": registration_summary(outcomes).to_dict(),
            "pdu": pdu_summary(outcomes).to_dict(),
        },
        "per_function": per_function,
        "invocations": {
            "total": len(result.ledger),
            "registration_chain": chain_calls,
            "pdu_chain": sum(per_function[n]["count"] for n in PDU_CHAIN if n in per_function),
            "per_registration": len(result.ledger) / successes if successes else None,
            "cold_start": len(cold_records),
            "cold_start_ues": len({r.supi for r in cold_records if r.supi}),
        },
        "resource_time": rt.to_dict(),
        "success": {
            "ues": len(outcomes),
            "registered": successes,
            "timeouts": timeouts,
            "rejected": rejected,
            "rate": successes / len(outcomes) if outcomes else None,
            "pdu_failures": sum(o.pdu_failures for o in outcomes),
        },
        "replicas": {
            "final_nonzero": sorted(n for n, c in result.final_replicas.items() if c),
        },
    }


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1)


def _merge(values):
    if all(isinstance(v, dict) for v in values):
        keys = sorted(set().union(*values))
        return {k: _merge([v.get(k) for v in values]) for k in keys}
    numeric = [v for v in values if isinstance(v, (int, float)) and not isinstance(v, bool)]
    if numeric and len(numeric) == len(values):
        return {"mean": statistics.fmean(numeric), "std": statistics.stdev(numeric) if len(numeric) > 1 else 0.0}
    if all(v == values[0] for v in values):
        return values[0]
    return values


def aggregate(reports: list[dict]) -> dict:
    """Mean and sample standard deviation of every numeric field across runs.
    A single report is returned unchanged."""
    if not reports:
        raise ValueError("nothing to aggregate")
    if len(reports) == 1:
        return reports[0]
    merged = _merge(reports)
    merged["runs"] = len(reports)
    return merged


def _fmt(v, scale: float = 1.0, digits: int = 1) -> str:
    if v is None:
        return "-"
    if isinstance(v, dict) and "mean" in v:
        return f"{v['mean'] / scale:,.{digits}f} ± {v['std'] / scale:,.{digits}f}"
    if isinstance(v, (int, float)):
        return f"{v / scale:,.{digits}f}"
    return str(v)


def _rows(header, rows) -> list[str]:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    line = lambda r: "  ".join(str(c).ljust(w) if i == 0 else str(c).rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    return [line(header), "  ".join("-" * w for w in widths)] + [line(r) for r in rows]


def render_table(report: dict) -> str:
    out = []
    run = report.get("run", {})
    out.append("run: " + ", ".join(f"{k}={_fmt(v, digits=0) if isinstance(v, dict) else v}" for k, v in sorted(run.items())))
    out.append("")
    lat = report["latency"]
    rows = []
    for name in ("registration", "pdu"):
        s = lat[name]
        rows.append([name, _fmt(s["p50"], 1000), _fmt(s["p95"], 1000), _fmt(s["p99"], 1000),
                     _fmt(s["success_rate"], 0.01), _fmt(s["count"], digits=0)])
    out += _rows(["latency (ms)", "p50", "p95", "p99", "succ %", "n"], rows)
    out.append("")
    rows = []
    for name, st in sorted(report["per_function"].items()):
        rows.append([name, _fmt(st["mean_us"], 1000, 2), _fmt(st["count"], digits=0), _fmt(st["share_of_total"], 0.01)])
    if rows:
        out += _rows(["function", "avg (ms)", "invocations", "share %"], rows)
        out.append("")
    rt = report["resource_time"]
    rows = [[k, _fmt(rt[k], digits=6)] for k in ("function_gb_s", "replica_gb_s", "platform_gb_s", "total_gb_s")]
    out += _rows(["resource time", "GB-s"], rows)
    return "\n".join(out) + "\n"
