"""Command-line entry point: ``pfaas run|coldstorm|cost|codec|report``."""

from __future__ import annotations

import argparse
import binascii
import json
import logging
import os
import sys

from . import costmodel
from .loadgen import (
    CALIBRATIONS,
    PRESETS,
    ProvisioningMissing,
    ScenarioError,
    ScenarioResult,
    ScenarioSpec,
    SimConfig,
    preset,
    run_scenario,
)
from .metrics import DEFAULT_PLATFORM_MB, NoConvergence, aggregate, build_report, convergence_time, render_table
from .metrics.convergence import DEFAULT_BAND, DEFAULT_WINDOW
from .n2proxy import codec
from .procedures.catalog import load_subscribers
from .simkernel import US_PER_MS, US_PER_S

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3

log = logging.getLogger("pfaas")


class ConfigError(Exception):
    pass


def _seed(value) -> int:
    if value is None:
        value = os.environ.get("PFAAS_SEED", "0")
    try:
        seed = int(value, 0) if isinstance(value, str) else int(value)
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {value!r}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must fit in 64 unsigned bits")
    return seed


def _scenario(args) -> ScenarioSpec:
    source = args.scenario
    if source in PRESETS:
        spec = preset(source)
    elif os.path.exists(source):
        try:
            spec = ScenarioSpec.load(source)
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"cannot read scenario {source}: {exc}") from None
    else:
        raise ConfigError(f"{source!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
    if args.calibration:
        spec = spec.with_calibration(args.calibration)
    return spec


def _sim_config(args) -> SimConfig:
    cfg = SimConfig()
    if args.idle_window_s is not None:
        cfg.idle_window_us = int(round(args.idle_window_s * US_PER_S))
    if args.cold_start_ms is not None:
        cfg.cold_start_us = int(round(args.cold_start_ms * US_PER_MS))
    if args.jitter_pct is not None:
        if not 0 <= args.jitter_pct < 100:
            raise ConfigError("--jitter-pct must be in [0, 100)")
        cfg.exec_jitter_pct = args.jitter_pct / 100
    if args.cold_jitter_pct is not None:
        cfg.cold_start_jitter_pct = args.cold_jitter_pct / 100
    cfg.backend_latency_us = args.backend_latency_us
    cfg.n4_nested = args.n4_nested
    cfg.slice_max_ues = args.max_ues
    if cfg.idle_window_us <= 0 or cfg.cold_start_us < 0 or cfg.backend_latency_us < 0:
        raise ConfigError("idle window must be positive, delays non-negative")
    return cfg


def _execute(args, cold_storm: bool):
    spec = _scenario(args)
    subs = load_subscribers(args.subscribers) if args.subscribers else None
    return run_scenario(spec, r17=args.r17, cold_storm=cold_storm, seed=_seed(args.seed),
                        config=_sim_config(args), subscribers=subs)


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit(report: dict, args, renderer=render_table) -> None:
    if args.format == "table":
        _write(renderer(report), args.out)
    else:
        _write(json.dumps(report, sort_keys=True, indent=1) + "\n", args.out)


def _side_outputs(result, args) -> None:
    if args.ledger_out:
        with open(args.ledger_out, "w", encoding="utf-8") as fh:
            for rec in result.ledger:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    if args.result_out:
        _write(result.to_json() + "\n", args.result_out)
    if args.dump_state:
        _write(result.store.dump_json() + "\n", args.dump_state)


def _success_code(report: dict) -> int:
    rate = report["success"]["rate"]
    return EXIT_OK if rate is None or rate == 1.0 else EXIT_FAILURES


def cmd_run(args) -> int:
    result = _execute(args, cold_storm=args.cold_storm)
    report = build_report(result, platform_mb=args.platform_mb)
    _side_outputs(result, args)
    _emit(report, args)
    return _success_code(report)


def _delta(cold, warm):
    return None if cold is None or warm is None else cold - warm


def cmd_coldstorm(args) -> int:
    warm = build_report(_execute(args, cold_storm=False), platform_mb=args.platform_mb)
    result = _execute(args, cold_storm=True)
    cold = build_report(result, platform_mb=args.platform_mb)
    _side_outputs(result, args)

    wl, cl = warm["latency"]["registration"], cold["latency"]["registration"]
    convergence, converged = None, True
    if result.outcomes and wl["p50"] is not None:
        try:
            convergence = convergence_time([o.start_us for o in result.outcomes],
                                           [o.latency_us for o in result.outcomes],
                                           wl["p50"], band=args.band, window=args.window)
        except NoConvergence as exc:
            converged = False
            log.warning("no convergence: %s", exc)
    report = {
        "warm": warm,
        "cold": cold,
        "delta_ms": {k: None if _delta(cl[k], wl[k]) is None else _delta(cl[k], wl[k]) / US_PER_MS
                     for k in ("p50", "p95", "p99")},
        "convergence_us": convergence,
        "converged": converged,
        "success": {"warm": warm["success"], "cold": cold["success"]},
    }
    _emit(report, args, _render_coldstorm)
    if args.require_convergence and not converged:
        return EXIT_NO_CONVERGENCE
    return max(_success_code(warm), _success_code(cold))


def _render_coldstorm(report: dict) -> str:
    lines = []
    for name in ("warm", "cold"):
        s = report[name]["latency"]["registration"]
        fmt = lambda v: "-" if v is None else f"{v / 1000:,.1f}"
        lines.append(f"{name:5s} p50={fmt(s['p50'])} ms  p95={fmt(s['p95'])} ms  p99={fmt(s['p99'])} ms  "
                     f"success={report[name]['success']['rate']}  timeouts={report[name]['success']['timeouts']}")
    d = report["delta_ms"]
    lines.append("delta " + "  ".join(f"{k}={'-' if v is None else f'{v:+,.1f}'} ms" for k, v in d.items()))
    conv = report["convergence_us"]
    lines.append("convergence " + ("none" if conv is None else f"{conv / US_PER_S:.3f} s"))
    return "\n".join(lines) + "\n"


def cmd_cost(args) -> int:
    try:
        params = costmodel.CostParams(Ms=args.Ms, Mp=args.Mp, Mf=args.Mf, Ma=args.Ma, Mi=args.Mi, g=args.g,
                                      lam=args.lam, d=args.duty, K=args.tenants, T=args.T)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    summary = costmodel.summarize(params)
    _emit(summary, args, costmodel.render_summary)
    return EXIT_OK


def _parse_snssai(text: str) -> tuple[int, int]:
    try:
        sst, sd = text.split(":")
        return int(sst, 0), int(sd, 0)
    except ValueError:
        raise ConfigError(f"snssai must look like SST:SD, got {text!r}") from None


def _hex(text: str | None, what: str) -> bytes | None:
    if text is None:
        return None
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise ConfigError(f"{what} is not valid hex") from None


def cmd_codec(args) -> int:
    if args.action == "decode":
        raw = "".join(args.hex).replace(" ", "")
        try:
            data = binascii.unhexlify(raw)
        except (binascii.Error, ValueError):
            raise ConfigError("frame is not valid hex") from None
        try:
            frame = codec.decode(data)
        except codec.CodecError as exc:
            raise ConfigError(f"{type(exc).__name__}: {exc}") from None
        out = {"ue_id": frame.ue_id, "version": frame.version, **frame.nas.to_dict()}
        sys.stdout.write(json.dumps(out, sort_keys=True) + "\n")
        return EXIT_OK

    try:
        msg_type = codec.MsgType[args.type.upper()] if not args.type.isdigit() else codec.MsgType(int(args.type))
    except (KeyError, ValueError):
        names = ", ".join(m.name for m in codec.MsgType)
        raise ConfigError(f"unknown message type {args.type!r}; one of {names}") from None
    ies = {
        "supi": args.supi,
        "rand": _hex(args.rand, "--rand"),
        "autn": _hex(args.autn, "--autn"),
        "res": _hex(args.res, "--res"),
        "snssai": _parse_snssai(args.snssai) if args.snssai else None,
        "pdu_session_id": args.pdu_session_id,
        "dnn": args.dnn,
        "cause": args.cause,
    }
    try:
        data = codec.encode_message(args.ue_id, msg_type, **ies)
    except codec.CodecError as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from None
    sys.stdout.write(data.hex().upper() + "\n")
    return EXIT_OK


def cmd_report(args) -> int:
    """Merge metrics reports. Full results (``--result-out`` files) are turned
    into reports first and can also have their final store dumped."""
    reports, states = [], []
    for path in args.paths:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}") from None
        if isinstance(data, dict) and "outcomes" in data:
            try:
                result = ScenarioResult.from_dict(data)
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"{path}: not a scenario result ({exc})") from None
            reports.append(build_report(result, platform_mb=args.platform_mb))
            states.append(result.state_dump)
        else:
            reports.append(data)
            states.append(None)
    if args.dump_state:
        if len(states) != 1 or states[0] is None:
            raise ConfigError("--dump-state needs exactly one scenario result written with --result-out")
        _write(json.dumps(states[0], sort_keys=True, indent=2, ensure_ascii=False) + "\n", args.dump_state)
    merged = aggregate(reports)
    if args.format == "table":
        if "latency" not in merged:
            raise ConfigError("table view needs run reports")
        _write(render_table(merged), args.out)
    else:
        _write(json.dumps(merged, sort_keys=True, indent=1) + "\n", args.out)
    return EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="low", help="preset name or scenario JSON file")
    p.add_argument("--seed", default=None, help="master seed (default: $PFAAS_SEED or 0)")
    p.add_argument("--r17", action="store_true", help="enable the Release 17 functions")
    p.add_argument("--subscribers", help="subscriber provisioning JSON (generated when omitted)")
    p.add_argument("--idle-window-s", type=float, help="scale-to-zero idle window")
    p.add_argument("--cold-start-ms", type=float, help="replica readiness delay from zero")
    p.add_argument("--cold-jitter-pct", type=float, help="uniform jitter on the cold-start delay")
    p.add_argument("--jitter-pct", type=float, help="uniform jitter on execution times")
    p.add_argument("--calibration", choices=sorted(CALIBRATIONS), help="RAN/UE delay profile")
    p.add_argument("--backend-latency-us", type=int, default=0)
    p.add_argument("--n4-nested", action="store_true", help="call smf-n4-setup from PDU creation")
    p.add_argument("--max-ues", type=int, help="slice admission limit under R17")
    p.add_argument("--platform-mb", type=float, default=DEFAULT_PLATFORM_MB)
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--ledger-out", help="write the invocation ledger as JSON lines")
    p.add_argument("--result-out", help="write the full scenario result as JSON")
    p.add_argument("--dump-state", help="write the final transient store as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfaas", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one traffic scenario")
    _add_run_flags(p)
    p.add_argument("--cold-storm", action="store_true", help="evict every replica at t=0")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("coldstorm", help="paired warm and cold-storm runs")
    _add_run_flags(p)
    p.add_argument("--band", type=float, default=DEFAULT_BAND, help="convergence band over warm p50")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW, help="sliding median window in UEs")
    p.add_argument("--require-convergence", action="store_true", help="exit 3 if the storm never settles")
    p.set_defaults(func=cmd_coldstorm)

    defaults = costmodel.CostParams()
    p = sub.add_parser("cost", help="break-even thresholds")
    for name, help_ in (("Ma", "always-on MB"), ("Mp", "platform MB"), ("Mf", "function MB"),
                        ("Ms", "serverless total MB"), ("Mi", "managed stores MB")):
        p.add_argument(f"--{name}", type=float, default=getattr(defaults, name), help=help_)
    p.add_argument("--g", type=float, default=defaults.g, help="GB-s per registration")
    p.add_argument("--lambda", dest="lam", type=float, default=defaults.lam, help="registrations per second")
    p.add_argument("--duty", type=float, default=defaults.d)
    p.add_argument("--tenants", type=int, default=defaults.K)
    p.add_argument("--T", type=float, default=defaults.T, help="period in seconds")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("codec", help="encode or decode N2 frames")
    csub = p.add_subparsers(dest="action", required=True)
    d = csub.add_parser("decode")
    d.add_argument("hex", nargs="+")
    e = csub.add_parser("encode")
    e.add_argument("--type", required=True, help="message name (e.g. REGISTRATION_REQUEST) or number")
    e.add_argument("--ue-id", type=int, default=0)
    e.add_argument("--supi")
    e.add_argument("--rand")
    e.add_argument("--autn")
    e.add_argument("--res")
    e.add_argument("--snssai", help="SST:SD")
    e.add_argument("--pdu-session-id", type=int)
    e.add_argument("--dnn")
    e.add_argument("--cause", type=lambda s: int(s, 0))
    p.set_defaults(func=cmd_codec)

    p = sub.add_parser("report", help="merge run reports (mean and sample stdev)")
    p.add_argument("paths", nargs="+", help="metrics reports or --result-out files")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--out")
    p.add_argument("--platform-mb", type=float, default=DEFAULT_PLATFORM_MB, help="used when rebuilding from results")
    p.add_argument("--dump-state", help="write the final store of a single result file as JSON")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, ProvisioningMissing) as exc:
        print(f"pfaas: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"pfaas: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
