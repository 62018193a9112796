"""Traffic scenarios, the staggered batch arrival plan and UE-side NAS agents."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

from .faas import DEFAULT_COLD_START_US, DEFAULT_IDLE_WINDOW_US, DEFAULT_SWEEP_INTERVAL_US, FunctionRuntime, InvocationRecord
from .n2proxy.codec import MsgType, decode, encode_message
from .n2proxy.proxy import N2Proxy
from .n2proxy.transport import SimLink
from .procedures.catalog import deploy_all, function_specs, generate_subscribers, make_supi, provision
from .procedures.model import Snssai, subscriber_key, ue_response
from .simkernel import US_PER_S, Kernel

T3510_US = 15 * US_PER_S

# (one-way RAN delay, UE processing per NAS round trip) in microseconds.
# "paper-warm" lands a warm registration at 456,500 us with the measured chain:
# 3 * (2 * 1,000 + 144,980) + 15,560.
CALIBRATIONS = {
    "paper-warm": (1000, 144_980),
    "ideal": (0, 0),
}


class ProvisioningMissing(LookupError):
    pass


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    ue_count: int
    rate_per_s: float
    duration_s: int
    pdu_per_ue: int
    batch_size: int = 100
    batch_stagger_s: float = 30.0
    per_instance_cap_per_s: float = 50.0
    ue_step_delay_us: int = CALIBRATIONS["paper-warm"][1]
    ran_rtt_us: int = CALIBRATIONS["paper-warm"][0]

    def __post_init__(self):
        if self.ue_count < 0 or self.pdu_per_ue < 0:
            raise ScenarioError("ue_count and pdu_per_ue must be non-negative")
        if self.name == "idle" and self.ue_count != 0:
            raise ScenarioError("idle scenario carries no UEs")
        if self.batch_size < 1 or self.per_instance_cap_per_s <= 0 or self.batch_stagger_s < 0:
            raise ScenarioError("batch_size, per_instance_cap_per_s must be positive")
        if self.duration_s <= 0:
            raise ScenarioError("duration_s must be positive")
        if self.ue_step_delay_us < 0 or self.ran_rtt_us < 0:
            raise ScenarioError("delays must be non-negative")

    def with_calibration(self, profile: str) -> "ScenarioSpec":
        try:
            rtt, step = CALIBRATIONS[profile]
        except KeyError:
            raise ScenarioError(f"unknown calibration profile {profile!r}") from None
        return replace(self, ran_rtt_us=rtt, ue_step_delay_us=step)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


PRESETS = {
    "idle": ScenarioSpec("idle", 0, 0.0, 600, 0),
    "low": ScenarioSpec("low", 100, 1.0, 600, 1),
    "medium": ScenarioSpec("medium", 500, 5.0, 600, 2),
    "high": ScenarioSpec("high", 1000, 20.0, 600, 3),
    "burst": ScenarioSpec("burst", 500, 50.0, 300, 2, batch_stagger_s=10.0),
}


def preset(name: str) -> ScenarioSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; presets: {', '.join(PRESETS)}") from None


@dataclass(frozen=True)
class Batch:
    start_us: int
    supis: tuple[str, ...]
    offsets_us: tuple[int, ...]


def build_batches(spec: ScenarioSpec) -> list[Batch]:
    """Batch k starts at k * stagger; within a batch UEs are spaced at the
    per-instance cap, so 100 UEs at 50/s span 2 s."""
    spacing_us = US_PER_S / spec.per_instance_cap_per_s
    plan = []
    for k in range(math.ceil(spec.ue_count / spec.batch_size)):
        lo = k * spec.batch_size
        hi = min(spec.ue_count, lo + spec.batch_size)
        plan.append(Batch(
            start_us=int(round(k * spec.batch_stagger_s * US_PER_S)),
            supis=tuple(make_supi(i + 1) for i in range(lo, hi)),
            offsets_us=tuple(int(round(i * spacing_us)) for i in range(hi - lo)),
        ))
    return plan


@dataclass
class UeOutcome:
    supi: str
    ue_id: int
    start_us: int
    outcome: str = "pending"  # pending | success | timeout | rejected
    latency_us: int | None = None
    reject_cause: int | None = None
    pdu_latencies_us: list[int] = field(default_factory=list)
    pdu_failures: int = 0


class UeAgent:
    """UE side of the NAS exchange: registration, then PDU sessions one at a time."""

    def __init__(self, kernel, link: SimLink, supi: str, ue_id: int, k: bytes, snssai: Snssai,
                 spec: ScenarioSpec, start_us: int, t3510_us: int = T3510_US):
        self.kernel = kernel
        self.link = link
        self.k = k
        self.snssai = snssai
        self.spec = spec
        self.t3510_us = t3510_us
        self.result = UeOutcome(supi, ue_id, start_us)
        self.phase = "new"
        self.reg_sent_at = None
        self.pdu_sent_at = None
        self.pdus_left = spec.pdu_per_ue
        self.next_pdu_id = 1
        self._timer = None
        link.attach_ue(ue_id, self.on_downlink)
        kernel.schedule(start_us, self.start)

    @property
    def done(self) -> bool:
        return self.phase == "done"

    def _send(self, msg_type: MsgType, **ies) -> None:
        self.link.uplink.send(encode_message(self.result.ue_id, msg_type, **ies))

    def _send_later(self, msg_type: MsgType, **ies) -> None:
        self.kernel.call_later(self.spec.ue_step_delay_us, self._send_frame,
                               encode_message(self.result.ue_id, msg_type, **ies))

    def _send_frame(self, frame: bytes) -> None:
        if self.phase != "done":
            self.link.uplink.send(frame)

    def start(self) -> None:
        self.reg_sent_at = self.kernel.now()
        self._timer = self.kernel.call_later(self.t3510_us, self.on_t3510)
        self.phase = "wait-auth"
        self._send(MsgType.REGISTRATION_REQUEST, supi=self.result.supi,
                   snssai=(self.snssai.sst, self.snssai.sd))

    def on_t3510(self) -> None:
        if self.result.outcome == "pending":
            self.result.outcome = "timeout"
            self.phase = "done"

    def _finish_registration(self, outcome: str) -> None:
        self.result.outcome = outcome
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    def on_downlink(self, data: bytes) -> None:
        if self.phase == "done":
            return
        msg = decode(data).nas
        if msg.msg_type is MsgType.REJECT:
            if self.result.outcome == "pending":
                self.result.reject_cause = msg.cause
                self._finish_registration("rejected")
                self.phase = "done"
            elif self.phase == "wait-pdu":
                self.result.pdu_failures += 1
                self._after_pdu()
            return
        if self.phase == "wait-auth" and msg.msg_type is MsgType.AUTHENTICATION_REQUEST:
            res = ue_response(self.k, msg.rand)
            self.phase = "wait-smc"
            self._send_later(MsgType.AUTHENTICATION_RESPONSE, res=res)
        elif self.phase == "wait-smc" and msg.msg_type is MsgType.SECURITY_MODE_COMMAND:
            self.phase = "wait-accept"
            self._send_later(MsgType.SECURITY_MODE_COMPLETE)
        elif self.phase == "wait-accept" and msg.msg_type is MsgType.REGISTRATION_ACCEPT:
            self.phase = "completing"
            self.kernel.call_later(self.spec.ue_step_delay_us, self._complete_registration)
        elif self.phase == "wait-pdu" and msg.msg_type is MsgType.PDU_ESTABLISH_ACCEPT:
            self.result.pdu_latencies_us.append(self.kernel.now() - self.pdu_sent_at)
            self._after_pdu()

    def _complete_registration(self) -> None:
        if self.phase == "done":
            return
        self._send(MsgType.REGISTRATION_COMPLETE)
        self.result.latency_us = self.kernel.now() - self.reg_sent_at
        self._finish_registration("success")
        self._next_pdu()

    def _next_pdu(self) -> None:
        if self.pdus_left == 0:
            self.phase = "done"
            return
        self.pdus_left -= 1
        self.phase = "wait-pdu"
        self.pdu_sent_at = self.kernel.now()
        sid = self.next_pdu_id
        self.next_pdu_id += 1
        self._send(MsgType.PDU_ESTABLISH_REQUEST, pdu_session_id=sid, dnn="internet",
                   snssai=(self.snssai.sst, self.snssai.sd))

    def _after_pdu(self) -> None:
        self._next_pdu()


@dataclass
class SimConfig:
    """Knobs that are not part of the traffic shape."""

    idle_window_us: int = DEFAULT_IDLE_WINDOW_US
    cold_start_us: int = DEFAULT_COLD_START_US
    cold_start_jitter_pct: float = 0.0
    exec_jitter_pct: float = 0.0
    backend_latency_us: int = 0
    sweep_interval_us: int = DEFAULT_SWEEP_INTERVAL_US
    t3510_us: int = T3510_US
    n4_nested: bool = False
    slice_max_ues: int | None = None
    drain_limit_us: int = 3600 * US_PER_S

    def handler_config(self) -> dict:
        cfg = {"n4_nested": self.n4_nested}
        if self.slice_max_ues is not None:
            cfg["slice_max_ues"] = self.slice_max_ues
        return cfg


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    r17: bool
    cold_storm: bool
    seed: int
    config: SimConfig
    outcomes: list[UeOutcome]
    ledger: list
    replica_timeline: list
    replica_rss_mb: dict
    end_us: int
    window_us: int
    final_replicas: dict
    store: object = None
    state_dump: dict | None = None

    def to_dict(self, include_ledger: bool = True) -> dict:
        d = {
            "scenario": self.spec.to_dict(),
            "r17": self.r17,
            "cold_storm": self.cold_storm,
            "seed": self.seed,
            "config": asdict(self.config),
            "end_us": self.end_us,
            "window_us": self.window_us,
            "outcomes": [asdict(o) for o in self.outcomes],
            "replica_timeline": [list(e) for e in self.replica_timeline],
            "replica_rss_mb": self.replica_rss_mb,
            "final_replicas": self.final_replicas,
        }
        if include_ledger:
            d["ledger"] = [r.to_dict() for r in self.ledger]
        state = self.store.dump() if self.store is not None else self.state_dump
        if state is not None:
            d["state"] = state
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioResult":
        """Rebuild a result written by ``to_json``; the store comes back only as its dump."""
        return cls(
            spec=ScenarioSpec.from_dict(d["scenario"]),
            r17=d["r17"],
            cold_storm=d["cold_storm"],
            seed=d["seed"],
            config=SimConfig(**d["config"]),
            outcomes=[UeOutcome(**o) for o in d["outcomes"]],
            ledger=[InvocationRecord(**r) for r in d.get("ledger", [])],
            replica_timeline=[tuple(e) for e in d["replica_timeline"]],
            replica_rss_mb=d["replica_rss_mb"],
            end_us=d["end_us"],
            window_us=d["window_us"],
            final_replicas=d["final_replicas"],
            state_dump=d.get("state"),
        )

    def to_json(self, include_ledger: bool = True) -> str:
        return json.dumps(self.to_dict(include_ledger), sort_keys=True, separators=(",", ":"))


def run_scenario(
    spec: ScenarioSpec,
    r17: bool = False,
    cold_storm: bool = False,
    seed: int = 0,
    config: SimConfig | None = None,
    subscribers=None,
) -> ScenarioResult:
    config = config or SimConfig()
    kernel = Kernel(seed)
    runtime = FunctionRuntime(
        kernel,
        r17=r17,
        idle_window_us=config.idle_window_us,
        cold_start_us=config.cold_start_us,
        cold_start_jitter_pct=config.cold_start_jitter_pct,
        config=config.handler_config(),
    )
    specs = function_specs(exec_jitter_pct=config.exec_jitter_pct, cold_start_us=config.cold_start_us)
    deploy_all(runtime, specs)
    if subscribers is None:
        subscribers = generate_subscribers(spec.ue_count, seed)
    provision(runtime.store, subscribers)
    by_supi = {s.supi: s for s in subscribers}

    plan = build_batches(spec)
    for batch in plan:
        for supi in batch.supis:
            if subscriber_key(supi) not in runtime.store:
                raise ProvisioningMissing(supi)

    link = SimLink(kernel, spec.ran_rtt_us)
    proxy = N2Proxy(kernel, runtime, link.send_downlink, config.backend_latency_us)
    link.attach_proxy(proxy)

    if cold_storm:
        runtime.evict_all()
    elif spec.ue_count > 0:
        runtime.prewarm()
    runtime.start_autoscaler(config.sweep_interval_us)

    agents = []
    ue_id = 0
    for batch in plan:
        for supi, offset in zip(batch.supis, batch.offsets_us):
            ue_id += 1
            sub = by_supi[supi]
            snssai = sub.allowed_snssai[0] if sub.allowed_snssai else Snssai(1, 1)
            agents.append(UeAgent(kernel, link, supi, ue_id, sub.k, snssai, spec,
                                  batch.start_us + offset, config.t3510_us))

    window_us = spec.duration_s * US_PER_S
    kernel.run_until(window_us)
    # drain: keep going past the window until every UE is terminal
    step = US_PER_S
    while not all(a.done for a in agents):
        if kernel.now() - window_us >= config.drain_limit_us:
            break
        kernel.run_until(kernel.now() + step)
    end_us = kernel.now()
    runtime.stop_autoscaler()
    for a in agents:
        if a.result.outcome == "pending":
            a.result.outcome = "timeout"

    return ScenarioResult(
        spec=spec,
        r17=r17,
        cold_storm=cold_storm,
        seed=seed,
        config=config,
        outcomes=[a.result for a in agents],
        ledger=runtime.ledger(),
        replica_timeline=list(runtime.replica_timeline),
        replica_rss_mb={name: s.replica_rss_mb for name, s in runtime.specs.items()},
        end_us=end_us,
        window_us=max(window_us, end_us),
        final_replicas=runtime.replica_counts(),
        store=runtime.store,
    )
