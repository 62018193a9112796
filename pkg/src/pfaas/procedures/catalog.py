"""The 31-function deployment table, subscriber provisioning and a small
harness that runs handlers through a real runtime for tests and tools."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

from ..faas import R15, R17, Correlation, FunctionRuntime, FunctionSpec
from ..simkernel import Kernel
from ..statestore import encode_value
from . import amf, auth, data, nrf, r17, smf
from .model import Snssai, SubscriberRecord

# warm execution times measured for the registration chain; everything else
# gets DEFAULT_EXEC_US
MEASURED_EXEC_US = {
    "amf-initial-registration": 7680,
    "amf-auth-initiate": 2330,
    "udm-generate-auth-data": 840,
    "smf-pdu-session-create": 930,
    "ausf-authenticate": 800,
    "udm-get-subscriber-data": 740,
}
DEFAULT_EXEC_US = 1000


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    nf: str
    gate: str
    handler: Callable

    @property
    def exec_time_us(self) -> int:
        return MEASURED_EXEC_US.get(self.name, DEFAULT_EXEC_US)


CATALOG: tuple[CatalogEntry, ...] = (
    CatalogEntry("amf-initial-registration", "AMF", R15, amf.amf_initial_registration),
    CatalogEntry("amf-deregistration", "AMF", R15, amf.amf_deregistration),
    CatalogEntry("amf-service-request", "AMF", R15, amf.amf_service_request),
    CatalogEntry("amf-pdu-session-relay", "AMF", R15, amf.amf_pdu_session_relay),
    CatalogEntry("amf-handover", "AMF", R15, amf.amf_handover),
    CatalogEntry("amf-auth-initiate", "AMF", R15, amf.amf_auth_initiate),
    CatalogEntry("smf-pdu-session-create", "SMF", R15, smf.smf_pdu_session_create),
    CatalogEntry("smf-pdu-session-update", "SMF", R15, smf.smf_pdu_session_update),
    CatalogEntry("smf-pdu-session-release", "SMF", R15, smf.smf_pdu_session_release),
    CatalogEntry("smf-n4-setup", "SMF", R15, smf.smf_n4_setup),
    CatalogEntry("nrf-register", "NRF", R15, nrf.nrf_register),
    CatalogEntry("nrf-discover", "NRF", R15, nrf.nrf_discover),
    CatalogEntry("nrf-status-notify", "NRF", R15, nrf.nrf_status_notify),
    CatalogEntry("chf-charging-create", "CHF", R17, r17.chf_charging_create),
    CatalogEntry("chf-charging-update", "CHF", R17, r17.chf_charging_update),
    CatalogEntry("chf-charging-release", "CHF", R17, r17.chf_charging_release),
    CatalogEntry("bsf-binding-register", "BSF", R17, r17.bsf_binding_register),
    CatalogEntry("bsf-binding-discover", "BSF", R17, r17.bsf_binding_discover),
    CatalogEntry("bsf-binding-deregister", "BSF", R17, r17.bsf_binding_deregister),
    CatalogEntry("udm-generate-auth-data", "UDM", R15, auth.udm_generate_auth_data),
    CatalogEntry("udm-get-subscriber-data", "UDM", R15, auth.udm_get_subscriber_data),
    CatalogEntry("udr-data-read", "UDR", R15, data.udr_data_read),
    CatalogEntry("udr-data-write", "UDR", R15, data.udr_data_write),
    CatalogEntry("pcf-policy-create", "PCF", R15, data.pcf_policy_create),
    CatalogEntry("pcf-policy-get", "PCF", R15, data.pcf_policy_get),
    CatalogEntry("nwdaf-analytics-subscribe", "NWDAF", R17, r17.nwdaf_analytics_subscribe),
    CatalogEntry("nwdaf-data-collect", "NWDAF", R17, r17.nwdaf_data_collect),
    CatalogEntry("nsacf-slice-availability-check", "NSACF", R17, r17.nsacf_slice_availability_check),
    CatalogEntry("nsacf-update-counters", "NSACF", R17, r17.nsacf_update_counters),
    CatalogEntry("ausf-authenticate", "AUSF", R15, auth.ausf_authenticate),
    CatalogEntry("nssf-slice-select", "NSSF", R15, data.nssf_slice_select),
)

BY_NAME = {e.name: e for e in CATALOG}


def function_specs(
    exec_overrides: dict[str, int] | None = None,
    exec_jitter_pct: float = 0.0,
    **spec_kwargs,
) -> list[FunctionSpec]:
    overrides = exec_overrides or {}
    return [
        FunctionSpec(
            name=e.name,
            nf=e.nf,
            exec_time_us=int(overrides.get(e.name, e.exec_time_us)),
            exec_jitter_pct=exec_jitter_pct,
            feature_gate=e.gate,
            **spec_kwargs,
        )
        for e in CATALOG
    ]


def deploy_all(runtime: FunctionRuntime, specs: list[FunctionSpec] | None = None) -> None:
    for spec in specs or function_specs():
        runtime.deploy(spec, BY_NAME[spec.name].handler)


# provisioning

def load_subscribers(path) -> list[SubscriberRecord]:
    with open(path, encoding="utf-8") as fh:
        items = json.load(fh)
    if not isinstance(items, list):
        raise ValueError(f"{path}: expected a JSON array of subscribers")
    subs = [SubscriberRecord.from_dict(d) for d in items]
    seen = set()
    for s in subs:
        if s.supi in seen:
            raise ValueError(f"{path}: duplicate supi {s.supi}")
        seen.add(s.supi)
    return subs


def make_supi(index: int) -> str:
    return f"imsi-{index:015d}"


def generate_subscribers(count: int, seed: int = 0, snssai: Snssai = Snssai(1, 1)) -> list[SubscriberRecord]:
    """Deterministic synthetic subscribers ``imsi-000000000000001`` upwards."""
    rng = Kernel(seed).rng("provisioning")
    return [SubscriberRecord(make_supi(i + 1), rng.bytes(16), 0, [snssai]) for i in range(count)]


def provision(store, subscribers) -> int:
    for sub in subscribers:
        store.put_json(sub.key, sub.to_dict())
    return len(subscribers)


def dump_subscribers(subscribers, fp) -> None:
    json.dump([s.to_dict() for s in subscribers], fp, indent=1)


class CoreHarness:
    """A warm, fully deployed core driven one call at a time.

    ``call`` invokes a function through the gateway, runs the simulation until
    the chain settles and returns the decoded response (or raises the error).
    """

    def __init__(self, *, r17: bool = False, seed: int = 0, config: dict | None = None, subscribers=()):
        self.kernel = Kernel(seed)
        self.runtime = FunctionRuntime(self.kernel, r17=r17, config=config)
        deploy_all(self.runtime)
        self.runtime.prewarm()
        provision(self.store, list(subscribers))

    @property
    def store(self):
        return self.runtime.store

    @property
    def registry(self):
        return self.runtime.registry

    def call(self, function: str, request: dict, supi: str | None = None, procedure: str | None = None) -> dict:
        inv = self.runtime.invoke(function, encode_value(request), Correlation(supi or request.get("supi"), procedure))
        self.kernel.run()
        return inv.result()

    def register(self, sub: SubscriberRecord, snssai: Snssai | None = None, k: bytes | None = None) -> dict:
        """Walk the three registration steps with the UE's own key."""
        from .model import ue_response

        req = {"supi": sub.supi}
        if snssai is not None:
            req["snssai"] = snssai.to_dict()
        challenge = self.call("amf-initial-registration", req)
        res = ue_response(k or sub.k, bytes.fromhex(challenge["rand"]))
        self.call("amf-auth-initiate", {"supi": sub.supi, "phase": "verify", "res": res.hex()})
        return self.call("udm-get-subscriber-data", {"supi": sub.supi, "complete_registration": True})
