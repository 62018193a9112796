from collections import Counter
from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

from oracles import mac16
from pfaas.procedures import CATALOG, BY_NAME, CoreHarness, generate_subscribers, load_subscribers
from pfaas.procedures.model import (
    AlreadyReleased,
    AuthFailed,
    AuthVector,
    CounterUnderflow,
    DuplicateSession,
    LEGAL_TRANSITIONS,
    NoPendingChallenge,
    NotRegistered,
    RegState,
    SessionClosed,
    SliceAdmissionRejected,
    Snssai,
    SubscriberRecord,
    UnknownKey,
    UnknownSubscriber,
    UnknownSubscription,
    WrongState,
)
from pfaas.statestore import KVStore

SUBS = generate_subscribers(4, seed=11)


def harness(r17=False, **config):
    return CoreHarness(r17=r17, seed=5, config=config, subscribers=SUBS)


def ue_state(h, supi):
    raw = h.store.get_json(f"ue:{supi}")
    return None if raw is None else raw["reg_state"]


def test_catalog_shape():
    assert len(CATALOG) == 31
    assert len({e.name for e in CATALOG}) == 31
    assert BY_NAME["amf-initial-registration"].exec_time_us == 7680
    assert BY_NAME["nrf-register"].exec_time_us == 1000


def test_aka_vector_matches_independent_mac():
    k, rand = bytes(range(16)), bytes(16)
    v = AuthVector.derive(k, rand, 5)
    assert v.xres == mac16(k, rand)
    assert v.autn == mac16(k, rand + (5).to_bytes(6, "big"))
    assert v.kseaf == mac16(k, rand + b"seaf")


def test_generate_auth_data_modes():
    h = harness()
    supi = SUBS[0].supi
    a = h.call("udm-generate-auth-data", {"supi": supi, "mode": "challenge"})
    b = h.call("udm-generate-auth-data", {"supi": supi, "mode": "challenge"})
    assert a["rand"] != b["rand"]
    assert h.store.get_json(f"udr/subscribers/{supi}")["sqn"] == 2
    v1 = h.call("udm-generate-auth-data", {"supi": supi, "mode": "verify", "rand": b["rand"]})
    v2 = h.call("udm-generate-auth-data", {"supi": supi, "mode": "verify", "rand": b["rand"]})
    assert v1 == v2 and v1["autn"] == b["autn"]
    assert h.store.get_json(f"udr/subscribers/{supi}")["sqn"] == 2
    with pytest.raises(UnknownSubscriber):
        h.call("udm-generate-auth-data", {"supi": "imsi-nobody"})


def test_ausf_outcomes():
    h = harness()
    sub = SUBS[0]
    with pytest.raises(NoPendingChallenge):
        h.call("ausf-authenticate", {"supi": sub.supi, "res": "00" * 16})
    ch = h.call("udm-generate-auth-data", {"supi": sub.supi})
    assert h.call("ausf-authenticate", {"supi": sub.supi, "res": "00" * 16})["result"] == "failure"
    ok = h.call("ausf-authenticate", {"supi": sub.supi, "res": mac16(sub.k, bytes.fromhex(ch["rand"])).hex()})
    assert ok["result"] == "success" and ok["kseaf"] == ch["kseaf"]
    assert h.store.get("auth:" + sub.supi) is None


def test_initial_registration_r15():
    h = harness()
    out = h.call("amf-initial-registration", {"supi": SUBS[0].supi})
    assert set(out) >= {"rand", "autn"}
    assert ue_state(h, SUBS[0].supi) == "AuthPending"
    assert len(h.runtime.ledger()) == 3


def test_full_registration_is_seven_records():
    h = harness()
    h.register(SUBS[0])
    assert ue_state(h, SUBS[0].supi) == "Registered"
    counts = Counter(r.function for r in h.runtime.ledger())
    assert counts == {"amf-initial-registration": 1, "amf-auth-initiate": 2, "udm-generate-auth-data": 2,
                      "ausf-authenticate": 1, "udm-get-subscriber-data": 1}


def test_reregistration_resets_context():
    h = harness()
    h.register(SUBS[0])
    assert h.store.get_json(f"ue:{SUBS[0].supi}")["kseaf"]
    h.call("amf-initial-registration", {"supi": SUBS[0].supi})
    ue = h.store.get_json(f"ue:{SUBS[0].supi}")
    assert ue["reg_state"] == "AuthPending" and ue["kseaf"] is None


def test_auth_initiate_verify_paths():
    h = harness()
    sub = SUBS[0]
    with pytest.raises(WrongState):
        h.call("amf-auth-initiate", {"supi": sub.supi, "phase": "verify", "res": "00" * 16})
    h.call("amf-initial-registration", {"supi": sub.supi})
    with pytest.raises(AuthFailed):
        h.call("amf-auth-initiate", {"supi": sub.supi, "phase": "verify", "res": "00" * 16})
    assert ue_state(h, sub.supi) == "AuthPending"


def test_get_subscriber_data_idempotent():
    h = harness()
    a = h.call("udm-get-subscriber-data", {"supi": SUBS[1].supi})
    before = h.store.snapshot()
    b = h.call("udm-get-subscriber-data", {"supi": SUBS[1].supi})
    assert a == b and h.store.snapshot() == before
    assert a["allowed_snssai"] == [{"sst": 1, "sd": 1}]
    with pytest.raises(UnknownSubscriber):
        h.call("udm-get-subscriber-data", {"supi": "imsi-x"})


def test_slice_admission_limit():
    h = harness(r17=True, slice_max_ues=1)
    h.register(SUBS[0])
    with pytest.raises(SliceAdmissionRejected):
        h.call("amf-initial-registration", {"supi": SUBS[1].supi})
    assert h.store.get_json("nsacf-counters/1-1")["registered_ues"] == 1
    assert ue_state(h, SUBS[1].supi) is None


def test_counter_boundary_trace():
    h = harness(r17=True, slice_max_ues=100)
    s = {"snssai": {"sst": 1, "sd": 1}}
    for _ in range(99):
        h.call("nsacf-update-counters", {**s, "delta": 1})
    assert h.call("nsacf-slice-availability-check", s)["admitted"]
    assert h.call("nsacf-update-counters", {**s, "delta": 1})["registered_ues"] == 100
    assert not h.call("nsacf-slice-availability-check", s)["admitted"]


def test_counter_underflow_and_conservation():
    h = harness(r17=True)
    s = {"snssai": {"sst": 2, "sd": 7}}
    with pytest.raises(CounterUnderflow):
        h.call("nsacf-update-counters", {**s, "delta": -1})
    for d in [1] * 50 + [-1] * 50:
        h.call("nsacf-update-counters", {**s, "delta": d})
    assert h.store.get_json("nsacf-counters/2-7")["registered_ues"] == 0


def test_pdu_create_r15_and_r17():
    h = harness()
    h.register(SUBS[0])
    s = h.call("smf-pdu-session-create", {"supi": SUBS[0].supi})
    assert s["state"] == "Active" and s["charging_id"] is None and s["session_id"] == 1
    assert h.call("smf-pdu-session-create", {"supi": SUBS[0].supi})["session_id"] == 2
    with pytest.raises(DuplicateSession):
        h.call("smf-pdu-session-create", {"supi": SUBS[0].supi, "session_id": 1})
    with pytest.raises(NotRegistered):
        h.call("smf-pdu-session-create", {"supi": SUBS[1].supi})

    h17 = harness(r17=True)
    h17.register(SUBS[0])
    n = len(h17.runtime.ledger())
    s = h17.call("smf-pdu-session-create", {"supi": SUBS[0].supi})
    assert s["charging_id"] and s["binding_id"]
    new = sorted(r.function for r in h17.runtime.ledger()[n:])
    assert new == ["bsf-binding-register", "chf-charging-create", "smf-pdu-session-create"]


def test_pdu_update_release_and_n4():
    h = harness(r17=True)
    supi = SUBS[0].supi
    h.register(SUBS[0])
    h.call("smf-pdu-session-create", {"supi": supi})
    up = h.call("smf-pdu-session-update", {"supi": supi, "session_id": 1, "qos": 5, "units": 3})
    assert up["qos"] == 5 and up["charging_units"] == 3
    rel = h.call("smf-pdu-session-release", {"supi": supi, "session_id": 1})
    assert rel["state"] == "Released" and rel["charging_state"] == "Closed"
    with pytest.raises(AlreadyReleased):
        h.call("smf-pdu-session-release", {"supi": supi, "session_id": 1})
    h.call("smf-pdu-session-create", {"supi": supi})
    a = h.call("smf-n4-setup", {"supi": supi, "session_id": 2})
    v = h.store.version(a["n4"])
    h.call("smf-n4-setup", {"supi": supi, "session_id": 2})
    assert h.store.version(a["n4"]) == v == 1


def test_n4_nested_when_configured():
    h = harness(n4_nested=True)
    h.register(SUBS[0])
    h.call("smf-pdu-session-create", {"supi": SUBS[0].supi})
    assert "smf-n4-setup" in {r.function for r in h.runtime.ledger()}
    assert h.store.get(f"n4:{SUBS[0].supi}:1") is not None


def test_deregistration_cascade_r17():
    h = harness(r17=True)
    supi = SUBS[0].supi
    h.register(SUBS[0])
    for _ in range(2):
        h.call("smf-pdu-session-create", {"supi": supi})
    out = h.call("amf-deregistration", {"supi": supi})
    assert out["released"] == [1, 2] and len(out["charging_closed"]) == 2
    assert h.store.get(f"ue:{supi}") is None
    assert h.store.get_json("nsacf-counters/1-1")["registered_ues"] == 0
    for prefix in ("pdu:", "charging-sessions/", "bsf-bindings/"):
        assert not [r for r in h.store.scan_prefix(prefix) if supi in r.value.decode()]


def test_service_request_and_handover():
    h = harness()
    supi = SUBS[0].supi
    with pytest.raises(WrongState):
        h.call("amf-handover", {"supi": supi, "target_gnb": 9})
    h.register(SUBS[0])
    assert h.call("amf-service-request", {"supi": supi})["result"] == "ServiceAccept"
    h.call("amf-handover", {"supi": supi, "target_gnb": 9})
    assert h.store.get_json(f"ue:{supi}")["serving_gnb"] == 9


def test_pdu_relay_forwards():
    h = harness()
    supi = SUBS[0].supi
    h.register(SUBS[0])
    out = h.call("amf-pdu-session-relay", {"supi": supi, "payload": {"op": "create", "dnn": "ims"}})
    assert out["dnn"] == "ims"


def test_nrf_operations():
    h = harness()
    for t, i in (("amf", "a1"), ("amf", "a2"), ("smf", "s1")):
        h.call("nrf-register", {"profile": {"nf_type": t, "instance_id": i}})
    assert len(h.call("nrf-discover", {"nf_type": "amf"})["profiles"]) == 2
    assert h.call("nrf-discover", {"nf_type": "upf"})["profiles"] == []
    first = h.registry.get_json("nrf/amf/a1")
    h.kernel.run_until(h.kernel.now() + 1000)
    h.call("nrf-register", {"profile": {"nf_type": "amf", "instance_id": "a1"}})
    again = h.registry.get_json("nrf/amf/a1")
    assert again["heartbeat_at"] > first["heartbeat_at"] and again["registered_at"] == first["registered_at"]
    assert len(h.call("nrf-discover", {"nf_type": "amf"})["profiles"]) == 2
    h.call("nrf-register", {"profile": {"nf_type": "smf", "instance_id": "s2"}, "subscriptions": ["amf"]})
    assert h.call("nrf-status-notify", {"nf_type": "amf", "instance_id": "a1"})["notified"] == 1


def test_chf_lifecycle():
    h = harness(r17=True)
    c = h.call("chf-charging-create", {"supi": "imsi-1", "session_id": 1})
    assert c["state"] == "Open" and c["units"] == 0
    h.call("chf-charging-update", {"id": c["id"], "units": 5})
    assert h.call("chf-charging-update", {"id": c["id"], "units": 5})["units"] == 10
    h.call("chf-charging-release", {"id": c["id"]})
    with pytest.raises(SessionClosed):
        h.call("chf-charging-update", {"id": c["id"], "units": 1})


def test_bsf_crud():
    h = harness(r17=True)
    assert h.call("bsf-binding-discover", {"supi": "imsi-1"})["binding"] is None
    b = h.call("bsf-binding-register", {"supi": "imsi-1", "session_id": 1, "pcf_policy_id": "p"})
    assert h.call("bsf-binding-discover", {"supi": "imsi-1"})["binding"] == b
    assert h.call("bsf-binding-deregister", {"id": b["id"]})["existed"] is True
    assert h.call("bsf-binding-deregister", {"id": b["id"]})["existed"] is False


def test_pcf_udr_nwdaf_nssf():
    h = harness(r17=True)
    h.call("pcf-policy-create", {"id": "p1", "rules": {"qos": 9}})
    assert h.call("pcf-policy-get", {"id": "p1"})["rules"] == {"qos": 9}
    with pytest.raises(UnknownKey):
        h.call("pcf-policy-get", {"id": "p2"})
    h.call("udr-data-write", {"path": "extra/x", "value": {"a": 1}})
    assert h.call("udr-data-read", {"path": "extra/x"})["value"] == {"a": 1}
    with pytest.raises(UnknownSubscription):
        h.call("nwdaf-data-collect", {"id": "s"})
    h.call("nwdaf-analytics-subscribe", {"id": "s"})
    for _ in range(3):
        out = h.call("nwdaf-data-collect", {"id": "s", "value": 1})
    assert out["samples"] == 3

    a, b, d = Snssai(1, 1), Snssai(2, 2), Snssai(3, 3)
    sub = SubscriberRecord("imsi-nssf", bytes(16), allowed_snssai=[b], default_snssai=d)
    h2 = CoreHarness(subscribers=[sub])
    pick = h2.call("nssf-slice-select", {"supi": sub.supi, "requested": [a.to_dict(), b.to_dict()]})
    assert pick == {"snssai": b.to_dict(), "fallback": False}
    pick = h2.call("nssf-slice-select", {"supi": sub.supi, "requested": [a.to_dict()]})
    assert pick == {"snssai": d.to_dict(), "fallback": True}


def test_subscriber_file_roundtrip(tmp_path):
    import json
    p = tmp_path / "subs.json"
    p.write_text(json.dumps([s.to_dict() for s in SUBS]))
    assert [s.supi for s in load_subscribers(p)] == [s.supi for s in SUBS]
    p.write_text(json.dumps([SUBS[0].to_dict(), SUBS[0].to_dict()]))
    with pytest.raises(ValueError):
        load_subscribers(p)


@pytest.mark.parametrize("bit", range(128))
def test_auth_soundness_under_key_perturbation(bit):
    h = harness()
    sub = SUBS[0]
    k = bytearray(sub.k)
    k[bit // 8] ^= 1 << (bit % 8)
    with pytest.raises(AuthFailed):
        h.register(sub, k=bytes(k))
    assert ue_state(h, sub.supi) == "AuthPending"


def test_auth_completeness():
    h = harness()
    for sub in SUBS:
        h.register(sub)
        assert ue_state(h, sub.supi) == "Registered"


STATELESS_CASES = [
    ("udm-get-subscriber-data", {"supi": SUBS[0].supi}),
    ("amf-service-request", {"supi": SUBS[0].supi}),
    ("amf-handover", {"supi": SUBS[0].supi, "target_gnb": 4}),
    ("nssf-slice-select", {"supi": SUBS[0].supi, "requested": []}),
    ("chf-charging-create", {"supi": SUBS[0].supi, "session_id": 3}),
    ("pcf-policy-create", {"id": "pp", "rules": {}}),
    ("udr-data-write", {"path": "q", "value": 1}),
]


@pytest.mark.parametrize("fn,req", STATELESS_CASES)
def test_handlers_are_stateless(fn, req):
    h = harness()
    h.register(SUBS[0])
    outputs, dumps = [], []
    for _ in range(2):
        store = h.store.copy()
        ctx = SimpleNamespace(store=store, registry=KVStore(), config={}, now=h.kernel.now(), r17=False,
                              rng=h.kernel.rng, call=None)
        outputs.append(BY_NAME[fn].handler(ctx, dict(req)))
        dumps.append(store.snapshot())
    assert outputs[0] == outputs[1] and dumps[0] == dumps[1]


steps = st.lists(st.tuples(st.integers(0, 3), st.sampled_from(["init", "verify_ok", "verify_bad", "complete",
                                                              "dereg", "service"])), max_size=25)


@settings(max_examples=60)
@given(steps)
def test_registration_state_machine_safety(ops):
    h = CoreHarness(r17=True, seed=1, config={"slice_max_ues": 2}, subscribers=SUBS)
    pending_rand = {}
    admitted = 0
    for idx, op in ops:
        sub = SUBS[idx]
        before = ue_state(h, sub.supi)
        was_admitted = before is not None and h.store.get_json(f"ue:{sub.supi}")["slice_admitted"]
        try:
            if op == "init":
                pending_rand[sub.supi] = h.call("amf-initial-registration", {"supi": sub.supi})["rand"]
            elif op in ("verify_ok", "verify_bad"):
                rand = pending_rand.get(sub.supi, "00" * 16)
                res = mac16(sub.k, bytes.fromhex(rand)) if op == "verify_ok" else bytes(16)
                h.call("amf-auth-initiate", {"supi": sub.supi, "phase": "verify", "res": res.hex()})
            elif op == "complete":
                h.call("udm-get-subscriber-data", {"supi": sub.supi, "complete_registration": True})
            elif op == "dereg":
                h.call("amf-deregistration", {"supi": sub.supi})
            else:
                h.call("amf-service-request", {"supi": sub.supi})
        except (WrongState, AuthFailed, SliceAdmissionRejected, NoPendingChallenge):
            assert ue_state(h, sub.supi) == before
            continue
        after = ue_state(h, sub.supi)
        prev = RegState(before) if before else RegState.DEREGISTERED
        new = RegState(after) if after else RegState.DEREGISTERED
        if op == "init":
            assert new is RegState.AUTH_PENDING
            admitted += 0 if was_admitted else 1
        else:
            assert prev == new or (prev, new) in LEGAL_TRANSITIONS
        if op == "dereg":
            admitted -= 1 if was_admitted else 0
        counters = h.store.get_json("nsacf-counters/1-1")
        count = counters["registered_ues"] if counters else 0
        assert count == admitted and 0 <= count <= 2
