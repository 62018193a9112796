"""Release 17 NFs: slice admission (NSACF), charging (CHF), binding (BSF), analytics (NWDAF)."""

from __future__ import annotations

from ..statestore import TxnOp, encode_value
from .model import (
    Binding,
    ChargingSession,
    CounterUnderflow,
    SessionClosed,
    SliceCounters,
    Snssai,
    TransactionConflict,
    UnknownBinding,
    UnknownChargingSession,
    UnknownSubscription,
)

DEFAULT_MAX_UES = 1_000_000


def slice_limit(ctx) -> int:
    cfg = ctx.config
    return int(cfg.get("slice_max_ues", cfg.get("max_ues", DEFAULT_MAX_UES)))


def read_counters(ctx, snssai: Snssai) -> tuple[SliceCounters, int]:
    rec = ctx.store.get(snssai.counter_key)
    if rec is None:
        return SliceCounters(snssai, 0, slice_limit(ctx)), 0
    return SliceCounters.from_dict(rec.load()), rec.version


def nsacf_slice_availability_check(ctx, req):
    counters, _ = read_counters(ctx, Snssai.from_dict(req["snssai"]))
    return {
        "admitted": counters.registered_ues < counters.max_ues,
        "registered_ues": counters.registered_ues,
        "max_ues": counters.max_ues,
    }


def nsacf_update_counters(ctx, req):
    snssai = Snssai.from_dict(req["snssai"])
    delta = int(req["delta"])
    if delta not in (1, -1):
        raise ValueError("delta must be +1 or -1")
    for _ in range(2):
        counters, version = read_counters(ctx, snssai)
        new_count = counters.registered_ues + delta
        if new_count < 0:
            raise CounterUnderflow(f"slice {snssai.sst}-{snssai.sd} already at 0")
        if new_count > counters.max_ues:
            raise ValueError(f"slice {snssai.sst}-{snssai.sd} at capacity")
        counters.registered_ues = new_count
        result = ctx.store.transact([
            TxnOp.check(snssai.counter_key, version),
            TxnOp.put(snssai.counter_key, encode_value(counters.to_dict())),
        ])
        if result.committed:
            return {"snssai": snssai.to_dict(), "registered_ues": new_count}
    raise TransactionConflict(snssai.counter_key)


def load_charging(ctx, charging_id: str) -> ChargingSession:
    raw = ctx.store.get_json(f"charging-sessions/{charging_id}")
    if raw is None:
        raise UnknownChargingSession(charging_id)
    return ChargingSession(**raw)


def chf_charging_create(ctx, req):
    supi, sid = req["supi"], int(req["session_id"])
    session = ChargingSession(id=f"chg-{supi}-{sid}", supi=supi, session_id=sid)
    ctx.store.put_json(session.key, session.to_dict())
    return session.to_dict()


def chf_charging_update(ctx, req):
    session = load_charging(ctx, req["id"])
    if session.state != "Open":
        raise SessionClosed(session.id)
    units = int(req.get("units", 0))
    if units < 0:
        raise ValueError("units must be non-negative")
    session.units += units
    ctx.store.put_json(session.key, session.to_dict())
    return session.to_dict()


def chf_charging_release(ctx, req):
    session = load_charging(ctx, req["id"])
    if session.state != "Open":
        raise SessionClosed(session.id)
    session.state = "Closed"
    ctx.store.put_json(session.key, session.to_dict())
    return session.to_dict()


def bsf_binding_register(ctx, req):
    if not req.get("pcf_policy_id"):
        raise ValueError("pcf_policy_id required")
    supi, sid = req["supi"], int(req["session_id"])
    binding = Binding(id=f"bind-{supi}-{sid}", supi=supi, session_id=sid, pcf_policy_id=req["pcf_policy_id"])
    ctx.store.put_json(binding.key, binding.to_dict())
    return binding.to_dict()


def bsf_binding_discover(ctx, req):
    if "id" in req:
        raw = ctx.store.get_json(f"bsf-bindings/{req['id']}")
        if raw is None:
            raise UnknownBinding(req["id"])
        return {"binding": raw}
    for rec in ctx.store.scan_prefix("bsf-bindings/"):
        b = rec.load()
        if b["supi"] == req["supi"]:
            return {"binding": b}
    return {"binding": None}


def bsf_binding_deregister(ctx, req):
    return {"existed": ctx.store.delete(f"bsf-bindings/{req['id']}")}


def nwdaf_analytics_subscribe(ctx, req):
    sub_id = req["id"]
    ctx.store.put_json(f"nwdaf-subs/{sub_id}", {"id": sub_id, "event": req.get("event", "load")})
    ctx.store.put_json(f"nwdaf-samples/{sub_id}", [])
    return {"id": sub_id}


def nwdaf_data_collect(ctx, req):
    sub_id = req["id"]
    if f"nwdaf-subs/{sub_id}" not in ctx.store:
        raise UnknownSubscription(sub_id)
    samples = ctx.store.get_json(f"nwdaf-samples/{sub_id}") or []
    samples.append({"at": ctx.now, "value": req.get("value")})
    ctx.store.put_json(f"nwdaf-samples/{sub_id}", samples)
    return {"id": sub_id, "samples": len(samples)}
