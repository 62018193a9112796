"""NRF procedures over the registry store. Heartbeats are recorded but never expire."""

from __future__ import annotations

from .model import NfProfile


def nrf_register(ctx, req):
    p = req["profile"]
    key = f"nrf/{p['nf_type']}/{p['instance_id']}"
    existing = ctx.registry.get_json(key)
    now = ctx.now
    profile = NfProfile(
        instance_id=p["instance_id"],
        nf_type=p["nf_type"],
        endpoint=p.get("endpoint", p["nf_type"]),
        registered_at=existing["registered_at"] if existing else now,
        heartbeat_at=now,
    )
    ctx.registry.put_json(key, profile.to_dict())
    for watched in req.get("subscriptions", []):
        ctx.registry.put_json(f"nrf-subs/{watched}/{p['instance_id']}", {"subscriber": p["instance_id"], "events": []})
    return profile.to_dict()


def nrf_discover(ctx, req):
    return {"profiles": [rec.load() for rec in ctx.registry.scan_prefix(f"nrf/{req['nf_type']}/")]}


def nrf_status_notify(ctx, req):
    nf_type, instance_id = req["nf_type"], req["instance_id"]
    event = {"instance_id": instance_id, "status": req.get("status", "REGISTERED"), "at": ctx.now}
    notified = 0
    for rec in ctx.registry.scan_prefix(f"nrf-subs/{nf_type}/"):
        sub = rec.load()
        sub["events"].append(event)
        ctx.registry.put_json(rec.key, sub)
        notified += 1
    return {"notified": notified}
