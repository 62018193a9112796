"""PCF policies, raw UDR access and NSSF slice selection."""

from __future__ import annotations

from .auth import load_subscriber
from .model import Snssai, UnknownKey


def pcf_policy_create(ctx, req):
    policy_id = req["id"]
    policy = {"id": policy_id, "supi": req.get("supi"), "rules": req.get("rules", {})}
    ctx.store.put_json(f"pcf-policies/{policy_id}", policy)
    return policy


def pcf_policy_get(ctx, req):
    policy = ctx.store.get_json(f"pcf-policies/{req['id']}")
    if policy is None:
        raise UnknownKey(f"pcf-policies/{req['id']}")
    return policy


def udr_key(path: str) -> str:
    return path if path.startswith("udr/") else f"udr/{path}"


def udr_data_read(ctx, req):
    key = udr_key(req["path"])
    value = ctx.store.get_json(key)
    if value is None:
        raise UnknownKey(key)
    return {"path": key, "value": value}


def udr_data_write(ctx, req):
    key = udr_key(req["path"])
    version = ctx.store.put_json(key, req["value"])
    return {"path": key, "version": version}


def nssf_slice_select(ctx, req):
    sub = load_subscriber(ctx, req["supi"])
    allowed = set(sub.allowed_snssai)
    for raw in req.get("requested", []):
        s = Snssai.from_dict(raw)
        if s in allowed:
            return {"snssai": s.to_dict(), "fallback": False}
    return {"snssai": sub.default_snssai.to_dict(), "fallback": True}
