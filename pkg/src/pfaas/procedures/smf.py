"""SMF procedures: PDU session lifecycle and the N4 setup stub."""

from __future__ import annotations

from .amf import load_ue, save_ue
from .model import (
    AlreadyReleased,
    DuplicateSession,
    NotRegistered,
    PduSession,
    RegState,
    Snssai,
    UnknownSession,
    pdu_key,
)


def load_session(ctx, supi: str, session_id: int) -> PduSession:
    raw = ctx.store.get_json(pdu_key(supi, session_id))
    if raw is None:
        raise UnknownSession(f"{supi}:{session_id}")
    return PduSession.from_dict(raw)


def smf_pdu_session_create(ctx, req):
    supi = req["supi"]
    ue = load_ue(ctx, supi)
    if ue is None or ue.reg_state is not RegState.REGISTERED:
        raise NotRegistered(supi)
    sid = int(req.get("session_id") or ue.next_pdu_id)
    existing = ctx.store.get_json(pdu_key(supi, sid))
    if existing is not None and existing["state"] == "Active":
        raise DuplicateSession(f"{supi}:{sid}")
    session = PduSession(
        session_id=sid,
        supi=supi,
        dnn=req.get("dnn", "internet"),
        snssai=Snssai.from_dict(req.get("snssai", ue.serving_snssai.to_dict())),
    )

    if ctx.r17:
        charging = yield ctx.call("chf-charging-create", {"supi": supi, "session_id": sid})
        session.charging_id = charging["id"]
        binding = yield ctx.call("bsf-binding-register", {
            "supi": supi, "session_id": sid, "pcf_policy_id": f"pol-{supi}-{sid}",
        })
        session.binding_id = binding["id"]
    if ctx.config.get("n4_nested"):
        ctx.store.put_json(session.key, session.to_dict())
        yield ctx.call("smf-n4-setup", {"supi": supi, "session_id": sid})

    ctx.store.put_json(session.key, session.to_dict())
    ue = load_ue(ctx, supi)
    if sid not in ue.active_pdu_ids:
        ue.active_pdu_ids.append(sid)
    ue.next_pdu_id = max(ue.next_pdu_id, sid + 1)
    save_ue(ctx, ue)
    return session.to_dict()


def smf_pdu_session_update(ctx, req):
    supi, sid = req["supi"], int(req["session_id"])
    session = load_session(ctx, supi, sid)
    if session.state != "Active":
        raise AlreadyReleased(f"{supi}:{sid}")
    if "dnn" in req:
        session.dnn = req["dnn"]
    if "qos" in req:
        session.qos = int(req["qos"])
    ctx.store.put_json(session.key, session.to_dict())
    out = session.to_dict()
    if ctx.r17 and session.charging_id:
        charging = yield ctx.call("chf-charging-update", {"id": session.charging_id, "units": int(req.get("units", 1))})
        out["charging_units"] = charging["units"]
    return out


def smf_pdu_session_release(ctx, req):
    supi, sid = req["supi"], int(req["session_id"])
    session = load_session(ctx, supi, sid)
    if session.state != "Active":
        raise AlreadyReleased(f"{supi}:{sid}")
    session.state = "Released"
    ctx.store.put_json(session.key, session.to_dict())
    ue = load_ue(ctx, supi)
    if ue is not None and sid in ue.active_pdu_ids:
        ue.active_pdu_ids.remove(sid)
        save_ue(ctx, ue)

    out = session.to_dict()
    if ctx.r17 and session.charging_id:
        charging = yield ctx.call("chf-charging-release", {"id": session.charging_id})
        out["charging_state"] = charging["state"]
    if ctx.r17 and session.binding_id:
        yield ctx.call("bsf-binding-deregister", {"id": session.binding_id})
    return out


def smf_n4_setup(ctx, req):
    supi, sid = req["supi"], int(req["session_id"])
    load_session(ctx, supi, sid)
    key = f"n4:{supi}:{sid}"
    if key not in ctx.store:
        ctx.store.put_json(key, {"supi": supi, "session_id": sid, "pfcp": "stub"})
    return {"supi": supi, "session_id": sid, "n4": key}
