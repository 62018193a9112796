"""AMF procedures.

Registration spans three NAS round trips, so its downstream calls are split
across steps: ``amf-initial-registration`` issues the challenge (through
``amf-auth-initiate`` and UDM), ``amf-auth-initiate`` in verify phase checks the
response through AUSF, and the proxy finishes with ``udm-get-subscriber-data``.
"""

from __future__ import annotations

from .auth import auth_key, load_subscriber
from .model import (
    AuthFailed,
    RegState,
    SliceAdmissionRejected,
    Snssai,
    UeContext,
    WrongState,
)


def load_ue(ctx, supi: str) -> UeContext | None:
    raw = ctx.store.get_json(f"ue:{supi}")
    return None if raw is None else UeContext.from_dict(raw)


def save_ue(ctx, ue: UeContext) -> None:
    ctx.store.put_json(ue.key, ue.to_dict())


def require_registered(ctx, supi: str) -> UeContext:
    ue = load_ue(ctx, supi)
    if ue is None or ue.reg_state is not RegState.REGISTERED:
        raise WrongState(f"{supi}: {'no context' if ue is None else ue.reg_state.value}")
    return ue


def amf_initial_registration(ctx, req):
    supi = req["supi"]
    snssai = Snssai.from_dict(req.get("snssai", {"sst": 1, "sd": 1}))
    load_subscriber(ctx, supi)
    existing = load_ue(ctx, supi)
    admitted = existing is not None and existing.slice_admitted and existing.serving_snssai == snssai

    if ctx.r17 and not admitted:
        check = yield ctx.call("nsacf-slice-availability-check", {"snssai": snssai.to_dict()})
        if not check["admitted"]:
            raise SliceAdmissionRejected(f"slice {snssai.sst}-{snssai.sd} full")
        yield ctx.call("nsacf-update-counters", {"snssai": snssai.to_dict(), "delta": 1})
        admitted = True

    ue = existing or UeContext(supi)
    ue.reg_state = RegState.AUTH_PENDING
    ue.serving_snssai = snssai
    ue.kseaf = None
    ue.serving_gnb = req.get("gnb", ue.serving_gnb)
    ue.slice_admitted = admitted
    save_ue(ctx, ue)

    challenge = yield ctx.call("amf-auth-initiate", {"supi": supi, "phase": "issue"})
    return {"supi": supi, "rand": challenge["rand"], "autn": challenge["autn"]}


def amf_auth_initiate(ctx, req):
    supi = req["supi"]
    phase = req.get("phase", "issue")
    if phase == "issue":
        vector = yield ctx.call("udm-generate-auth-data", {"supi": supi, "mode": "challenge"})
        return {"supi": supi, "rand": vector["rand"], "autn": vector["autn"]}
    if phase != "verify":
        raise ValueError(f"unknown phase {phase!r}")

    ue = load_ue(ctx, supi)
    if ue is None or ue.reg_state is not RegState.AUTH_PENDING:
        raise WrongState(f"{supi}: {'no context' if ue is None else ue.reg_state.value}")
    outcome = yield ctx.call("ausf-authenticate", {"supi": supi, "res": req["res"]})
    if outcome["result"] != "success":
        raise AuthFailed(supi)
    ue = load_ue(ctx, supi)
    ue.reg_state = RegState.SECURITY_PENDING
    ue.kseaf = bytes.fromhex(outcome["kseaf"])
    save_ue(ctx, ue)
    return {"supi": supi, "result": "SecurityModeCommand"}


def amf_deregistration(ctx, req):
    supi = req["supi"]
    load_subscriber(ctx, supi)
    ue = require_registered(ctx, supi)

    released, charging_closed = [], []
    for sid in list(ue.active_pdu_ids):
        session = yield ctx.call("smf-pdu-session-release", {"supi": supi, "session_id": sid})
        released.append(sid)
        if session.get("charging_state") == "Closed":
            charging_closed.append(session["charging_id"])

    # nothing tied to this subscriber survives the context
    for rec in ctx.store.scan_prefix(f"pdu:{supi}:"):
        ctx.store.delete(rec.key)
    for prefix in ("charging-sessions/", "bsf-bindings/"):
        for rec in ctx.store.scan_prefix(prefix):
            if rec.load().get("supi") == supi:
                ctx.store.delete(rec.key)
    ctx.store.delete(auth_key(supi))
    ctx.store.delete(ue.key)

    if ctx.r17 and ue.slice_admitted:
        yield ctx.call("nsacf-update-counters", {"snssai": ue.serving_snssai.to_dict(), "delta": -1})
    return {"supi": supi, "result": "DeregistrationAccept", "released": released, "charging_closed": charging_closed}


def amf_service_request(ctx, req):
    supi = req["supi"]
    load_subscriber(ctx, supi)
    ue = require_registered(ctx, supi)
    return {"supi": supi, "result": "ServiceAccept", "active_pdu_ids": ue.active_pdu_ids}


def amf_handover(ctx, req):
    supi = req["supi"]
    load_subscriber(ctx, supi)
    ue = require_registered(ctx, supi)
    ue.serving_gnb = req["target_gnb"]
    save_ue(ctx, ue)
    return {"supi": supi, "result": "HandoverCommand", "serving_gnb": req["target_gnb"]}


def amf_pdu_session_relay(ctx, req):
    """Forward an uplink session-management payload to the matching SMF handler."""
    supi = req["supi"]
    load_subscriber(ctx, supi)
    require_registered(ctx, supi)
    payload = dict(req.get("payload", {}))
    op = payload.pop("op", "update")
    target = {"create": "smf-pdu-session-create", "update": "smf-pdu-session-update",
              "release": "smf-pdu-session-release"}.get(op)
    if target is None:
        raise WrongState(f"unsupported relay op {op!r}")
    payload["supi"] = supi
    result = yield ctx.call(target, payload)
    return result
