"""UDM and AUSF handlers: subscriber data and the simplified AKA exchange."""

from __future__ import annotations

import hmac

from .model import (
    SQN_MAX,
    AuthVector,
    NoPendingChallenge,
    RegState,
    SubscriberRecord,
    UeContext,
    UnknownSubscriber,
    WrongState,
    subscriber_key,
)


def auth_key(supi: str) -> str:
    return f"auth:{supi}"


def load_subscriber(ctx, supi: str) -> SubscriberRecord:
    data = ctx.store.get_json(subscriber_key(supi))
    if data is None:
        raise UnknownSubscriber(supi)
    return SubscriberRecord.from_dict(data)


def udm_generate_auth_data(ctx, req):
    supi = req["supi"]
    mode = req.get("mode", "challenge")
    sub = load_subscriber(ctx, supi)
    if mode == "challenge":
        sub.sqn = sub.sqn + 1 if sub.sqn < SQN_MAX else 1
        rand = ctx.rng("udm-rand").bytes(16)
        vector = AuthVector.derive(sub.k, rand, sub.sqn)
        ctx.store.put_json(subscriber_key(supi), sub.to_dict())
        ctx.store.put_json(auth_key(supi), {"sqn": sub.sqn, **vector.to_dict()})
    elif mode == "verify":
        rand = bytes.fromhex(req["rand"])
        pending = ctx.store.get_json(auth_key(supi))
        if pending is not None and pending["rand"] == req["rand"]:
            sqn = pending["sqn"]
        else:
            sqn = sub.sqn
        vector = AuthVector.derive(sub.k, rand, sqn)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return {"supi": supi, **vector.to_dict()}


def udm_get_subscriber_data(ctx, req):
    """Read-only profile lookup. With ``complete_registration`` set (the
    SecurityModeComplete step) it also moves the UE context to Registered."""
    supi = req["supi"]
    sub = load_subscriber(ctx, supi)
    if req.get("complete_registration"):
        raw = ctx.store.get_json(f"ue:{supi}")
        if raw is None:
            raise WrongState(f"{supi}: no UE context")
        ue = UeContext.from_dict(raw)
        if ue.reg_state is not RegState.SECURITY_PENDING:
            raise WrongState(f"{supi}: {ue.reg_state.value}")
        ue.reg_state = RegState.REGISTERED
        ctx.store.put_json(ue.key, ue.to_dict())
    return {
        "supi": supi,
        "allowed_snssai": [s.to_dict() for s in sub.allowed_snssai],
        "default_dnn": sub.default_dnn,
    }


def ausf_authenticate(ctx, req):
    supi = req["supi"]
    pending = ctx.store.get_json(auth_key(supi))
    if pending is None:
        raise NoPendingChallenge(supi)
    vector = yield ctx.call("udm-generate-auth-data", {"supi": supi, "mode": "verify", "rand": pending["rand"]})
    res = bytes.fromhex(req["res"])
    if not hmac.compare_digest(res, bytes.fromhex(vector["xres"])):
        return {"supi": supi, "result": "failure"}
    ctx.store.delete(auth_key(supi))
    return {"supi": supi, "result": "success", "kseaf": vector["kseaf"]}
