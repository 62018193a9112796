"""N2 termination: per-UE NAS state machines mapped onto backend invocations."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

from ..faas import Correlation, GatewayError, Invocation
from ..statestore import decode_value, encode_value
from .codec import (
    CAUSE_INVALID_MANDATORY_INFO,
    CAUSE_OUT_OF_ORDER,
    CodecError,
    MsgType,
    N2Frame,
    NasMessage,
    decode,
    encode,
    parse_header,
)

logger = logging.getLogger(__name__)

DEFAULT_ERROR_CAUSE = 0x6F


class NasState(str, Enum):
    IDLE = "Idle"
    WAIT_AUTH_RESPONSE = "WaitAuthResponse"
    WAIT_SECURITY_COMPLETE = "WaitSecurityComplete"
    WAIT_REGISTRATION_COMPLETE = "WaitRegistrationComplete"
    REGISTERED = "Registered"


class CoreBackend(Protocol):
    def invoke(self, function: str, request: bytes, correlation: Correlation | None = None) -> Invocation:
        ...


@dataclass(frozen=True)
class Route:
    """One dispatch-table edge."""

    function: str | None
    reply: MsgType | None
    next_state: NasState
    procedure: str


DISPATCH: dict[tuple[MsgType, NasState], Route] = {
    (MsgType.REGISTRATION_REQUEST, NasState.IDLE):
        Route("amf-initial-registration", MsgType.AUTHENTICATION_REQUEST, NasState.WAIT_AUTH_RESPONSE, "registration"),
    (MsgType.AUTHENTICATION_RESPONSE, NasState.WAIT_AUTH_RESPONSE):
        Route("amf-auth-initiate", MsgType.SECURITY_MODE_COMMAND, NasState.WAIT_SECURITY_COMPLETE, "registration"),
    (MsgType.SECURITY_MODE_COMPLETE, NasState.WAIT_SECURITY_COMPLETE):
        Route("udm-get-subscriber-data", MsgType.REGISTRATION_ACCEPT, NasState.WAIT_REGISTRATION_COMPLETE, "registration"),
    (MsgType.REGISTRATION_COMPLETE, NasState.WAIT_REGISTRATION_COMPLETE):
        Route(None, None, NasState.REGISTERED, "registration"),
    (MsgType.PDU_ESTABLISH_REQUEST, NasState.REGISTERED):
        Route("smf-pdu-session-create", MsgType.PDU_ESTABLISH_ACCEPT, NasState.REGISTERED, "pdu"),
    (MsgType.DEREGISTRATION_REQUEST, NasState.REGISTERED):
        Route("amf-deregistration", MsgType.DEREGISTRATION_ACCEPT, NasState.IDLE, "deregistration"),
    (MsgType.SERVICE_REQUEST, NasState.REGISTERED):
        Route("amf-service-request", MsgType.SERVICE_ACCEPT, NasState.REGISTERED, "service"),
}


@dataclass
class UeSession:
    ue_id: int
    supi: str | None = None
    nas_state: NasState = NasState.IDLE
    pending: bool = False
    queued: deque = field(default_factory=deque)


def _snssai_dict(snssai) -> dict:
    return {"sst": snssai[0], "sd": snssai[1]}


def build_request(route: Route, session: UeSession, nas: NasMessage) -> dict:
    if route.function == "amf-initial-registration":
        return {"supi": nas.supi, "snssai": _snssai_dict(nas.snssai)}
    if route.function == "amf-auth-initiate":
        return {"supi": session.supi, "phase": "verify", "res": nas.res.hex()}
    if route.function == "udm-get-subscriber-data":
        return {"supi": session.supi, "complete_registration": True}
    if route.function == "smf-pdu-session-create":
        return {"supi": session.supi, "session_id": nas.pdu_session_id, "dnn": nas.dnn,
                "snssai": _snssai_dict(nas.snssai)}
    return {"supi": session.supi}


def build_reply(route: Route, response: dict, nas: NasMessage) -> NasMessage:
    if route.reply is MsgType.AUTHENTICATION_REQUEST:
        return NasMessage(route.reply, rand=bytes.fromhex(response["rand"]), autn=bytes.fromhex(response["autn"]))
    if route.reply is MsgType.PDU_ESTABLISH_ACCEPT:
        s = response["snssai"]
        return NasMessage(route.reply, pdu_session_id=int(response["session_id"]), dnn=response["dnn"],
                          snssai=(s["sst"], s["sd"]))
    return NasMessage(route.reply)


class N2Proxy:
    """Decodes uplinks, serializes each UE's NAS flow and invokes the backend.

    ``send_downlink(ue_id, frame_bytes)`` is called for every reply. A backend
    call reaches the core ``backend_latency_us`` after the uplink is handled.
    """

    def __init__(self, kernel, backend: CoreBackend, send_downlink: Callable[[int, bytes], None],
                 backend_latency_us: int = 0):
        self.kernel = kernel
        self.backend = backend
        self.send_downlink = send_downlink
        self.backend_latency_us = int(backend_latency_us)
        self.sessions: dict[int, UeSession] = {}
        self.stats = {"uplinks": 0, "downlinks": 0, "rejects": 0, "malformed": 0, "queued": 0, "backend_calls": 0}

    def session(self, ue_id: int) -> UeSession:
        s = self.sessions.get(ue_id)
        if s is None:
            s = self.sessions[ue_id] = UeSession(ue_id)
        return s

    def on_uplink(self, data: bytes | N2Frame) -> None:
        self.stats["uplinks"] += 1
        if isinstance(data, N2Frame):
            frame = data
        else:
            try:
                frame = decode(data)
            except CodecError as exc:
                self._on_malformed(data, exc)
                return
        session = self.session(frame.ue_id)
        if session.pending:
            self.stats["queued"] += 1
            session.queued.append(frame)
            return
        self._dispatch(session, frame)

    def _on_malformed(self, data: bytes, exc: CodecError) -> None:
        self.stats["malformed"] += 1
        logger.debug("dropping malformed uplink: %s", exc)
        try:
            _, ue_id, _ = parse_header(data)
        except CodecError:
            return
        self._reject(ue_id, CAUSE_INVALID_MANDATORY_INFO)

    def _dispatch(self, session: UeSession, frame: N2Frame) -> None:
        nas = frame.nas
        route = DISPATCH.get((nas.msg_type, session.nas_state))
        if route is None:
            self._reject(session.ue_id, CAUSE_OUT_OF_ORDER)
            return
        if route.function is None:
            session.nas_state = route.next_state
            return
        if nas.msg_type is MsgType.REGISTRATION_REQUEST:
            session.supi = nas.supi

        session.pending = True
        request = encode_value(build_request(route, session, nas))
        corr = Correlation(session.supi, route.procedure)
        if self.backend_latency_us:
            self.kernel.call_later(self.backend_latency_us, self._call_backend, session, route, nas, request, corr)
        else:
            self._call_backend(session, route, nas, request, corr)

    def _call_backend(self, session, route, nas, request, corr) -> None:
        self.stats["backend_calls"] += 1
        try:
            inv = self.backend.invoke(route.function, request, corr)
        except GatewayError as exc:
            self._on_result(session, route, nas, None, exc)
            return
        inv.add_done_callback(lambda done: self._on_result(
            session, route, nas, None if done.error else decode_value(done.response), done.error))

    def _on_result(self, session: UeSession, route: Route, nas: NasMessage, response, error) -> None:
        if error is not None:
            if route.function == "amf-initial-registration":
                session.supi = None
            self._reject(session.ue_id, getattr(error, "cause", DEFAULT_ERROR_CAUSE))
        else:
            session.nas_state = route.next_state
            if route.next_state is NasState.IDLE:
                session.supi = None
            self._send(session.ue_id, build_reply(route, response, nas))
        session.pending = False
        while session.queued and not session.pending:
            self._dispatch(session, session.queued.popleft())

    def _reject(self, ue_id: int, cause: int) -> None:
        self.stats["rejects"] += 1
        self._send(ue_id, NasMessage(MsgType.REJECT, cause=cause))

    def _send(self, ue_id: int, msg: NasMessage) -> None:
        self.stats["downlinks"] += 1
        self.send_downlink(ue_id, encode(N2Frame(ue_id, msg)))
