"""Domain records persisted by the procedure handlers, and the AKA primitives."""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import asdict, dataclass, field
from enum import Enum

from ..faas import HandlerError

SQN_MAX = (1 << 48) - 1


class RegState(str, Enum):
    DEREGISTERED = "Deregistered"
    AUTH_PENDING = "AuthPending"
    SECURITY_PENDING = "SecurityPending"
    REGISTERED = "Registered"


# the only legal reg_state edges (plus self-loops); a fresh RegistrationRequest
# resets any context, which counts as passing through Deregistered
LEGAL_TRANSITIONS = {
    (RegState.DEREGISTERED, RegState.AUTH_PENDING),
    (RegState.AUTH_PENDING, RegState.SECURITY_PENDING),
    (RegState.SECURITY_PENDING, RegState.REGISTERED),
    (RegState.REGISTERED, RegState.DEREGISTERED),
}


# errors; ``cause`` is the byte the proxy puts in a Reject

class UnknownSubscriber(HandlerError):
    cause = 0x03


class NoPendingChallenge(HandlerError):
    cause = 0x6F


class AuthFailed(HandlerError):
    cause = 0x14


class WrongState(HandlerError):
    cause = 0x62


class NotRegistered(HandlerError):
    cause = 0x62


class SliceAdmissionRejected(HandlerError):
    cause = 0x3E


class CounterUnderflow(HandlerError):
    pass


class DuplicateSession(HandlerError):
    cause = 0x23


class UnknownSession(HandlerError):
    cause = 0x2B


class AlreadyReleased(HandlerError):
    cause = 0x2B


class UnknownChargingSession(HandlerError):
    pass


class SessionClosed(HandlerError):
    pass


class UnknownBinding(HandlerError):
    pass


class UnknownKey(HandlerError):
    pass


class UnknownSubscription(HandlerError):
    pass


class TransactionConflict(HandlerError):
    pass


@dataclass(frozen=True, order=True)
class Snssai:
    sst: int
    sd: int

    def __post_init__(self):
        if not 0 <= self.sst <= 0xFF:
            raise ValueError(f"sst out of range: {self.sst}")
        if not 0 <= self.sd <= 0xFFFFFF:
            raise ValueError(f"sd out of range: {self.sd}")

    def to_dict(self) -> dict:
        return {"sst": self.sst, "sd": self.sd}

    @classmethod
    def from_dict(cls, d: dict) -> "Snssai":
        return cls(int(d["sst"]), int(d["sd"]))

    @property
    def counter_key(self) -> str:
        return f"nsacf-counters/{self.sst}-{self.sd}"


@dataclass
class SubscriberRecord:
    supi: str
    k: bytes
    sqn: int = 0
    allowed_snssai: list[Snssai] = field(default_factory=lambda: [Snssai(1, 1)])
    default_dnn: str = "internet"
    default_snssai: Snssai | None = None

    def __post_init__(self):
        if len(self.k) != 16:
            raise ValueError("subscriber key must be 16 bytes")
        if self.default_snssai is None:
            self.default_snssai = self.allowed_snssai[0] if self.allowed_snssai else Snssai(1, 1)

    @property
    def key(self) -> str:
        return subscriber_key(self.supi)

    def to_dict(self) -> dict:
        return {
            "supi": self.supi,
            "k": self.k.hex(),
            "sqn": self.sqn,
            "allowed_snssai": [s.to_dict() for s in self.allowed_snssai],
            "default_dnn": self.default_dnn,
            "default_snssai": self.default_snssai.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SubscriberRecord":
        k = d["k"]
        if isinstance(k, str):
            if len(k) != 32:
                raise ValueError(f"{d.get('supi')}: k must be 32 hex characters")
            k = bytes.fromhex(k)
        return cls(
            supi=d["supi"],
            k=k,
            sqn=int(d.get("sqn", 0)),
            allowed_snssai=[Snssai.from_dict(s) for s in d.get("allowed_snssai", [{"sst": 1, "sd": 1}])],
            default_dnn=d.get("default_dnn", "internet"),
            default_snssai=Snssai.from_dict(d["default_snssai"]) if d.get("default_snssai") else None,
        )


def subscriber_key(supi: str) -> str:
    return f"udr/subscribers/{supi}"


def mac(k: bytes, data: bytes) -> bytes:
    """Keyed hash used for every AKA quantity: HMAC-SHA256 truncated to 16 bytes."""
    return hmac.new(k, data, hashlib.sha256).digest()[:16]


def sqn_bytes(sqn: int) -> bytes:
    return sqn.to_bytes(6, "big")


@dataclass(frozen=True)
class AuthVector:
    rand: bytes
    autn: bytes
    xres: bytes
    kseaf: bytes

    @classmethod
    def derive(cls, k: bytes, rand: bytes, sqn: int) -> "AuthVector":
        return cls(
            rand=rand,
            autn=mac(k, rand + sqn_bytes(sqn)),
            xres=mac(k, rand),
            kseaf=mac(k, rand + b"seaf"),
        )

    def to_dict(self) -> dict:
        return {name: getattr(self, name).hex() for name in ("rand", "autn", "xres", "kseaf")}

    @classmethod
    def from_dict(cls, d: dict) -> "AuthVector":
        return cls(*(bytes.fromhex(d[name]) for name in ("rand", "autn", "xres", "kseaf")))


def ue_response(k: bytes, rand: bytes) -> bytes:
    """RES computed on the UE side from its own key."""
    return mac(k, rand)


@dataclass
class UeContext:
    supi: str
    reg_state: RegState = RegState.DEREGISTERED
    serving_snssai: Snssai = Snssai(1, 1)
    kseaf: bytes | None = None
    active_pdu_ids: list[int] = field(default_factory=list)
    next_pdu_id: int = 1
    serving_gnb: int | None = None
    slice_admitted: bool = False

    @property
    def key(self) -> str:
        return f"ue:{self.supi}"

    def to_dict(self) -> dict:
        return {
            "supi": self.supi,
            "reg_state": self.reg_state.value,
            "serving_snssai": self.serving_snssai.to_dict(),
            "kseaf": self.kseaf.hex() if self.kseaf else None,
            "active_pdu_ids": list(self.active_pdu_ids),
            "next_pdu_id": self.next_pdu_id,
            "serving_gnb": self.serving_gnb,
            "slice_admitted": self.slice_admitted,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UeContext":
        return cls(
            supi=d["supi"],
            reg_state=RegState(d["reg_state"]),
            serving_snssai=Snssai.from_dict(d["serving_snssai"]),
            kseaf=bytes.fromhex(d["kseaf"]) if d.get("kseaf") else None,
            active_pdu_ids=list(d.get("active_pdu_ids", [])),
            next_pdu_id=int(d.get("next_pdu_id", 1)),
            serving_gnb=d.get("serving_gnb"),
            slice_admitted=bool(d.get("slice_admitted", False)),
        )


def pdu_key(supi: str, session_id: int) -> str:
    return f"pdu:{supi}:{session_id}"


@dataclass
class PduSession:
    session_id: int
    supi: str
    dnn: str
    snssai: Snssai
    state: str = "Active"
    charging_id: str | None = None
    binding_id: str | None = None
    qos: int = 9

    @property
    def key(self) -> str:
        return pdu_key(self.supi, self.session_id)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snssai"] = self.snssai.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PduSession":
        d = dict(d)
        d["snssai"] = Snssai.from_dict(d["snssai"])
        return cls(**d)


@dataclass
class NfProfile:
    instance_id: str
    nf_type: str
    endpoint: str
    registered_at: int
    heartbeat_at: int

    @property
    def key(self) -> str:
        return f"nrf/{self.nf_type}/{self.instance_id}"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SliceCounters:
    snssai: Snssai
    registered_ues: int
    max_ues: int

    def to_dict(self) -> dict:
        return {"snssai": self.snssai.to_dict(), "registered_ues": self.registered_ues, "max_ues": self.max_ues}

    @classmethod
    def from_dict(cls, d: dict) -> "SliceCounters":
        return cls(Snssai.from_dict(d["snssai"]), int(d["registered_ues"]), int(d["max_ues"]))


@dataclass
class ChargingSession:
    id: str
    supi: str
    session_id: int
    units: int = 0
    state: str = "Open"

    @property
    def key(self) -> str:
        return f"charging-sessions/{self.id}"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Binding:
    id: str
    supi: str
    session_id: int
    pcf_policy_id: str

    @property
    def key(self) -> str:
        return f"bsf-bindings/{self.id}"

    def to_dict(self) -> dict:
        return asdict(self)
