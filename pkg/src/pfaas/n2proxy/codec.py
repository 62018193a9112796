"""Mini-N2 wire format.

Frame header (10 bytes, big-endian)::

    4E 32 | 01 | msg_type | ue_id (u32) | payload_len (u16) | payload

The payload is a run of NAS information elements, each ``tag (u8) | len (u16) |
value``, serialized in ascending tag order. Decoding accepts only that
canonical form, so ``encode(decode(b)) == b`` for every accepted ``b``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

MAGIC = b"\x4e\x32"
VERSION = 0x01
HEADER = struct.Struct(">2sBBIH")
HEADER_LEN = HEADER.size
MAX_PAYLOAD = 0xFFFF


class MsgType(IntEnum):
    REGISTRATION_REQUEST = 0x01
    AUTHENTICATION_REQUEST = 0x02
    AUTHENTICATION_RESPONSE = 0x03
    SECURITY_MODE_COMMAND = 0x04
    SECURITY_MODE_COMPLETE = 0x05
    REGISTRATION_ACCEPT = 0x06
    REGISTRATION_COMPLETE = 0x07
    PDU_ESTABLISH_REQUEST = 0x08
    PDU_ESTABLISH_ACCEPT = 0x09
    DEREGISTRATION_REQUEST = 0x0A
    DEREGISTRATION_ACCEPT = 0x0B
    SERVICE_REQUEST = 0x0C
    SERVICE_ACCEPT = 0x0D
    REJECT = 0x0E


class IeTag(IntEnum):
    SUPI = 0x01
    RAND = 0x02
    AUTN = 0x03
    RES = 0x04
    SNSSAI = 0x05
    PDU_SESSION_ID = 0x06
    DNN = 0x07
    CAUSE = 0x08


# IE tag -> attribute name on NasMessage
IE_FIELDS = {
    IeTag.SUPI: "supi",
    IeTag.RAND: "rand",
    IeTag.AUTN: "autn",
    IeTag.RES: "res",
    IeTag.SNSSAI: "snssai",
    IeTag.PDU_SESSION_ID: "pdu_session_id",
    IeTag.DNN: "dnn",
    IeTag.CAUSE: "cause",
}
FIXED_LENGTHS = {IeTag.RAND: 16, IeTag.AUTN: 16, IeTag.RES: 16, IeTag.SNSSAI: 4, IeTag.PDU_SESSION_ID: 1, IeTag.CAUSE: 1}

MANDATORY_IES = {
    MsgType.REGISTRATION_REQUEST: (IeTag.SUPI, IeTag.SNSSAI),
    MsgType.AUTHENTICATION_REQUEST: (IeTag.RAND, IeTag.AUTN),
    MsgType.AUTHENTICATION_RESPONSE: (IeTag.RES,),
    MsgType.PDU_ESTABLISH_REQUEST: (IeTag.SNSSAI, IeTag.PDU_SESSION_ID, IeTag.DNN),
    MsgType.REJECT: (IeTag.CAUSE,),
}

# downlink cause used when an uplink is not legal in the current NAS state
CAUSE_OUT_OF_ORDER = 0x5A
# cause for an uplink frame that failed to decode
CAUSE_INVALID_MANDATORY_INFO = 0x60


class CodecError(ValueError):
    pass


class BadMagic(CodecError):
    pass


class BadVersion(CodecError):
    pass


class TruncatedFrame(CodecError):
    pass


class UnknownMsgType(CodecError):
    pass


class MissingMandatoryIe(CodecError):
    pass


class DuplicateIe(CodecError):
    pass


class PayloadTooLarge(CodecError):
    pass


class UnknownIe(CodecError):
    pass


class BadIeLength(CodecError):
    pass


class NonCanonicalOrder(CodecError):
    pass


class TrailingBytes(CodecError):
    pass


@dataclass(frozen=True)
class NasMessage:
    msg_type: MsgType
    supi: str | None = None
    rand: bytes | None = None
    autn: bytes | None = None
    res: bytes | None = None
    snssai: tuple[int, int] | None = None
    pdu_session_id: int | None = None
    dnn: str | None = None
    cause: int | None = None

    def present(self) -> list[IeTag]:
        return [tag for tag, name in IE_FIELDS.items() if getattr(self, name) is not None]

    def to_dict(self) -> dict:
        out = {"msg_type": self.msg_type.name}
        for tag in self.present():
            value = getattr(self, IE_FIELDS[tag])
            if isinstance(value, bytes):
                value = value.hex()
            elif isinstance(value, tuple):
                value = {"sst": value[0], "sd": value[1]}
            out[IE_FIELDS[tag]] = value
        return out


@dataclass(frozen=True)
class N2Frame:
    ue_id: int
    nas: NasMessage
    version: int = field(default=VERSION, compare=False)

    @property
    def msg_type(self) -> MsgType:
        return self.nas.msg_type


def _encode_ie(tag: IeTag, value) -> bytes:
    if tag in (IeTag.SUPI, IeTag.DNN):
        raw = value.encode("utf-8")
    elif tag is IeTag.SNSSAI:
        sst, sd = value
        if not (0 <= sst <= 0xFF and 0 <= sd <= 0xFFFFFF):
            raise CodecError(f"snssai out of range: {value}")
        raw = bytes([sst]) + sd.to_bytes(3, "big")
    elif tag in (IeTag.PDU_SESSION_ID, IeTag.CAUSE):
        if not 0 <= value <= 0xFF:
            raise CodecError(f"{tag.name} out of range: {value}")
        raw = bytes([value])
    else:
        raw = bytes(value)
    expected = FIXED_LENGTHS.get(tag)
    if expected is not None and len(raw) != expected:
        raise BadIeLength(f"{tag.name}: {len(raw)} bytes, expected {expected}")
    if len(raw) > 0xFFFF:
        raise PayloadTooLarge(f"{tag.name} value of {len(raw)} bytes")
    return struct.pack(">BH", tag, len(raw)) + raw


def _decode_ie(tag: IeTag, raw: bytes):
    expected = FIXED_LENGTHS.get(tag)
    if expected is not None and len(raw) != expected:
        raise BadIeLength(f"{tag.name}: {len(raw)} bytes, expected {expected}")
    if tag in (IeTag.SUPI, IeTag.DNN):
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CodecError(f"{tag.name} is not UTF-8") from exc
    if tag is IeTag.SNSSAI:
        return raw[0], int.from_bytes(raw[1:], "big")
    if tag in (IeTag.PDU_SESSION_ID, IeTag.CAUSE):
        return raw[0]
    return bytes(raw)


def check_mandatory(msg: NasMessage) -> None:
    missing = [t.name for t in MANDATORY_IES.get(msg.msg_type, ()) if getattr(msg, IE_FIELDS[t]) is None]
    if missing:
        raise MissingMandatoryIe(f"{msg.msg_type.name} lacks {', '.join(missing)}")


def encode_payload(msg: NasMessage) -> bytes:
    check_mandatory(msg)
    payload = b"".join(_encode_ie(tag, getattr(msg, IE_FIELDS[tag])) for tag in msg.present())
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes")
    return payload


def encode(frame: N2Frame) -> bytes:
    if not 0 <= frame.ue_id <= 0xFFFFFFFF:
        raise CodecError(f"ue_id out of range: {frame.ue_id}")
    payload = encode_payload(frame.nas)
    return HEADER.pack(MAGIC, VERSION, int(frame.nas.msg_type), frame.ue_id, len(payload)) + payload


def encode_message(ue_id: int, msg_type: MsgType, **ies) -> bytes:
    return encode(N2Frame(ue_id, NasMessage(MsgType(msg_type), **ies)))


def parse_header(data: bytes) -> tuple[int, int, int]:
    """Validate the fixed header; returns (msg_type byte, ue_id, payload_len)."""
    if len(data) < HEADER_LEN:
        raise TruncatedFrame(f"{len(data)} bytes, header needs {HEADER_LEN}")
    magic, version, msg_type, ue_id, payload_len = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(magic.hex())
    if version != VERSION:
        raise BadVersion(f"version {version}")
    return msg_type, ue_id, payload_len


def decode(data: bytes) -> N2Frame:
    data = bytes(data)
    msg_type_byte, ue_id, payload_len = parse_header(data)
    try:
        msg_type = MsgType(msg_type_byte)
    except ValueError:
        raise UnknownMsgType(f"0x{msg_type_byte:02X}") from None
    end = HEADER_LEN + payload_len
    if len(data) < end:
        raise TruncatedFrame(f"payload_len {payload_len}, only {len(data) - HEADER_LEN} bytes")
    if len(data) > end:
        raise TrailingBytes(f"{len(data) - end} bytes after frame")

    values = {}
    pos, last_tag = HEADER_LEN, 0
    while pos < end:
        if end - pos < 3:
            raise TruncatedFrame("IE header cut short")
        tag_byte, length = struct.unpack_from(">BH", data, pos)
        pos += 3
        if pos + length > end:
            raise TruncatedFrame(f"IE 0x{tag_byte:02X} overruns payload")
        try:
            tag = IeTag(tag_byte)
        except ValueError:
            raise UnknownIe(f"0x{tag_byte:02X}") from None
        if IE_FIELDS[tag] in values:
            raise DuplicateIe(tag.name)
        if tag_byte < last_tag:
            raise NonCanonicalOrder(f"{tag.name} after tag 0x{last_tag:02X}")
        values[IE_FIELDS[tag]] = _decode_ie(tag, data[pos:pos + length])
        last_tag = tag_byte
        pos += length

    msg = NasMessage(msg_type, **values)
    check_mandatory(msg)
    return N2Frame(ue_id, msg)


class FrameReader:
    """Reassembles whole frames from a byte stream."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, chunk: bytes) -> list[bytes]:
        self._buf.extend(chunk)
        frames = []
        while len(self._buf) >= HEADER_LEN:
            parse_header(self._buf[:HEADER_LEN])
            total = HEADER_LEN + int.from_bytes(self._buf[8:10], "big")
            if len(self._buf) < total:
                break
            frames.append(bytes(self._buf[:total]))
            del self._buf[:total]
        return frames

    @property
    def buffered(self) -> int:
        return len(self._buf)

