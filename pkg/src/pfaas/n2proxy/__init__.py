"""N2 wire codec, NAS-driven proxy and transports."""

from .codec import (
    MsgType,
    IeTag,
    N2Frame,
    NasMessage,
    CodecError,
    FrameReader,
    decode,
    encode,
    encode_message,
)
from .proxy import DISPATCH, N2Proxy, NasState, UeSession
from .transport import SimChannel, SimLink, SocketTransport, serve_connection

__all__ = [
    "MsgType", "IeTag", "N2Frame", "NasMessage", "CodecError", "FrameReader",
    "decode", "encode", "encode_message",
    "DISPATCH", "N2Proxy", "NasState", "UeSession",
    "SimChannel", "SimLink", "SocketTransport", "serve_connection",
]
