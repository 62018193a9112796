"""Transports carrying N2 frames between RAN endpoints and the proxy."""

from __future__ import annotations

import socket
from typing import Callable

from .codec import FrameReader


class SimChannel:
    """One direction of an in-simulation link with a fixed one-way delay."""

    def __init__(self, kernel, delay_us: int, deliver: Callable[[bytes], None]):
        if delay_us < 0:
            raise ValueError("delay must be non-negative")
        self.kernel = kernel
        self.delay_us = int(delay_us)
        self.deliver = deliver
        self.sent = 0

    def send(self, data: bytes) -> None:
        self.sent += 1
        self.kernel.call_later(self.delay_us, self.deliver, bytes(data))


class SimLink:
    """Bidirectional N2 link: uplinks go to the proxy, downlinks are routed per UE."""

    def __init__(self, kernel, one_way_delay_us: int = 0):
        self.kernel = kernel
        self.one_way_delay_us = int(one_way_delay_us)
        self.proxy = None
        self._ue_handlers: dict[int, Callable[[bytes], None]] = {}
        self.uplink = SimChannel(kernel, one_way_delay_us, self._to_proxy)

    def attach_proxy(self, proxy) -> None:
        self.proxy = proxy

    def attach_ue(self, ue_id: int, on_downlink: Callable[[bytes], None]) -> None:
        self._ue_handlers[ue_id] = on_downlink

    def _to_proxy(self, data: bytes) -> None:
        self.proxy.on_uplink(data)

    def send_downlink(self, ue_id: int, data: bytes) -> None:
        handler = self._ue_handlers.get(ue_id)
        if handler is not None:
            self.kernel.call_later(self.one_way_delay_us, handler, data)


class SocketTransport:
    """N2 framing over a connected byte-stream socket."""

    def __init__(self, sock: socket.socket, recv_size: int = 4096):
        self.sock = sock
        self.recv_size = recv_size
        self.reader = FrameReader()
        self._ready: list[bytes] = []

    def send(self, frame: bytes) -> None:
        self.sock.sendall(frame)

    def recv_frame(self) -> bytes | None:
        """Block until one whole frame is available; None on orderly close."""
        while not self._ready:
            chunk = self.sock.recv(self.recv_size)
            if not chunk:
                return None
            self._ready.extend(self.reader.feed(chunk))
        return self._ready.pop(0)

    def close(self) -> None:
        self.sock.close()


def serve_connection(transport: SocketTransport, proxy_factory) -> int:
    """Run a proxy against one live connection until the peer closes.

    ``proxy_factory(send_downlink)`` returns ``(kernel, proxy)``. Each uplink is
    fed to the proxy and the simulation is run to quiescence before the next
    frame is read, so replies go out in order. Returns the uplink count.
    """
    kernel, proxy = proxy_factory(lambda ue_id, data: transport.send(data))
    count = 0
    while True:
        frame = transport.recv_frame()
        if frame is None:
            return count
        count += 1
        proxy.on_uplink(frame)
        kernel.run()
