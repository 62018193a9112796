"""Versioned in-process key/value store.

One class backs both the transient UE/session store and the NF registry; the
two instances differ only in which key schemas they hold. Every successful
write bumps the key's version by one, and ``transact`` gives all-or-nothing
batches guarded by version checks (optimistic concurrency in place of
WATCH/MULTI/EXEC).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Iterable

MAX_KEY_BYTES = 256

# documented schemas plus the artifact-internal namespaces the handlers use
KEY_SCHEMAS: dict[str, re.Pattern] = {
    "ue": re.compile(r"^ue:[^/\s]+$"),
    "pdu": re.compile(r"^pdu:[^\s]+$"),
    "charging": re.compile(r"^charging-sessions/[^/\s]+$"),
    "nsacf": re.compile(r"^nsacf-counters/\d{1,3}-\d{1,8}$"),
    "bsf": re.compile(r"^bsf-bindings/[^/\s]+$"),
    "pcf": re.compile(r"^pcf-policies/[^/\s]+$"),
    "nwdaf": re.compile(r"^nwdaf-subs/[^/\s]+$"),
    "nrf": re.compile(r"^nrf/[a-z0-9-]+/[^/\s]+$"),
    # internal
    "auth": re.compile(r"^auth:[^/\s]+$"),
    "n4": re.compile(r"^n4:[^\s]+$"),
    "udr": re.compile(r"^udr/.+$"),
    "nwdaf-samples": re.compile(r"^nwdaf-samples/[^/\s]+$"),
    "nrf-subs": re.compile(r"^nrf-subs/[a-z0-9-]+/[^/\s]+$"),
}


class StoreError(Exception):
    pass


class KeyTooLong(StoreError):
    pass


class InvalidKey(StoreError):
    pass


def key_schema(key: str) -> str | None:
    """Name of the schema ``key`` belongs to, or None."""
    for name, pattern in KEY_SCHEMAS.items():
        if pattern.match(key):
            return name
    return None


def check_key(key: str) -> None:
    if not isinstance(key, str) or not key:
        raise InvalidKey("key must be a non-empty string")
    if len(key.encode("utf-8")) > MAX_KEY_BYTES:
        raise KeyTooLong(f"key exceeds {MAX_KEY_BYTES} bytes")


def encode_value(obj: Any) -> bytes:
    """Canonical serialization: sorted keys, no whitespace, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def decode_value(raw: bytes) -> Any:
    return json.loads(raw.decode("utf-8"))


@dataclass(frozen=True)
class Record:
    key: str
    value: bytes
    version: int

    def load(self) -> Any:
        return decode_value(self.value)


@dataclass(frozen=True)
class TxnOp:
    kind: str  # "check_version" | "put" | "delete"
    key: str
    expected_version: int | None = None
    value: bytes | None = None

    def __post_init__(self):
        if self.kind not in ("check_version", "put", "delete"):
            raise ValueError(f"unknown txn op kind {self.kind!r}")
        if self.kind == "check_version" and self.expected_version is None:
            raise ValueError("check_version requires expected_version")
        if self.kind == "put" and self.value is None:
            raise ValueError("put requires value")

    @classmethod
    def check(cls, key: str, version: int | None) -> "TxnOp":
        # version 0 means "must be absent"
        return cls("check_version", key, expected_version=0 if version is None else version)

    @classmethod
    def put(cls, key: str, value: bytes) -> "TxnOp":
        return cls("put", key, value=value)

    @classmethod
    def delete(cls, key: str) -> "TxnOp":
        return cls("delete", key)


@dataclass(frozen=True)
class TxnResult:
    committed: bool
    conflict_key: str | None = None

    def __bool__(self) -> bool:
        return self.committed


class KVStore:
    def __init__(self, name: str = "store"):
        self.name = name
        self._data: dict[str, tuple[bytes, int]] = {}

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, key: str) -> bool:
        return key in self._data

    def put(self, key: str, value: bytes) -> int:
        check_key(key)
        if not isinstance(value, (bytes, bytearray)):
            raise TypeError("value must be bytes")
        version = self._data[key][1] + 1 if key in self._data else 1
        self._data[key] = (bytes(value), version)
        return version

    def get(self, key: str) -> Record | None:
        hit = self._data.get(key)
        if hit is None:
            return None
        return Record(key, hit[0], hit[1])

    def delete(self, key: str) -> bool:
        return self._data.pop(key, None) is not None

    def version(self, key: str) -> int | None:
        hit = self._data.get(key)
        return None if hit is None else hit[1]

    def scan_prefix(self, prefix: str) -> list[Record]:
        keys = sorted(k for k in self._data if k.startswith(prefix))
        return [Record(k, *self._data[k]) for k in keys]

    def transact(self, ops: Iterable[TxnOp]) -> TxnResult:
        ops = list(ops)
        if not ops:
            raise ValueError("transact requires at least one op")
        for op in ops:
            check_key(op.key)
        for op in ops:
            if op.kind == "check_version":
                current = self.version(op.key) or 0
                if current != op.expected_version:
                    return TxnResult(False, op.key)
        for op in ops:
            if op.kind == "put":
                self.put(op.key, op.value)
            elif op.kind == "delete":
                self.delete(op.key)
        return TxnResult(True)

    # JSON helpers used by the handlers

    def put_json(self, key: str, obj: Any) -> int:
        return self.put(key, encode_value(obj))

    def get_json(self, key: str) -> Any | None:
        rec = self.get(key)
        return None if rec is None else rec.load()

    def snapshot(self) -> dict[str, tuple[bytes, int]]:
        return dict(self._data)

    def restore(self, snap: dict[str, tuple[bytes, int]]) -> None:
        self._data = dict(snap)

    def copy(self) -> "KVStore":
        other = KVStore(self.name)
        other._data = dict(self._data)
        return other

    def dump(self) -> dict[str, Any]:
        """Keys-sorted view of every record, values decoded where they are JSON."""
        out = {}
        for key in sorted(self._data):
            raw, version = self._data[key]
            try:
                value = decode_value(raw)
            except (UnicodeDecodeError, json.JSONDecodeError):
                value = {"hex": raw.hex()}
            out[key] = {"version": version, "value": value}
        return out

    def dump_json(self) -> str:
        return json.dumps(self.dump(), sort_keys=True, indent=2, ensure_ascii=False)
