"""
Canonical message serialization.

Transcript bytes are a tagged, length-prefixed encoding of a message's
fields in declaration order:

    message  := kind-string field*
    int      := b"I" len(4) big-endian magnitude
    str/enum := b"S" len(4) utf-8
    bytes    := b"Y" len(4) raw
    bool     := b"B" 0x00|0x01
    None     := b"N"
    sequence := b"L" count(4) item*
    record   := b"D" count(4) field*      (nested dataclasses)

The same module converts messages to and from JSON-friendly dicts so
scenario files and traces can name messages and field values.
"""

from __future__ import annotations

import dataclasses
import typing
from enum import Enum
from typing import Any, Optional, Sequence, Union

from core.errors import EncodingError, ScriptError
from core.messages import MESSAGE_TYPES

_LEN = 4


def _length(n: int) -> bytes:
    return n.to_bytes(_LEN, "big")


def encode_value(value: Any) -> bytes:
    """Encode one field value."""
    if value is None:
        return b"N"
    if isinstance(value, bool):
        return b"B" + (b"\x01" if value else b"\x00")
    if isinstance(value, Enum):
        value = value.value
    if isinstance(value, int):
        if value < 0:
            raise EncodingError("negative integers are not encodable")
        raw = value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")
        return b"I" + _length(len(raw)) + raw
    if isinstance(value, str):
        raw = value.encode("utf-8")
        return b"S" + _length(len(raw)) + raw
    if isinstance(value, (bytes, bytearray)):
        return b"Y" + _length(len(value)) + bytes(value)
    if isinstance(value, (frozenset, set)):
        value = sorted(value)
    if isinstance(value, (tuple, list)):
        return b"L" + _length(len(value)) + b"".join(encode_value(v) for v in value)
    if dataclasses.is_dataclass(value):
        parts = [encode_value(getattr(value, f.name)) for f in dataclasses.fields(value)]
        return b"D" + _length(len(parts)) + b"".join(parts)
    raise EncodingError(f"cannot encode {type(value).__name__}")


def encode_message(message) -> bytes:
    """Canonical transcript bytes of a message."""
    return encode_value(message.KIND) + encode_value(
        [getattr(message, f.name) for f in dataclasses.fields(message)]
    )


def pack_ints(values: Sequence[int]) -> bytes:
    """Length-prefixed integers, used for key parameters."""
    out = []
    for value in values:
        if value < 0:
            raise EncodingError("negative integers are not encodable")
        raw = value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")
        if len(raw) > 0xFFFF:
            raise EncodingError("integer too large")
        out.append(len(raw).to_bytes(2, "big") + raw)
    return b"".join(out)


def unpack_ints(data: bytes) -> tuple[int, ...]:
    values = []
    pos = 0
    while pos < len(data):
        if pos + 2 > len(data):
            raise EncodingError("truncated length prefix")
        size = int.from_bytes(data[pos:pos + 2], "big")
        pos += 2
        if size == 0 or pos + size > len(data):
            raise EncodingError("truncated integer")
        values.append(int.from_bytes(data[pos:pos + size], "big"))
        pos += size
    return tuple(values)


# ============================================================================
# JSON VIEW
# ============================================================================

def to_plain(value: Any) -> Any:
    """Convert message fields, enums and bytes into JSON-serializable values."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(to_plain(k)): to_plain(v) for k, v in value.items()}
    if isinstance(value, (frozenset, set)):
        return sorted(to_plain(v) for v in value)
    if isinstance(value, (tuple, list)):
        return [to_plain(v) for v in value]
    return value


def message_to_dict(message) -> dict:
    return {"kind": message.KIND, "fields": to_plain(message)}


def _coerce(hint: Any, value: Any) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value)
    if origin in (tuple, list):
        item_hint = args[0] if args else Any
        return tuple(_coerce(item_hint, v) for v in value)
    if hint is bytes:
        if isinstance(value, (bytes, bytearray)):
            return bytes(value)
        if isinstance(value, str):
            return bytes.fromhex(value)
        raise EncodingError(f"expected hex string, got {type(value).__name__}")
    if isinstance(hint, type) and issubclass(hint, Enum):
        return hint(value.value if isinstance(value, Enum) else value)
    if isinstance(hint, type) and dataclasses.is_dataclass(hint):
        if isinstance(value, hint):
            return value
        return build_dataclass(hint, value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise EncodingError(f"expected integer, got {value!r}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise EncodingError(f"expected string, got {value!r}")
        return value
    return value


def build_dataclass(cls: type, data: dict) -> Any:
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = _coerce(hints[f.name], data[f.name])
    unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise EncodingError(f"{cls.__name__} has no fields {sorted(unknown)}")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise EncodingError(str(exc)) from exc


def check_field(message_cls: type, name: str) -> None:
    """Raise ScriptError unless the message declares `name`."""
    if name not in {f.name for f in dataclasses.fields(message_cls)}:
        raise ScriptError(f"{message_cls.KIND} has no field {name!r}")


def coerce_field(message_cls: type, name: str, value: Any) -> Any:
    """
    Convert a JSON value into the type of one message field.

    Raises:
        ScriptError: If the message has no such field or the value does not fit it
    """
    check_field(message_cls, name)
    hint = typing.get_type_hints(message_cls)[name]
    try:
        return _coerce(hint, value)
    except (TypeError, ValueError) as exc:
        raise ScriptError(f"bad value for {message_cls.KIND}.{name}: {exc}") from exc


def message_from_dict(data: dict) -> Any:
    """Build a message from {"kind": ..., "fields": {...}}."""
    kind = data.get("kind")
    cls = MESSAGE_TYPES.get(kind)
    if cls is None:
        raise ScriptError(f"unknown message kind {kind!r}")
    try:
        return build_dataclass(cls, data.get("fields", {}))
    except EncodingError as exc:
        raise ScriptError(f"bad {kind} message: {exc}") from exc


def message_class(kind: str) -> Optional[type]:
    return MESSAGE_TYPES.get(kind)
