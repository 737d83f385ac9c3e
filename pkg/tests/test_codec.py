from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.errors import EncodingError, ScriptError
from core.messages import ClientHello, KeyShare, ServerHello
from core.models import VersionId
from utils.codec import (
    coerce_field,
    encode_message,
    encode_value,
    message_from_dict,
    message_to_dict,
    pack_ints,
    to_plain,
    unpack_ints,
)


def _hello(**overrides) -> ClientHello:
    fields = dict(max_version=VersionId.TLS12, nonce=b"\x01" * 32, suites=("RSA_WITH_AES_128_CBC_SHA",))
    fields.update(overrides)
    return ClientHello(**fields)


def test_encoding_distinguishes_field_types():
    assert encode_value(1) != encode_value("1")
    assert encode_value(b"1") != encode_value("1")
    assert encode_value(None) == b"N"
    assert encode_value(True) == b"B\x01"


def test_negative_integers_are_not_encodable():
    with pytest.raises(EncodingError):
        encode_value(-1)
    with pytest.raises(EncodingError):
        pack_ints([3, -2])


def test_any_field_change_changes_the_transcript_bytes():
    base = encode_message(_hello())
    assert encode_message(_hello()) == base
    assert encode_message(_hello(suites=("RSA_WITH_NULL_MD5",))) != base
    assert encode_message(_hello(session_id=b"\x00")) != base
    assert encode_message(_hello(compressions=("null", "deflate"))) != base


def test_message_kind_is_part_of_the_encoding():
    sh = ServerHello(version=VersionId.TLS12, nonce=b"\x02" * 32, suite="RSA_WITH_AES_128_CBC_SHA")
    assert encode_message(sh).startswith(encode_value("SH"))


@given(st.lists(st.integers(min_value=0, max_value=2 ** 200), max_size=6))
def test_packed_ints_unpack(values):
    assert unpack_ints(pack_ints(values)) == tuple(values)


@pytest.mark.parametrize("data", [b"\x00", b"\x00\x05\x01", b"\x00\x00"])
def test_truncated_int_bytes_are_rejected(data):
    with pytest.raises(EncodingError):
        unpack_ints(data)


def test_json_view_is_serializable():
    hello = _hello(key_shares=(KeyShare("ec_m31", 1234),), supported_versions=(VersionId.TLS13_FINAL,))
    view = message_to_dict(hello)
    assert view["kind"] == "CH"
    assert view["fields"]["nonce"] == "01" * 32
    assert view["fields"]["supported_versions"] == ["TLS13_FINAL"]
    json.dumps(view)


def test_message_from_dict_coerces_fields():
    message = message_from_dict({
        "kind": "SH",
        "fields": {"version": "TLS12", "nonce": "ab" * 32, "suite": "RSA_WITH_AES_128_CBC_SHA"},
    })
    assert message == ServerHello(VersionId.TLS12, b"\xab" * 32, "RSA_WITH_AES_128_CBC_SHA")


def test_message_from_dict_rejects_unknown_kind_and_fields():
    with pytest.raises(ScriptError):
        message_from_dict({"kind": "NOPE", "fields": {}})
    with pytest.raises(ScriptError):
        message_from_dict({"kind": "SH", "fields": {"colour": "blue"}})


def test_coerce_field():
    assert coerce_field(ClientHello, "session_id", "00ff") == b"\x00\xff"
    assert coerce_field(ClientHello, "supported_versions", ["TLS12"]) == (VersionId.TLS12,)
    with pytest.raises(ScriptError):
        coerce_field(ClientHello, "extensions", [])
    with pytest.raises(ScriptError):
        coerce_field(ClientHello, "max_version", "TLS99")
    with pytest.raises(ScriptError):
        coerce_field(ClientHello, "suites", 5)


def test_to_plain_handles_nested_values():
    assert to_plain({"a": (b"\x01", VersionId.SSL30), "b": frozenset({"y", "x"})}) == {
        "a": ["01", "SSL30"],
        "b": ["x", "y"],
    }
