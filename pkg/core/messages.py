"""
Handshake, record and SMTP messages.

Every message is a frozen dataclass with a KIND tag. Field order is the
serialization order used by utils.codec, so reordering fields changes
transcript bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import ClassVar, Optional, Union

from core.models import Certificate, VersionId


@dataclass(frozen=True)
class KeyShare:
    """A TLS 1.3 key share: group label plus public value."""
    group: str
    public_value: int


@dataclass(frozen=True)
class ClientHello:
    """
    ClientHello.

    Attributes:
        max_version: Highest legacy version offered (TLS12 when supported_versions is used)
        nonce: Client nonce n_I
        suites: Offered cipher suites, client preference order
        compressions: Offered compression methods (inert)
        supported_versions: TLS 1.3 version list, newest first; empty for legacy hellos
        key_shares: TLS 1.3 key shares
        supported_groups: Groups the client accepts
        session_id: Legacy field, ignored
    """
    KIND: ClassVar[str] = "CH"
    max_version: VersionId
    nonce: bytes
    suites: tuple[str, ...]
    compressions: tuple[str, ...] = ("null",)
    supported_versions: tuple[VersionId, ...] = ()
    key_shares: tuple[KeyShare, ...] = ()
    supported_groups: tuple[str, ...] = ()
    session_id: bytes = b""


@dataclass(frozen=True)
class ServerHello:
    KIND: ClassVar[str] = "SH"
    version: VersionId
    nonce: bytes
    suite: str
    key_share: Optional[KeyShare] = None


@dataclass(frozen=True)
class HelloRetryRequest:
    KIND: ClassVar[str] = "HRR"
    version: VersionId
    suite: str
    group: str


@dataclass(frozen=True)
class ServerCertificate:
    KIND: ClassVar[str] = "SC"
    certificate: Certificate


@dataclass(frozen=True)
class ServerKeyExchange:
    """Signed ephemeral key parameters; algo_label says how to read param_bytes."""
    KIND: ClassVar[str] = "SKE"
    param_bytes: bytes
    algo_label: str
    signature: bytes


@dataclass(frozen=True)
class ServerHelloDone:
    KIND: ClassVar[str] = "SHD"


@dataclass(frozen=True)
class ClientKeyExchange:
    """Client share: a DH public value, or an RSA-wrapped premaster secret."""
    KIND: ClassVar[str] = "CKE"
    param_bytes: bytes
    algo_label: str


@dataclass(frozen=True)
class ChangeCipherSpec:
    KIND: ClassVar[str] = "CCS"


@dataclass(frozen=True)
class CertificateVerify:
    KIND: ClassVar[str] = "CV"
    signature: bytes


@dataclass(frozen=True)
class ClientFinished:
    KIND: ClassVar[str] = "CF"
    mac: bytes


@dataclass(frozen=True)
class ServerFinished:
    KIND: ClassVar[str] = "SF"
    mac: bytes


@dataclass(frozen=True)
class AppData:
    KIND: ClassVar[str] = "AppData"
    ciphertext: bytes
    tag: bytes


# SMTP

@dataclass(frozen=True)
class Ehlo:
    KIND: ClassVar[str] = "EHLO"
    domain: str


@dataclass(frozen=True)
class Capabilities:
    KIND: ClassVar[str] = "CAPS"
    capabilities: tuple[str, ...]


@dataclass(frozen=True)
class StartTls:
    KIND: ClassVar[str] = "STARTTLS"
    verb: str = "STARTTLS"


@dataclass(frozen=True)
class SmtpReply:
    KIND: ClassVar[str] = "REPLY"
    code: int
    text: str


@dataclass(frozen=True)
class PlainMail:
    KIND: ClassVar[str] = "MAIL"
    payload: bytes


# Control inputs; never travel on the wire

@dataclass(frozen=True)
class Start:
    KIND: ClassVar[str] = "Start"


@dataclass(frozen=True)
class Timeout:
    KIND: ClassVar[str] = "Timeout"


START = Start()
TIMEOUT = Timeout()


HandshakeMessage = Union[
    ClientHello, ServerHello, HelloRetryRequest, ServerCertificate, ServerKeyExchange,
    ServerHelloDone, ClientKeyExchange, ChangeCipherSpec, CertificateVerify,
    ClientFinished, ServerFinished, AppData,
]
SmtpMessage = Union[Ehlo, Capabilities, StartTls, SmtpReply, PlainMail]
Message = Union[HandshakeMessage, SmtpMessage]

MESSAGE_TYPES: dict[str, type] = {cls.KIND: cls for cls in (
    ClientHello, ServerHello, HelloRetryRequest, ServerCertificate, ServerKeyExchange,
    ServerHelloDone, ClientKeyExchange, ChangeCipherSpec, CertificateVerify,
    ClientFinished, ServerFinished, AppData,
    Ehlo, Capabilities, StartTls, SmtpReply, PlainMail,
)}

SMTP_KINDS = frozenset({"EHLO", "CAPS", "STARTTLS", "REPLY", "MAIL"})

# Kinds that never enter a handshake transcript
NON_TRANSCRIPT_KINDS = frozenset({"CCS", "AppData"}) | SMTP_KINDS


def field_names(message) -> tuple[str, ...]:
    return tuple(f.name for f in fields(message))


def smtp_line(message: SmtpMessage) -> str:
    """Render an SMTP message as the text line a trace shows."""
    if isinstance(message, Ehlo):
        return f"EHLO {message.domain}"
    if isinstance(message, Capabilities):
        return "250 " + " ".join(message.capabilities)
    if isinstance(message, StartTls):
        return message.verb
    if isinstance(message, SmtpReply):
        return f"{message.code} {message.text}"
    if isinstance(message, PlainMail):
        return "DATA " + message.payload.decode("utf-8", errors="replace").replace("\r\n", " | ")
    raise TypeError(f"not an SMTP message: {type(message).__name__}")
