"""
Data models for the downgrade simulator.

This module defines the enumerations and small value types shared by every
layer: protocol versions, cipher suites, bug flags, interception kinds and
the four taxonomy vectors used to classify an attack.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class VersionId(str, Enum):
    """Protocol versions, declared in negotiation order."""
    SSL20 = "SSL20"
    SSL30 = "SSL30"
    TLS10 = "TLS10"
    TLS11 = "TLS11"
    TLS12 = "TLS12"
    TLS13_DRAFT10 = "TLS13_DRAFT10"
    TLS13_FINAL = "TLS13_FINAL"

    @property
    def rank(self) -> int:
        return _VERSION_ORDER.index(self)

    @property
    def is_tls13(self) -> bool:
        return self in (VersionId.TLS13_DRAFT10, VersionId.TLS13_FINAL)

    def __lt__(self, other):
        if isinstance(other, VersionId):
            return self.rank < other.rank
        return NotImplemented

    def __le__(self, other):
        if isinstance(other, VersionId):
            return self.rank <= other.rank
        return NotImplemented

    def __gt__(self, other):
        if isinstance(other, VersionId):
            return self.rank > other.rank
        return NotImplemented

    def __ge__(self, other):
        if isinstance(other, VersionId):
            return self.rank >= other.rank
        return NotImplemented


_VERSION_ORDER = list(VersionId)


class KeyExchange(str, Enum):
    """Key-exchange algorithms a cipher suite can name."""
    RSA = "RSA"
    RSA_EXPORT = "RSA_EXPORT"
    DHE = "DHE"
    DHE_EXPORT = "DHE_EXPORT"
    ECDHE = "ECDHE"

    @property
    def family(self) -> str:
        """Label of the key parameters this exchange carries ("RSA", "DH" or "EC")."""
        if self in (KeyExchange.RSA, KeyExchange.RSA_EXPORT):
            return "RSA"
        if self is KeyExchange.ECDHE:
            return "EC"
        return "DH"

    @property
    def is_export(self) -> bool:
        return self in (KeyExchange.RSA_EXPORT, KeyExchange.DHE_EXPORT)


class Encryption(str, Enum):
    """Bulk encryption classes."""
    STRONG_AEAD = "STRONG_AEAD"
    CBC_BLOCK = "CBC_BLOCK"
    EXPORT_CIPHER = "EXPORT_CIPHER"
    NULL = "NULL"


class HashId(str, Enum):
    """Transcript hash classes."""
    WEAK_MD5SHA1 = "WEAK_MD5SHA1"
    STRONG = "STRONG"


class Strength(str, Enum):
    """Whether the adversary's oracles can break a key."""
    EXPORT = "EXPORT"
    STRONG = "STRONG"


class Role(str, Enum):
    CLIENT = "client"
    SERVER = "server"


class Direction(str, Enum):
    """Travel direction of a message on the simulated wire."""
    TO_SERVER = "to_server"
    TO_CLIENT = "to_client"

    @property
    def receiver(self) -> Role:
        return Role.SERVER if self is Direction.TO_SERVER else Role.CLIENT

    @property
    def sender(self) -> Role:
        return Role.CLIENT if self is Direction.TO_SERVER else Role.SERVER


class BugFlag(str, Enum):
    """Implementation bugs an endpoint can be configured with."""
    DOWNGRADE_DANCE = "DOWNGRADE_DANCE"
    ACCEPTS_SKE_IN_RSA = "ACCEPTS_SKE_IN_RSA"
    ACCEPTS_ARBITRARY_GROUPS = "ACCEPTS_ARBITRARY_GROUPS"
    FS_FALLBACK_ON_MISSING_SKE = "FS_FALLBACK_ON_MISSING_SKE"


class UpgradePolicy(str, Enum):
    """What an SMTP client does when the STARTTLS upgrade fails."""
    FAIL_OPEN = "FAIL_OPEN"
    FAIL_CLOSED = "FAIL_CLOSED"


class ProxyBehavior(str, Enum):
    """How an interception proxy talks to the real server."""
    REENCRYPT_WEAK = "REENCRYPT_WEAK"
    FORWARD_PLAINTEXT = "FORWARD_PLAINTEXT"


class ActionKind(str, Enum):
    """Interception actions recorded in a trace."""
    FORWARD = "forward"
    DROP = "drop"
    MODIFY = "modify"
    INJECT = "inject"


class AbortReason(str, Enum):
    """Why an endpoint gave up on a session."""
    PROTOCOL_ERROR = "ProtocolError"
    FINISHED_MISMATCH = "FinishedMismatch"
    DOWNGRADE_DETECTED = "DowngradeDetected"
    NO_COMMON_SUITE = "NoCommonSuite"
    NO_COMMON_GROUP = "NoCommonGroup"
    PROTOCOL_VERSION = "ProtocolVersion"
    CERT_REJECTED = "CertRejected"
    BAD_SIGNATURE = "BadSignature"
    BAD_RECORD_MAC = "BadRecordMac"
    HANDSHAKE_TIMEOUT = "HandshakeTimeout"
    UPGRADE_REFUSED = "UpgradeRefused"


class Element(str, Enum):
    """Which negotiated element an attack targets."""
    ALGORITHM = "Algorithm"
    VERSION = "Version"
    LAYER = "Layer"


class Vulnerability(str, Enum):
    """What kind of flaw an attack exploits."""
    IMPLEMENTATION = "Implementation"
    DESIGN = "Design"
    TRUST_MODEL = "Trust-model"


class Method(str, Enum):
    """How the adversary interferes with the handshake."""
    MODIFICATION = "Modification"
    DROPPING = "Dropping"
    INJECTION = "Injection"


class Damage(str, Enum):
    """Outcome severity; NONE covers benign and patched runs."""
    NONE = "None"
    WEAKENED = "Weakened"
    BROKEN = "Broken"


ACTION_METHODS = {
    ActionKind.MODIFY: Method.MODIFICATION,
    ActionKind.DROP: Method.DROPPING,
    ActionKind.INJECT: Method.INJECTION,
}


@dataclass(frozen=True)
class CipherSuite:
    """
    A cipher suite from the catalog.

    Attributes:
        suite_id: Identifier string; determines every other field
        kx: Key-exchange algorithm
        enc: Bulk encryption class
        hash: Hash used for the TLS 1.2 Finished transcript
        min_version: Oldest version the suite may be negotiated in
        max_version: Newest version the suite may be negotiated in
    """
    suite_id: str
    kx: KeyExchange
    enc: Encryption
    hash: HashId
    min_version: VersionId
    max_version: VersionId

    def __post_init__(self):
        """Validate suite consistency."""
        if self.kx.is_export and self.enc not in (Encryption.EXPORT_CIPHER, Encryption.NULL):
            raise ValueError(f"{self.suite_id}: export key exchange requires export or NULL encryption")
        if self.min_version > self.max_version:
            raise ValueError(f"{self.suite_id}: empty version range")

    @property
    def forward_secret(self) -> bool:
        return self.kx in (KeyExchange.DHE, KeyExchange.DHE_EXPORT, KeyExchange.ECDHE)

    def supports(self, version: VersionId) -> bool:
        """Whether the suite may be negotiated in the given version."""
        return self.min_version <= version <= self.max_version


@dataclass(frozen=True)
class Certificate:
    """
    Toy certificate: a subject bound to an RSA public key by an issuer.

    Attributes:
        subject: Host name the certificate is for
        issuer: Issuer name checked against a trust store
        modulus_n: RSA modulus of the certified key
        public_exp: RSA public exponent
    """
    subject: str
    issuer: str
    modulus_n: int
    public_exp: int


@dataclass(frozen=True)
class TaxonomyVector:
    """
    Classification of a downgrade attack along the four taxonomy vectors.

    Attributes:
        element: Targeted element (algorithm, version or layer)
        vulnerability: Exploited flaw (implementation, design or trust model)
        method: Adversary method (modification, dropping or injection)
        damage: Resulting damage (weakened or broken)
    """
    element: Element
    vulnerability: Vulnerability
    method: Method
    damage: Damage

    def __post_init__(self):
        """All four vectors must be populated with taxonomy values."""
        for name, enum_cls in (("element", Element), ("vulnerability", Vulnerability),
                               ("method", Method), ("damage", Damage)):
            if not isinstance(getattr(self, name), enum_cls):
                raise ValueError(f"{name} must be a {enum_cls.__name__}")


@dataclass(frozen=True)
class NegotiatedMode:
    """
    What a session ended up using.

    Attributes:
        version: Negotiated protocol version, None when no TLS ran
        suite: Negotiated cipher suite id
        group: Negotiated key-exchange group label, if any
        layer: Whether the TLS layer protected the application data
    """
    version: Optional[VersionId]
    suite: Optional[str]
    group: Optional[str] = None
    layer: bool = True
