"""
Client and server handshake state machines.

Both sides are pure step functions:

    client_step(state, config, incoming) -> (state, outgoing)
    server_step(state, config, incoming) -> (state, outgoing)

covering SSL 2.0, SSL 3.0, TLS 1.0-1.2 (RSA, DHE, ECDHE and the export
variants), TLS 1.3 draft-10 and TLS 1.3 final. Protocol failures never
raise; the endpoint moves to ABORTED with an AbortReason.

Flows:
    SSL 2.0      CH -> SH, SC -> CKE, AppData                (no Finished)
    SSL 3.0-1.2  CH -> SH, SC, [SKE], SHD -> CKE, CCS, CF -> CCS, SF -> AppData
    TLS 1.3      CH -> [HRR -> CH] -> SH, SC, CV, SF -> CF, AppData
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

from core import catalog
from core.config import APP_DATA, BREAKABILITY, DEFAULT_GROUPS, MISREAD_PARAMS, SENTINEL, SESSION
from core.crypto_model import (
    EMPTY_COLLISIONS,
    CollisionTable,
    DhGroup,
    DhKeyPair,
    DhPublicValue,
    RsaPublicKey,
    RsaToyKey,
    SecretBundle,
    derive_secrets,
    derive_seed,
    dh_keygen,
    dh_shared_secret,
    finished_mac,
    generate_rsa_key,
    int_to_bytes,
    byte_length,
    misread_rsa_key,
    open_record,
    rsa_sign,
    rsa_unwrap_pms,
    rsa_verify,
    rsa_wrap_pms,
    seal_record,
    seeded_rng,
    transcript_hash,
    uniform_int,
    verify_mac,
)
from core.errors import ConfigError, EncodingError, GroupError, KeyParamError, NotFound
from core.messages import (
    AppData,
    CertificateVerify,
    ChangeCipherSpec,
    ClientFinished,
    ClientHello,
    ClientKeyExchange,
    HelloRetryRequest,
    KeyShare,
    ServerCertificate,
    ServerFinished,
    ServerHello,
    ServerHelloDone,
    ServerKeyExchange,
    Start,
    Timeout,
)
from core.models import (
    AbortReason,
    BugFlag,
    Certificate,
    HashId,
    KeyExchange,
    Role,
    Strength,
    VersionId,
)
from utils.codec import encode_message, pack_ints, unpack_ints

logger = logging.getLogger(__name__)

CCS = ChangeCipherSpec()

# Purposes mixed into per-endpoint seeds
_NONCE, _SHARE, _PMS, _EPHEMERAL = 1, 2, 3, 4


class Phase(str, Enum):
    """Handshake phases of both endpoints."""
    START = "START"
    WAIT_SH = "WAIT_SH"
    WAIT_SC = "WAIT_SC"
    WAIT_SKE = "WAIT_SKE"
    WAIT_CV = "WAIT_CV"
    WAIT_SF = "WAIT_SF"
    WAIT_CH = "WAIT_CH"
    WAIT_CKE = "WAIT_CKE"
    WAIT_CF = "WAIT_CF"
    CONNECTED = "CONNECTED"
    ABORTED = "ABORTED"


class SentinelCheck(str, Enum):
    OK = "ok"
    DOWNGRADE_DETECTED = "DowngradeDetected"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class HelloRetryPolicy:
    """
    How an endpoint hashes across a HelloRetryRequest.

    Attributes:
        restart_transcript_on_hrr: True drops the first hello from the transcript
    """
    restart_transcript_on_hrr: bool

    @classmethod
    def for_version(cls, version: VersionId) -> HelloRetryPolicy:
        return cls(catalog.VERSION_FEATURES[version]["restart_transcript_on_hrr"])


@dataclass(frozen=True)
class EndpointConfig:
    """
    Static configuration of one endpoint.

    Attributes:
        role: Client or server
        version_range: (min, max) supported versions
        suites_by_preference: Cipher suite ids, most preferred first
        groups_by_preference: Group labels, most preferred first
        bug_flags: Implementation bugs this endpoint has
        rsa_key: Long-term RSA key (servers)
        certificate: Certificate presented (servers)
        trust_store: Issuers the endpoint accepts (clients)
    """
    role: Role
    version_range: tuple[VersionId, VersionId]
    suites_by_preference: tuple[str, ...]
    groups_by_preference: tuple[str, ...] = DEFAULT_GROUPS
    bug_flags: frozenset[BugFlag] = frozenset()
    rsa_key: Optional[RsaToyKey] = None
    certificate: Optional[Certificate] = None
    trust_store: frozenset[str] = frozenset()

    def __post_init__(self):
        """Validate configuration."""
        if not self.suites_by_preference:
            raise ConfigError(f"{self.role.value}: suite preference list is empty")
        if not self.groups_by_preference:
            raise ConfigError(f"{self.role.value}: group preference list is empty")
        if self.version_range[0] > self.version_range[1]:
            raise ConfigError(f"{self.role.value}: minimum version above maximum")
        for suite_id in self.suites_by_preference:
            catalog.get_cipher_suite(suite_id)
        for label in self.groups_by_preference:
            catalog.get_group(label)
        if self.role is Role.SERVER and (self.rsa_key is None or self.certificate is None):
            raise ConfigError("server needs an RSA key and a certificate")

    @property
    def min_version(self) -> VersionId:
        return self.version_range[0]

    @property
    def max_version(self) -> VersionId:
        return self.version_range[1]

    @property
    def hello_retry_policy(self) -> HelloRetryPolicy:
        return HelloRetryPolicy.for_version(self.max_version)

    @property
    def sentinel_aware(self) -> bool:
        return catalog.VERSION_FEATURES[self.max_version]["sentinel"]

    def has_flag(self, flag: BugFlag) -> bool:
        return flag in self.bug_flags


@dataclass(frozen=True)
class EffectiveKey:
    """
    Server key parameters as the receiving endpoint reads them.

    Attributes:
        algo_label: Label the reader expected ("RSA", "DH" or "EC")
        strength: Effective strength of the key
        dh: DH public value, for DH/EC readings
        rsa: RSA public key, for RSA readings
        claimed_modulus: First integer in the bytes, the size the sender claimed
        misread: Whether the bytes were read under a different label than sent
    """
    algo_label: str
    strength: Strength
    dh: Optional[DhPublicValue] = None
    rsa: Optional[RsaPublicKey] = None
    claimed_modulus: int = 0
    misread: bool = False


@dataclass(frozen=True)
class EndpointState:
    """
    Dynamic state of one endpoint.

    The transcript only grows, except that a draft-10 hello retry restarts it.
    Secrets are set once the key exchange has been processed.
    """
    role: Role
    seed: int
    app_payload: bytes = b""
    phase: Phase = Phase.START
    transcript: tuple[bytes, ...] = ()
    version: Optional[VersionId] = None
    suite: Optional[str] = None
    group: Optional[str] = None
    secrets: Optional[SecretBundle] = None
    aborted: Optional[AbortReason] = None
    abort_detail: str = ""
    attempt: int = 0
    offered_max: Optional[VersionId] = None
    offered_versions: tuple[VersionId, ...] = ()
    offered_suites: tuple[str, ...] = ()
    client_nonce: bytes = b""
    server_nonce: bytes = b""
    dh_keypair: Optional[DhKeyPair] = None
    server_key: Optional[EffectiveKey] = None
    peer_certificate: Optional[Certificate] = None
    ephemeral_rsa: Optional[RsaToyKey] = None
    ske_bytes: bytes = b""
    last_hello: Optional[ClientHello] = None
    hello_retried: bool = False
    cv_signature: bytes = b""
    cv_transcript_length: int = 0
    fell_back: bool = False
    sent_records: int = 0
    received_app: tuple[bytes, ...] = ()

    @property
    def connected(self) -> bool:
        return self.phase is Phase.CONNECTED

    @property
    def waiting(self) -> bool:
        return self.phase not in (Phase.CONNECTED, Phase.ABORTED, Phase.START)


def new_client_state(seed: int, app_payload: Optional[bytes] = None) -> EndpointState:
    payload = APP_DATA["default_payload"].encode() if app_payload is None else app_payload
    return EndpointState(role=Role.CLIENT, seed=seed, app_payload=payload)


def new_server_state(seed: int) -> EndpointState:
    return EndpointState(role=Role.SERVER, seed=seed, phase=Phase.WAIT_CH)


def _nonce(seed: int, attempt: int) -> bytes:
    return seeded_rng(seed, _NONCE, attempt).bytes(SESSION["nonce_bytes"])


def _abort(state: EndpointState, reason: AbortReason, detail: str) -> tuple[EndpointState, list]:
    logger.info("%s aborts: %s (%s)", state.role.value, reason.value, detail)
    return replace(state, phase=Phase.ABORTED, aborted=reason, abort_detail=detail), []


def _append(state: EndpointState, *messages) -> tuple[bytes, ...]:
    return state.transcript + tuple(encode_message(m) for m in messages)


def certificate_key(cert: Certificate) -> RsaPublicKey:
    return RsaPublicKey(cert.modulus_n, cert.public_exp)


def _random_pms(seed: int, attempt: int, modulus: int) -> bytes:
    value = uniform_int(seeded_rng(seed, _PMS, attempt), 2, modulus - 1)
    return int_to_bytes(value, byte_length(modulus))


def _seal_app(state: EndpointState, key: bytes) -> AppData:
    suite = catalog.get_cipher_suite(state.suite)
    ciphertext, tag = seal_record(key, state.app_payload, suite.enc, state.sent_records)
    return AppData(ciphertext=ciphertext, tag=tag)


# ============================================================================
# SENTINEL
# ============================================================================

def embed_sentinel(nonce: bytes, version: VersionId) -> bytes:
    """Overwrite the last bytes of a server nonce with the sentinel for `version`."""
    trailer = SENTINEL["tag"] + bytes([catalog.version_code(version)])
    return nonce[:-SENTINEL["length"]] + trailer


def read_sentinel(nonce: bytes) -> Optional[VersionId]:
    trailer = nonce[-SENTINEL["length"]:]
    if trailer[:-1] != SENTINEL["tag"]:
        return None
    return catalog.version_from_code(trailer[-1])


def check_sentinel(server_nonce: bytes, client_offered_max: VersionId, *, client_aware: bool = True) -> SentinelCheck:
    """
    Compare the version a server signalled in its nonce with what the client offered.

    Args:
        server_nonce: n_R as received
        client_offered_max: Highest version the client actually offered
        client_aware: Whether the client implements the sentinel check

    Returns:
        DOWNGRADE_DETECTED iff the sentinel shows a lower maximum than offered
    """
    if not client_aware:
        return SentinelCheck.SKIPPED
    signalled = read_sentinel(server_nonce)
    if signalled is not None and signalled < client_offered_max:
        return SentinelCheck.DOWNGRADE_DETECTED
    return SentinelCheck.OK


# ============================================================================
# KEY PARAMETERS
# ============================================================================

def encode_dh_params(public: DhPublicValue) -> bytes:
    group = public.group
    return pack_ints((group.prime_p, group.generator_g, public.public_value))


def encode_rsa_params(key: Union[RsaPublicKey, RsaToyKey]) -> bytes:
    return pack_ints((key.modulus_n, key.public_exp))


def _clamp(value: int, prime: int) -> int:
    value %= prime
    if value < 2:
        value += 2
    if value > prime - 2:
        value = prime - 2
    return value


def interpret_key_params(param_bytes: bytes, expected_label: str, sent_label: str) -> EffectiveKey:
    """
    Read server key parameters under the algorithm the reader expects.

    With matching labels the genuine key comes back with its true strength.
    With mismatched labels the bytes collapse into the small misread
    parameter set of the expected algorithm, so the effective key is EXPORT.

    Args:
        param_bytes: Parameter bytes as received
        expected_label: Algorithm family the reader negotiated
        sent_label: Algorithm family the sender tagged the bytes with

    Returns:
        EffectiveKey

    Raises:
        KeyParamError: If the bytes cannot be decoded under the sent label
    """
    try:
        values = unpack_ints(param_bytes)
    except EncodingError as exc:
        raise KeyParamError(f"undecodable key parameters: {exc}") from exc
    if sent_label in ("DH", "EC"):
        if len(values) != 3:
            raise KeyParamError("DH parameters need (p, g, Y)")
        claimed = values[0]
        carried = values[2]
    elif sent_label == "RSA":
        if len(values) != 2:
            raise KeyParamError("RSA parameters need (n, e)")
        claimed = values[0]
        carried = values[0]
    else:
        raise KeyParamError(f"unknown key parameter label {sent_label!r}")

    if expected_label == sent_label:
        if sent_label == "RSA":
            n, e = values
            if n < 6 or e < 3:
                raise KeyParamError("RSA parameters out of range")
            rsa = RsaPublicKey(n, e)
            return EffectiveKey("RSA", rsa.strength, rsa=rsa, claimed_modulus=n)
        p, g, y = values
        known = catalog.find_group(p, g)
        try:
            group = catalog.get_group(known) if known else DhGroup(p, g, f"custom_{p}", sent_label)
        except GroupError as exc:
            raise KeyParamError(str(exc)) from exc
        if not 2 <= y <= p - 2:
            raise KeyParamError("public value out of range")
        public = DhPublicValue(group, y)
        return EffectiveKey(sent_label, group.strength, dh=public, claimed_modulus=p)

    if expected_label == "RSA":
        key = misread_rsa_key()
        return EffectiveKey("RSA", key.strength, rsa=key.public, claimed_modulus=claimed, misread=True)
    if expected_label in ("DH", "EC"):
        group = catalog.get_group(MISREAD_PARAMS[expected_label]["label"])
        public = DhPublicValue(group, _clamp(carried, group.prime_p))
        return EffectiveKey(expected_label, group.strength, dh=public, claimed_modulus=claimed, misread=True)
    raise KeyParamError(f"unknown expected label {expected_label!r}")


def verify_finished(
    local_transcript: tuple[bytes, ...],
    received_tag: bytes,
    ms: bytes,
    hash_id: HashId,
    collisions: CollisionTable = EMPTY_COLLISIONS,
) -> bool:
    """Whether a Finished tag matches the local transcript."""
    return verify_mac(received_tag, ms, transcript_hash(local_transcript, hash_id, collisions))


def select_suite(config: EndpointConfig, offered: tuple[str, ...], version: VersionId) -> Optional[str]:
    """First server-preferred suite the client offered that runs in `version`."""
    for suite_id in config.suites_by_preference:
        if suite_id in offered and catalog.get_cipher_suite(suite_id).supports(version):
            return suite_id
    return None


def negotiate_version(config: EndpointConfig, hello: ClientHello) -> Optional[VersionId]:
    """
    Server-side version choice.

    supported_versions wins when present: the newest listed version inside
    the server's range. Otherwise min(max_version, server max capped at TLS 1.2).
    """
    if hello.supported_versions:
        candidates = [v for v in hello.supported_versions
                      if config.min_version <= v <= config.max_version]
        return max(candidates) if candidates else None
    legacy_cap = min(config.max_version, VersionId.TLS12)
    version = min(hello.max_version, legacy_cap)
    if version < config.min_version:
        return None
    return version


# ============================================================================
# CLIENT
# ============================================================================

def _client_hello(state: EndpointState, config: EndpointConfig,
                  offered_max: VersionId, attempt: int) -> tuple[EndpointState, list]:
    nonce = _nonce(state.seed, attempt)
    offered_versions = catalog.versions_between(config.min_version, offered_max)
    keypair = None
    if offered_max.is_tls13:
        group = catalog.get_group(config.groups_by_preference[0])
        keypair = dh_keygen(group, derive_seed(state.seed, _SHARE, attempt, 0))
        hello = ClientHello(
            max_version=VersionId.TLS12,
            nonce=nonce,
            suites=config.suites_by_preference,
            supported_versions=tuple(reversed(offered_versions)),
            key_shares=(KeyShare(group.label, keypair.public_value),),
            supported_groups=config.groups_by_preference,
        )
    else:
        hello = ClientHello(
            max_version=offered_max,
            nonce=nonce,
            suites=config.suites_by_preference,
            supported_groups=config.groups_by_preference,
        )
    new_state = replace(
        state,
        phase=Phase.WAIT_SH,
        transcript=(encode_message(hello),),
        attempt=attempt,
        offered_max=offered_max,
        offered_versions=offered_versions,
        offered_suites=config.suites_by_preference,
        client_nonce=nonce,
        dh_keypair=keypair,
        group=keypair.group.label if keypair else None,
        last_hello=hello,
        hello_retried=False,
        version=None,
        suite=None,
        server_key=None,
    )
    logger.debug("client offers %s (attempt %d)", offered_max.value, attempt)
    return new_state, [hello]


def _client_timeout(state: EndpointState, config: EndpointConfig) -> tuple[EndpointState, list]:
    if state.phase is Phase.WAIT_SH and config.has_flag(BugFlag.DOWNGRADE_DANCE):
        lower = catalog.previous_version(state.offered_max)
        if lower is not None and lower >= config.min_version:
            logger.info("client falls back from %s to %s", state.offered_max.value, lower.value)
            return _client_hello(state, config, lower, state.attempt + 1)
    return _abort(state, AbortReason.HANDSHAKE_TIMEOUT, f"timeout in {state.phase.value}")


def _client_on_sh(state, config, hello: ServerHello, collisions):
    if hello.version not in state.offered_versions:
        return _abort(state, AbortReason.PROTOCOL_VERSION, f"server chose unoffered {hello.version.value}")
    if hello.suite not in state.offered_suites:
        return _abort(state, AbortReason.PROTOCOL_ERROR, f"server chose unoffered suite {hello.suite}")
    try:
        suite = catalog.get_cipher_suite(hello.suite)
    except NotFound:
        return _abort(state, AbortReason.PROTOCOL_ERROR, f"unknown suite {hello.suite}")
    if not suite.supports(hello.version):
        return _abort(state, AbortReason.PROTOCOL_ERROR, f"{hello.suite} not valid in {hello.version.value}")
    if not hello.version.is_tls13:
        verdict = check_sentinel(hello.nonce, state.offered_max, client_aware=config.sentinel_aware)
        if verdict is SentinelCheck.DOWNGRADE_DETECTED:
            return _abort(state, AbortReason.DOWNGRADE_DETECTED, "version sentinel in server nonce")

    new_state = replace(state, version=hello.version, suite=hello.suite, server_nonce=hello.nonce,
                        transcript=_append(state, hello), phase=Phase.WAIT_SC)
    if hello.version.is_tls13:
        share = hello.key_share
        if share is None or state.dh_keypair is None or share.group != state.group:
            return _abort(state, AbortReason.PROTOCOL_ERROR, "server key share does not match")
        try:
            pms = dh_shared_secret(state.dh_keypair, share.public_value)
        except KeyParamError as exc:
            return _abort(state, AbortReason.PROTOCOL_ERROR, str(exc))
        new_state = replace(new_state, secrets=derive_secrets(pms, state.client_nonce, hello.nonce))
    return new_state, []


def _client_on_hrr(state, config, retry: HelloRetryRequest, collisions):
    if state.hello_retried or not state.offered_max.is_tls13:
        return _abort(state, AbortReason.PROTOCOL_ERROR, "unexpected HelloRetryRequest")
    if retry.group not in config.groups_by_preference or retry.group == state.group:
        return _abort(state, AbortReason.PROTOCOL_ERROR, f"illegal retry group {retry.group}")
    group = catalog.get_group(retry.group)
    keypair = dh_keygen(group, derive_seed(state.seed, _SHARE, state.attempt, 1))
    second = replace(state.last_hello, key_shares=(KeyShare(group.label, keypair.public_value),))
    if config.hello_retry_policy.restart_transcript_on_hrr:
        transcript = (encode_message(second),)
    else:
        transcript = _append(state, retry, second)
    logger.debug("client retries hello with group %s", group.label)
    return replace(state, transcript=transcript, dh_keypair=keypair, group=group.label,
                   hello_retried=True, last_hello=second), [second]


def _client_on_sc(state, config, message: ServerCertificate, collisions):
    cert = message.certificate
    if cert.issuer not in config.trust_store:
        return _abort(state, AbortReason.CERT_REJECTED, f"untrusted issuer {cert.issuer}")
    new_state = replace(state, peer_certificate=cert, transcript=_append(state, message))
    if state.version is VersionId.SSL20:
        return _client_ssl2_key_exchange(new_state, config)
    if state.version.is_tls13:
        return replace(new_state, phase=Phase.WAIT_CV), []
    return replace(new_state, phase=Phase.WAIT_SKE), []


def _client_ssl2_key_exchange(state: EndpointState, config: EndpointConfig):
    key = certificate_key(state.peer_certificate)
    pms = _random_pms(state.seed, state.attempt, key.modulus_n)
    exchange = ClientKeyExchange(param_bytes=rsa_wrap_pms(pms, key), algo_label="RSA")
    secrets = derive_secrets(pms, state.client_nonce, state.server_nonce)
    connected = replace(state, secrets=secrets, transcript=_append(state, exchange), phase=Phase.CONNECTED)
    record = _seal_app(connected, secrets.k_I)
    return replace(connected, sent_records=1), [exchange, record]


def _client_on_ske(state, config, message: ServerKeyExchange, collisions):
    suite = catalog.get_cipher_suite(state.suite)
    if suite.kx is KeyExchange.RSA and not config.has_flag(BugFlag.ACCEPTS_SKE_IN_RSA):
        return _abort(state, AbortReason.PROTOCOL_ERROR, "ServerKeyExchange in an RSA handshake")
    signed = state.client_nonce + state.server_nonce + message.param_bytes
    if not rsa_verify(certificate_key(state.peer_certificate), signed, message.signature):
        return _abort(state, AbortReason.BAD_SIGNATURE, "ServerKeyExchange signature")
    try:
        key = interpret_key_params(message.param_bytes, suite.kx.family, message.algo_label)
    except KeyParamError as exc:
        return _abort(state, AbortReason.PROTOCOL_ERROR, str(exc))
    if (suite.kx is KeyExchange.DHE and key.claimed_modulus < BREAKABILITY["threshold"]
            and not config.has_flag(BugFlag.ACCEPTS_ARBITRARY_GROUPS)):
        return _abort(state, AbortReason.PROTOCOL_ERROR, "server offered a weak DH group")
    group = None
    if key.dh is not None:
        group = key.dh.group.label
        if suite.kx is KeyExchange.ECDHE and not key.misread and group not in config.groups_by_preference:
            return _abort(state, AbortReason.NO_COMMON_GROUP, f"server picked unoffered group {group}")
    return replace(state, server_key=key, group=group, transcript=_append(state, message)), []


def _client_on_shd(state, config, message: ServerHelloDone, collisions):
    suite = catalog.get_cipher_suite(state.suite)
    key = state.server_key
    fell_back = False
    if key is None and suite.kx is not KeyExchange.RSA:
        if config.has_flag(BugFlag.FS_FALLBACK_ON_MISSING_SKE) and suite.forward_secret:
            suite = catalog.rsa_counterpart(suite)
            fell_back = True
            logger.info("client falls back to %s without ServerKeyExchange", suite.suite_id)
        else:
            return _abort(state, AbortReason.PROTOCOL_ERROR, "missing ServerKeyExchange")

    transcript = _append(state, message)
    keypair = state.dh_keypair
    if key is None or key.rsa is not None:
        public = key.rsa if key is not None else certificate_key(state.peer_certificate)
        pms = _random_pms(state.seed, state.attempt, public.modulus_n)
        exchange = ClientKeyExchange(param_bytes=rsa_wrap_pms(pms, public), algo_label="RSA")
    else:
        keypair = dh_keygen(key.dh.group, derive_seed(state.seed, _SHARE, state.attempt, 2))
        try:
            pms = dh_shared_secret(keypair, key.dh.public_value)
        except KeyParamError as exc:
            return _abort(state, AbortReason.PROTOCOL_ERROR, str(exc))
        exchange = ClientKeyExchange(param_bytes=pack_ints((keypair.public_value,)), algo_label=key.algo_label)

    secrets = derive_secrets(pms, state.client_nonce, state.server_nonce)
    transcript = transcript + (encode_message(exchange),)
    hash_id = catalog.finished_hash(state.version, suite)
    finished = ClientFinished(mac=finished_mac(secrets.ms, transcript_hash(transcript, hash_id, collisions)))
    new_state = replace(
        state,
        phase=Phase.WAIT_SF,
        suite=suite.suite_id,
        secrets=secrets,
        dh_keypair=keypair,
        fell_back=fell_back,
        transcript=transcript + (encode_message(finished),),
    )
    return new_state, [exchange, CCS, finished]


def _client_on_cv(state, config, message: CertificateVerify, collisions):
    return replace(state, cv_signature=message.signature, cv_transcript_length=len(state.transcript),
                   transcript=_append(state, message), phase=Phase.WAIT_SF), []


def _client_on_sf(state, config, message: ServerFinished, collisions):
    suite = catalog.get_cipher_suite(state.suite)
    hash_id = catalog.finished_hash(state.version, suite)
    if not verify_finished(state.transcript, message.mac, state.secrets.ms, hash_id, collisions):
        return _abort(state, AbortReason.FINISHED_MISMATCH, "server Finished")
    transcript = _append(state, message)
    outgoing = []
    if state.version.is_tls13:
        signed = transcript_hash(state.transcript[:state.cv_transcript_length], HashId.STRONG)
        if not rsa_verify(certificate_key(state.peer_certificate), signed, state.cv_signature):
            return _abort(state, AbortReason.BAD_SIGNATURE, "CertificateVerify")
        finished = ClientFinished(mac=finished_mac(state.secrets.ms, transcript_hash(transcript, hash_id, collisions)))
        transcript = transcript + (encode_message(finished),)
        outgoing.append(finished)
    connected = replace(state, transcript=transcript, phase=Phase.CONNECTED)
    outgoing.append(_seal_app(connected, state.secrets.k_I))
    logger.debug("client connected with %s / %s", state.version.value, state.suite)
    return replace(connected, sent_records=state.sent_records + 1), outgoing


_CLIENT_HANDLERS = {
    (Phase.WAIT_SH, ServerHello): _client_on_sh,
    (Phase.WAIT_SH, HelloRetryRequest): _client_on_hrr,
    (Phase.WAIT_SC, ServerCertificate): _client_on_sc,
    (Phase.WAIT_SKE, ServerKeyExchange): _client_on_ske,
    (Phase.WAIT_SKE, ServerHelloDone): _client_on_shd,
    (Phase.WAIT_CV, CertificateVerify): _client_on_cv,
    (Phase.WAIT_SF, ServerFinished): _client_on_sf,
}


def client_step(
    state: EndpointState,
    config: EndpointConfig,
    incoming,
    collisions: CollisionTable = EMPTY_COLLISIONS,
) -> tuple[EndpointState, list]:
    """
    Advance the client by one input.

    Args:
        state: Current client state
        config: Client configuration
        incoming: A handshake message, START or a Timeout
        collisions: Adversary collisions, consulted only by weak transcript hashes

    Returns:
        Tuple of (new state, messages to send)
    """
    if state.phase in (Phase.CONNECTED, Phase.ABORTED):
        return state, []
    if isinstance(incoming, Start):
        if state.phase is not Phase.START:
            return state, []
        return _client_hello(state, config, config.max_version, 0)
    if isinstance(incoming, Timeout):
        return _client_timeout(state, config)
    if isinstance(incoming, ChangeCipherSpec) and state.phase is Phase.WAIT_SF:
        return state, []
    handler = _CLIENT_HANDLERS.get((state.phase, type(incoming)))
    if handler is None:
        return _abort(state, AbortReason.PROTOCOL_ERROR,
                      f"unexpected {getattr(incoming, 'KIND', type(incoming).__name__)} in {state.phase.value}")
    return handler(state, config, incoming, collisions)


# ============================================================================
# SERVER
# ============================================================================

def _legacy_group(config: EndpointConfig, hello: ClientHello, kx: KeyExchange) -> Optional[str]:
    if kx is KeyExchange.DHE_EXPORT:
        return "ffdhe_export"
    if kx is KeyExchange.DHE:
        for label in config.groups_by_preference:
            group = catalog.get_group(label)
            if group.family == "DH" and group.strength is Strength.STRONG:
                return label
        return "ffdhe_strong"
    for label in config.groups_by_preference:
        if catalog.group_family(label) != "EC":
            continue
        if not hello.supported_groups or label in hello.supported_groups:
            return label
    return None


def select_tls13_group(config: EndpointConfig, hello: ClientHello) -> tuple[Optional[str], bool]:
    """
    Pick the TLS 1.3 group for a hello.

    Returns:
        (group, needs_retry): the client's key-share group if acceptable,
        otherwise the first server-preferred group in supported_groups
        with needs_retry set; (None, False) when nothing is common
    """
    for share in hello.key_shares:
        if share.group in config.groups_by_preference:
            return share.group, False
    for label in config.groups_by_preference:
        if label in hello.supported_groups:
            return label, True
    return None, False


def _server_on_ch(state, config, hello: ClientHello, collisions):
    version = negotiate_version(config, hello)
    if version is None:
        return _abort(state, AbortReason.PROTOCOL_VERSION, "no common version")
    suite_id = select_suite(config, hello.suites, version)
    if suite_id is None:
        return _abort(state, AbortReason.NO_COMMON_SUITE, f"no common suite in {version.value}")
    suite = catalog.get_cipher_suite(suite_id)
    transcript = _append(state, hello)

    if version.is_tls13:
        return _server_tls13_hello(state, config, hello, version, suite_id, transcript)

    nonce = _nonce(state.seed, 0)
    if config.sentinel_aware:
        nonce = embed_sentinel(nonce, version)
    server_hello = ServerHello(version=version, nonce=nonce, suite=suite_id)
    certificate = ServerCertificate(config.certificate)
    outgoing = [server_hello, certificate]
    new_state = replace(state, version=version, suite=suite_id, client_nonce=hello.nonce,
                        server_nonce=nonce, phase=Phase.WAIT_CKE)

    if version is not VersionId.SSL20:
        exchange = None
        if suite.kx in (KeyExchange.DHE, KeyExchange.DHE_EXPORT, KeyExchange.ECDHE):
            label = _legacy_group(config, hello, suite.kx)
            if label is None:
                return _abort(state, AbortReason.NO_COMMON_GROUP, "no common EC group")
            group = catalog.get_group(label)
            keypair = dh_keygen(group, derive_seed(state.seed, _SHARE, 0, 0))
            params = encode_dh_params(DhPublicValue(group, keypair.public_value))
            exchange = ServerKeyExchange(params, group.family, rsa_sign(config.rsa_key, hello.nonce + nonce + params))
            new_state = replace(new_state, dh_keypair=keypair, group=label)
        elif suite.kx is KeyExchange.RSA_EXPORT:
            ephemeral = generate_rsa_key(Strength.EXPORT, derive_seed(state.seed, _EPHEMERAL))
            params = encode_rsa_params(ephemeral)
            exchange = ServerKeyExchange(params, "RSA", rsa_sign(config.rsa_key, hello.nonce + nonce + params))
            new_state = replace(new_state, ephemeral_rsa=ephemeral)
        if exchange is not None:
            outgoing.append(exchange)
            new_state = replace(new_state, ske_bytes=encode_message(exchange))
        outgoing.append(ServerHelloDone())

    return replace(new_state, transcript=transcript + tuple(encode_message(m) for m in outgoing)), outgoing


def _server_tls13_hello(state, config, hello, version, suite_id, transcript):
    group_label, needs_retry = select_tls13_group(config, hello)
    if group_label is None:
        return _abort(state, AbortReason.NO_COMMON_GROUP, "no common group")
    if needs_retry:
        if state.hello_retried:
            return _abort(state, AbortReason.PROTOCOL_ERROR, "second hello still lacks an acceptable share")
        retry = HelloRetryRequest(version=version, suite=suite_id, group=group_label)
        if config.hello_retry_policy.restart_transcript_on_hrr:
            kept = ()
        else:
            kept = transcript + (encode_message(retry),)
        logger.debug("server requests retry with %s", group_label)
        return replace(state, transcript=kept, hello_retried=True), [retry]

    share = next(s for s in hello.key_shares if s.group == group_label)
    group = catalog.get_group(group_label)
    keypair = dh_keygen(group, derive_seed(state.seed, _SHARE, 0, 0))
    try:
        pms = dh_shared_secret(keypair, share.public_value)
    except KeyParamError as exc:
        return _abort(state, AbortReason.PROTOCOL_ERROR, str(exc))
    nonce = _nonce(state.seed, 0)
    secrets = derive_secrets(pms, hello.nonce, nonce)

    server_hello = ServerHello(version=version, nonce=nonce, suite=suite_id,
                               key_share=KeyShare(group_label, keypair.public_value))
    certificate = ServerCertificate(config.certificate)
    transcript = transcript + (encode_message(server_hello), encode_message(certificate))
    verify = CertificateVerify(rsa_sign(config.rsa_key, transcript_hash(transcript, HashId.STRONG)))
    transcript = transcript + (encode_message(verify),)
    finished = ServerFinished(mac=finished_mac(secrets.ms, transcript_hash(transcript, HashId.STRONG)))
    transcript = transcript + (encode_message(finished),)
    new_state = replace(state, version=version, suite=suite_id, group=group_label, secrets=secrets,
                        client_nonce=hello.nonce, server_nonce=nonce, dh_keypair=keypair,
                        transcript=transcript, phase=Phase.WAIT_CF)
    return new_state, [server_hello, certificate, verify, finished]


def _server_on_cke(state, config, message: ClientKeyExchange, collisions):
    suite = catalog.get_cipher_suite(state.suite)
    expected = suite.kx.family
    transcript = state.transcript
    if state.version is VersionId.SSL20:
        pms = rsa_unwrap_pms(message.param_bytes, config.rsa_key)
    elif message.algo_label == "RSA" and expected != "RSA":
        if not (config.has_flag(BugFlag.FS_FALLBACK_ON_MISSING_SKE) and suite.forward_secret):
            return _abort(state, AbortReason.PROTOCOL_ERROR, "RSA key exchange in a forward-secret suite")
        suite = catalog.rsa_counterpart(suite)
        pms = rsa_unwrap_pms(message.param_bytes, config.rsa_key)
        transcript = tuple(m for m in transcript if m != state.ske_bytes)
        logger.info("server falls back to %s on RSA key exchange", suite.suite_id)
    elif message.algo_label != expected:
        return _abort(state, AbortReason.PROTOCOL_ERROR, f"{message.algo_label} key exchange, expected {expected}")
    elif expected == "RSA":
        key = state.ephemeral_rsa if suite.kx is KeyExchange.RSA_EXPORT else config.rsa_key
        pms = rsa_unwrap_pms(message.param_bytes, key)
    else:
        try:
            values = unpack_ints(message.param_bytes)
            if len(values) != 1:
                raise KeyParamError("client share must be one integer")
            pms = dh_shared_secret(state.dh_keypair, values[0])
        except (EncodingError, KeyParamError) as exc:
            return _abort(state, AbortReason.PROTOCOL_ERROR, str(exc))

    secrets = derive_secrets(pms, state.client_nonce, state.server_nonce)
    phase = Phase.CONNECTED if state.version is VersionId.SSL20 else Phase.WAIT_CF
    return replace(state, suite=suite.suite_id, secrets=secrets, phase=phase,
                   fell_back=suite.suite_id != state.suite,
                   transcript=transcript + (encode_message(message),)), []


def _server_on_cf(state, config, message: ClientFinished, collisions):
    suite = catalog.get_cipher_suite(state.suite)
    hash_id = catalog.finished_hash(state.version, suite)
    if not verify_finished(state.transcript, message.mac, state.secrets.ms, hash_id, collisions):
        return _abort(state, AbortReason.FINISHED_MISMATCH, "client Finished")
    transcript = _append(state, message)
    if state.version.is_tls13:
        return replace(state, transcript=transcript, phase=Phase.CONNECTED), []
    finished = ServerFinished(mac=finished_mac(state.secrets.ms, transcript_hash(transcript, hash_id, collisions)))
    logger.debug("server connected with %s / %s", state.version.value, state.suite)
    return replace(state, transcript=transcript + (encode_message(finished),),
                   phase=Phase.CONNECTED), [CCS, finished]


def _server_on_app(state, config, message: AppData, collisions):
    suite = catalog.get_cipher_suite(state.suite)
    plaintext = open_record(state.secrets.k_I, message.ciphertext, message.tag, suite.enc,
                            len(state.received_app))
    if plaintext is None:
        return _abort(state, AbortReason.BAD_RECORD_MAC, "application record")
    return replace(state, received_app=state.received_app + (plaintext,)), []


_SERVER_HANDLERS = {
    (Phase.WAIT_CH, ClientHello): _server_on_ch,
    (Phase.WAIT_CKE, ClientKeyExchange): _server_on_cke,
    (Phase.WAIT_CF, ClientFinished): _server_on_cf,
    (Phase.CONNECTED, AppData): _server_on_app,
}


def server_step(
    state: EndpointState,
    config: EndpointConfig,
    incoming,
    collisions: CollisionTable = EMPTY_COLLISIONS,
) -> tuple[EndpointState, list]:
    """
    Advance the server by one input.

    Args:
        state: Current server state
        config: Server configuration
        incoming: A handshake or record message
        collisions: Adversary collisions, consulted only by weak transcript hashes

    Returns:
        Tuple of (new state, messages to send)
    """
    if state.phase is Phase.ABORTED or isinstance(incoming, (Start, Timeout)):
        return state, []
    if isinstance(incoming, ChangeCipherSpec) and state.phase is Phase.WAIT_CF:
        return state, []
    handler = _SERVER_HANDLERS.get((state.phase, type(incoming)))
    if handler is None:
        return _abort(state, AbortReason.PROTOCOL_ERROR,
                      f"unexpected {getattr(incoming, 'KIND', type(incoming).__name__)} in {state.phase.value}")
    return handler(state, config, incoming, collisions)


# ============================================================================
# HELLO RETRY
# ============================================================================

@dataclass(frozen=True)
class HelloRetryOutcome:
    """
    Result of running the group negotiation of a TLS 1.3 hello.

    Attributes:
        group: Agreed group, None when nothing is common
        retry: The HelloRetryRequest sent, if any
        second_hello: The client's retried hello, if any
        client_transcript: Client transcript after the exchange
        server_transcript: Server transcript just before its ServerHello
        aborted: Abort reason when no group is common
    """
    group: Optional[str]
    retry: Optional[HelloRetryRequest]
    second_hello: Optional[ClientHello]
    client_transcript: tuple[bytes, ...]
    server_transcript: tuple[bytes, ...]
    aborted: Optional[AbortReason] = None


def negotiate_group_with_hrr(
    client_state: EndpointState,
    server_config: EndpointConfig,
    policy: HelloRetryPolicy,
) -> HelloRetryOutcome:
    """
    Negotiate the key-share group for a client that has sent its first hello.

    Both transcripts follow `policy`: a restarting policy keeps only the
    second hello, a continuing one keeps hello, retry request and second hello.

    Args:
        client_state: Client state right after its first ClientHello
        server_config: Server configuration deciding the group
        policy: Transcript rule applied on both sides

    Returns:
        HelloRetryOutcome
    """
    hello = client_state.last_hello
    if hello is None or not hello.key_shares:
        raise ValueError("client has not sent a TLS 1.3 hello")
    group, needs_retry = select_tls13_group(server_config, hello)
    first = (encode_message(hello),)
    if group is None:
        return HelloRetryOutcome(None, None, None, client_state.transcript, first, AbortReason.NO_COMMON_GROUP)
    if not needs_retry:
        return HelloRetryOutcome(group, None, None, client_state.transcript, first)
    if group == client_state.group:
        return HelloRetryOutcome(None, None, None, client_state.transcript, first, AbortReason.NO_COMMON_GROUP)

    version = max(v for v in hello.supported_versions
                  if server_config.min_version <= v <= server_config.max_version)
    suite = select_suite(server_config, hello.suites, version) or hello.suites[0]
    retry = HelloRetryRequest(version=version, suite=suite, group=group)
    group_key = catalog.get_group(group)
    keypair = dh_keygen(group_key, derive_seed(client_state.seed, _SHARE, client_state.attempt, 1))
    second = replace(hello, key_shares=(KeyShare(group, keypair.public_value),))
    if policy.restart_transcript_on_hrr:
        transcript = (encode_message(second),)
    else:
        transcript = first + (encode_message(retry), encode_message(second))
    return HelloRetryOutcome(group, retry, second, transcript, transcript)
