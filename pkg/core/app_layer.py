"""
Application-layer upgrade and proxy scenarios.

SMTP starts in plaintext and upgrades to TLS through STARTTLS:

    EHLO -> 250 capabilities (STARTTLS) -> STARTTLS -> 220 -> TLS tunnel

A client whose upgrade fails (capability missing, command refused, no
answer) either sends the mail in plaintext (FAIL_OPEN) or aborts
(FAIL_CLOSED). The proxy scenario puts a TLS-terminating middlebox with its
own certificate between client and server.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from core import catalog
from core.crypto_model import EMPTY_COLLISIONS, CollisionTable, derive_seed, generate_rsa_key
from core.handshake import (
    EndpointConfig,
    EndpointState,
    client_step,
    new_client_state,
    new_server_state,
    server_step,
)
from core.messages import (
    START,
    Capabilities,
    Ehlo,
    PlainMail,
    SmtpReply,
    Start,
    StartTls,
    Timeout,
)
from core.models import (
    AbortReason,
    ActionKind,
    Certificate,
    Direction,
    NegotiatedMode,
    ProxyBehavior,
    Role,
    Strength,
    UpgradePolicy,
)
from core.network import Party, Trace, run_network

logger = logging.getLogger(__name__)

BASE_CAPABILITIES = ("PIPELINING", "8BITMIME")


class SmtpPhase(str, Enum):
    START = "START"
    WAIT_EHLO = "WAIT_EHLO"
    WAIT_CAPS = "WAIT_CAPS"
    WAIT_COMMAND = "WAIT_COMMAND"
    WAIT_READY = "WAIT_READY"
    TLS = "TLS"
    PLAIN_SENT = "PLAIN_SENT"
    DONE = "DONE"
    ABORTED = "ABORTED"


@dataclass(frozen=True)
class PolicyMode:
    """What a client does when the TLS upgrade fails."""
    on_upgrade_failure: UpgradePolicy = UpgradePolicy.FAIL_CLOSED

    @property
    def permits_plaintext(self) -> bool:
        return self.on_upgrade_failure is UpgradePolicy.FAIL_OPEN


@dataclass(frozen=True)
class SmtpConfig:
    """
    One SMTP endpoint.

    Attributes:
        role: Client or server
        tls: TLS configuration used inside the tunnel
        policy: Upgrade failure policy (clients)
        offers_starttls: Whether the server advertises STARTTLS
        domain: Name sent in EHLO
    """
    role: Role
    tls: EndpointConfig
    policy: PolicyMode = PolicyMode()
    offers_starttls: bool = True
    domain: str = "client.example"


@dataclass(frozen=True)
class SmtpState:
    role: Role
    phase: SmtpPhase
    tls: EndpointState
    mail: bytes = b""
    received_mail: tuple[bytes, ...] = ()
    aborted: Optional[AbortReason] = None
    abort_detail: str = ""

    @property
    def waiting(self) -> bool:
        if self.phase is SmtpPhase.TLS:
            return self.tls.waiting
        return self.phase in (SmtpPhase.WAIT_CAPS, SmtpPhase.WAIT_READY)

    @property
    def tunnel(self) -> bool:
        return self.phase is SmtpPhase.TLS

    @property
    def completed(self) -> bool:
        if self.phase is SmtpPhase.TLS:
            return self.tls.connected
        return self.phase in (SmtpPhase.PLAIN_SENT, SmtpPhase.DONE)

    @property
    def negotiated(self) -> Optional[NegotiatedMode]:
        if self.phase is SmtpPhase.TLS and self.tls.connected:
            return NegotiatedMode(self.tls.version, self.tls.suite, self.tls.group, layer=True)
        if self.completed:
            return NegotiatedMode(None, None, None, layer=False)
        return None


def new_smtp_client(seed: int, mail: bytes) -> SmtpState:
    return SmtpState(role=Role.CLIENT, phase=SmtpPhase.START, tls=new_client_state(seed, mail), mail=mail)


def new_smtp_server(seed: int) -> SmtpState:
    return SmtpState(role=Role.SERVER, phase=SmtpPhase.WAIT_EHLO, tls=new_server_state(seed))


def _abort(state: SmtpState, reason: AbortReason, detail: str) -> tuple[SmtpState, list]:
    logger.info("smtp %s aborts: %s (%s)", state.role.value, reason.value, detail)
    return replace(state, phase=SmtpPhase.ABORTED, aborted=reason, abort_detail=detail), []


def _upgrade_failed(state: SmtpState, config: SmtpConfig, detail: str) -> tuple[SmtpState, list]:
    if config.policy.permits_plaintext:
        logger.info("STARTTLS failed (%s); failing open", detail)
        return replace(state, phase=SmtpPhase.PLAIN_SENT), [PlainMail(state.mail)]
    return _abort(state, AbortReason.UPGRADE_REFUSED, detail)


def _tunnel(state: SmtpState, config: SmtpConfig, incoming, collisions) -> tuple[SmtpState, list]:
    step = client_step if state.role is Role.CLIENT else server_step
    tls, outgoing = step(state.tls, config.tls, incoming, collisions)
    new_state = replace(state, tls=tls)
    if tls.aborted is not None:
        new_state = replace(new_state, aborted=tls.aborted, abort_detail=tls.abort_detail)
    return new_state, outgoing


def _client(state: SmtpState, config: SmtpConfig, incoming, collisions):
    phase = state.phase
    if phase is SmtpPhase.TLS:
        return _tunnel(state, config, incoming, collisions)
    if isinstance(incoming, Start) and phase is SmtpPhase.START:
        return replace(state, phase=SmtpPhase.WAIT_CAPS), [Ehlo(config.domain)]
    if isinstance(incoming, Timeout) and phase in (SmtpPhase.WAIT_CAPS, SmtpPhase.WAIT_READY):
        return _upgrade_failed(state, config, f"no answer in {phase.value}")
    if isinstance(incoming, Capabilities) and phase is SmtpPhase.WAIT_CAPS:
        if "STARTTLS" not in incoming.capabilities:
            return _upgrade_failed(state, config, "server does not advertise STARTTLS")
        return replace(state, phase=SmtpPhase.WAIT_READY), [StartTls()]
    if isinstance(incoming, SmtpReply) and phase is SmtpPhase.WAIT_READY:
        if incoming.code != 220:
            return _upgrade_failed(state, config, f"STARTTLS answered {incoming.code}")
        return _tunnel(replace(state, phase=SmtpPhase.TLS), config, START, collisions)
    if isinstance(incoming, SmtpReply) and phase is SmtpPhase.PLAIN_SENT:
        return replace(state, phase=SmtpPhase.DONE), []
    return _abort(state, AbortReason.PROTOCOL_ERROR,
                  f"unexpected {getattr(incoming, 'KIND', '?')} in {phase.value}")


def _server(state: SmtpState, config: SmtpConfig, incoming, collisions):
    phase = state.phase
    if phase is SmtpPhase.TLS:
        return _tunnel(state, config, incoming, collisions)
    if isinstance(incoming, (Start, Timeout)):
        return state, []
    if isinstance(incoming, Ehlo) and phase is SmtpPhase.WAIT_EHLO:
        caps = BASE_CAPABILITIES + (("STARTTLS",) if config.offers_starttls else ())
        return replace(state, phase=SmtpPhase.WAIT_COMMAND), [Capabilities(caps)]
    if isinstance(incoming, StartTls) and phase is SmtpPhase.WAIT_COMMAND:
        if incoming.verb.upper() != "STARTTLS" or not config.offers_starttls:
            return state, [SmtpReply(502, "Command not implemented")]
        return replace(state, phase=SmtpPhase.TLS), [SmtpReply(220, "Ready to start TLS")]
    if isinstance(incoming, PlainMail) and phase is SmtpPhase.WAIT_COMMAND:
        return replace(state, phase=SmtpPhase.DONE,
                       received_mail=state.received_mail + (incoming.payload,)), [SmtpReply(250, "OK")]
    return _abort(state, AbortReason.PROTOCOL_ERROR,
                  f"unexpected {getattr(incoming, 'KIND', '?')} in {phase.value}")


def smtp_step(
    state: SmtpState,
    config: SmtpConfig,
    incoming,
    collisions: CollisionTable = EMPTY_COLLISIONS,
) -> tuple[SmtpState, list]:
    """
    Advance an SMTP endpoint by one input.

    Handshake messages after a successful STARTTLS go to the embedded TLS
    state machine; the mail then travels as TLS application data.

    Args:
        state: Current SMTP state
        config: Endpoint configuration including the upgrade policy
        incoming: SMTP message, handshake message, START or a Timeout
        collisions: Adversary collisions, passed through to TLS

    Returns:
        Tuple of (new state, messages to send)
    """
    if state.phase is SmtpPhase.ABORTED or (state.aborted is not None):
        return state, []
    if state.role is Role.CLIENT:
        return _client(state, config, incoming, collisions)
    return _server(state, config, incoming, collisions)


# ============================================================================
# PROXY
# ============================================================================

@dataclass(frozen=True)
class ProxyScenario:
    """
    A TLS-terminating middlebox.

    Attributes:
        proxy_issuer: Issuer of the proxy's certificate
        behavior: How the proxy talks to the real server
    """
    proxy_issuer: str
    behavior: ProxyBehavior = ProxyBehavior.FORWARD_PLAINTEXT

    def trusted_by(self, config: EndpointConfig) -> bool:
        return self.proxy_issuer in config.trust_store


@dataclass
class ProxyResult:
    """
    Outcome of a proxied session.

    Attributes:
        client_state: Client endpoint after its session with the proxy
        proxy_state: Proxy's server-side endpoint
        upstream_mode: How the proxy reached the server; layer False for plaintext
        server_received: Payload the real server got, if any
        read_payloads: Client payloads the proxy decrypted
        trace: Client-side trace
        upstream_trace: Proxy-to-server trace (REENCRYPT_WEAK only)
    """
    client_state: EndpointState
    proxy_state: EndpointState
    upstream_mode: Optional[NegotiatedMode]
    server_received: Optional[bytes]
    read_payloads: list[bytes]
    trace: Trace
    upstream_trace: Optional[Trace] = None

    @property
    def certificate_accepted(self) -> bool:
        return self.client_state.aborted is not AbortReason.CERT_REJECTED and self.proxy_state.secrets is not None


class ProxyInterceptor:
    """Records the proxy's answers to the client as injected messages."""

    collisions = EMPTY_COLLISIONS

    def __init__(self, trace: Trace):
        self.trace = trace

    def intercept(self, message, direction: Direction):
        if direction is Direction.TO_CLIENT:
            self.trace.record("adversary", "intercept", message.KIND, direction, ActionKind.INJECT.value,
                              in_reply=True, impersonates="server")
        else:
            self.trace.record("adversary", "intercept", message.KIND, direction, ActionKind.FORWARD.value)
        return [(direction, message)]


def _proxy_config(scenario: ProxyScenario, server_config: EndpointConfig, seed: int) -> EndpointConfig:
    key = generate_rsa_key(Strength.STRONG, derive_seed(seed, 12))
    subject = server_config.certificate.subject if server_config.certificate else "server.example"
    certificate = Certificate(subject=subject, issuer=scenario.proxy_issuer,
                              modulus_n=key.modulus_n, public_exp=key.public_exp)
    return replace(server_config, rsa_key=key, certificate=certificate, bug_flags=frozenset())


def _weakest_upstream(server_config: EndpointConfig) -> EndpointConfig:
    suite = catalog.get_cipher_suite(server_config.suites_by_preference[-1])
    high = min(server_config.max_version, suite.max_version)
    low = max(server_config.min_version, suite.min_version)
    return EndpointConfig(
        role=Role.CLIENT,
        version_range=(low, high),
        suites_by_preference=(suite.suite_id,),
        groups_by_preference=server_config.groups_by_preference[::-1],
        trust_store=frozenset({server_config.certificate.issuer}),
    )


def run_proxy_session(
    scenario: ProxyScenario,
    client_config: EndpointConfig,
    server_config: EndpointConfig,
    app_payload: bytes,
    *,
    seed: int = 0,
    trace: Optional[Trace] = None,
) -> ProxyResult:
    """
    Run a client against a proxy that impersonates the server.

    The client's TLS session ends at the proxy. If the client accepts the
    proxy certificate the proxy reads the payload and passes it on per its
    behavior: in cleartext, or over a second TLS session using the server's
    least preferred suite.

    Args:
        scenario: Proxy issuer and behavior
        client_config: Client TLS configuration (its trust store decides)
        server_config: Real server configuration
        app_payload: Data the client sends once connected
        seed: Session seed
        trace: Trace to append to

    Returns:
        ProxyResult
    """
    trace = trace if trace is not None else Trace()
    proxy_config = _proxy_config(scenario, server_config, seed)
    client = Party(Role.CLIENT, new_client_state(seed, app_payload),
                   lambda s, m, c: client_step(s, client_config, m, c))
    proxy = Party(Role.SERVER, new_server_state(derive_seed(seed, 13)),
                  lambda s, m, c: server_step(s, proxy_config, m, c))
    result = run_network(client, proxy, ProxyInterceptor(trace), trace=trace)
    proxy_state = result.server_state
    read = list(proxy_state.received_app)

    upstream_mode = None
    server_received = None
    upstream_trace = None
    if read:
        payload = read[0]
        if scenario.behavior is ProxyBehavior.FORWARD_PLAINTEXT:
            upstream_mode = NegotiatedMode(None, None, None, layer=False)
            server_received = payload
            trace.record("adversary", "intercept", "PlainData", Direction.TO_SERVER, ActionKind.INJECT.value,
                         impersonates="client", bytes=len(payload))
        else:
            upstream_config = _weakest_upstream(server_config)
            upstream_trace = Trace()
            upstream_client = Party(Role.CLIENT, new_client_state(derive_seed(seed, 14), payload),
                                    lambda s, m, c: client_step(s, upstream_config, m, c))
            server = Party(Role.SERVER, new_server_state(derive_seed(seed, 15)),
                           lambda s, m, c: server_step(s, server_config, m, c))
            upstream = run_network(upstream_client, server, trace=upstream_trace)
            state = upstream.server_state
            if state.connected:
                upstream_mode = NegotiatedMode(state.version, state.suite, state.group, layer=True)
                server_received = state.received_app[0] if state.received_app else None
            trace.record("adversary", "note", "ReencryptUpstream", Direction.TO_SERVER,
                         suite=upstream_config.suites_by_preference[0],
                         connected=state.connected)
        logger.info("proxy read %d byte payload", len(payload))

    return ProxyResult(
        client_state=result.client_state,
        proxy_state=proxy_state,
        upstream_mode=upstream_mode,
        server_received=server_received,
        read_payloads=read,
        trace=trace,
        upstream_trace=upstream_trace,
    )
