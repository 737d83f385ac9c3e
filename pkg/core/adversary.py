"""
Scripted man-in-the-middle.

The adversary sits on the wire and sees every message in both directions.
A script decides, per message, whether to forward, drop, modify or inject,
and which oracles to call. Everything the adversary learns lands in a
KnowledgeSet together with how it was derived.

To forge Finished messages and re-encrypt records the adversary keeps two
session views: what the client has seen and sent, and what the server has
seen and sent. Each view mirrors its endpoint's transcript and, once the
key exchange is breakable, its secrets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Optional, Union

from core import catalog
from core.config import APP_DATA, ADVERSARY_DEFAULTS
from core.crypto_model import (
    EMPTY_COLLISIONS,
    WEAK_HASH,
    STRONG_HASH,
    CollisionTable,
    DhKeyPair,
    DhPublicValue,
    HashAlgo,
    Infeasible,
    RsaPublicKey,
    RsaToyKey,
    SecretBundle,
    WorkBudget,
    bleichenbacher_decrypt,
    byte_length,
    cbc_recover,
    derive_secrets,
    derive_seed,
    dh_keygen,
    finished_mac,
    int_to_bytes,
    open_record,
    recover_private,
    register_collision,
    rsa_unwrap_pms,
    seal_record,
    transcript_hash,
)
from core.errors import EncodingError, KeyParamError, OracleUnavailable, ScriptError
from core.handshake import EffectiveKey, HelloRetryPolicy, certificate_key, interpret_key_params
from core.messages import (
    NON_TRANSCRIPT_KINDS,
    AppData,
    ClientHello,
    ClientKeyExchange,
    HelloRetryRequest,
    PlainMail,
    ServerCertificate,
    ServerHello,
    ServerKeyExchange,
)
from core.models import ActionKind, Direction, Encryption, HashId, Role, VersionId
from core.network import Trace
from utils.codec import check_field, coerce_field, encode_message, pack_ints, to_plain, unpack_ints

logger = logging.getLogger(__name__)

TOKEN_FINISHED = "$finished"
TOKEN_SHARE = "$adversary_share"
TOKEN_REENCRYPT = "$reencrypt"
TOKENS = frozenset({TOKEN_FINISHED, TOKEN_SHARE, TOKEN_REENCRYPT})


class OracleKind(str, Enum):
    RECOVER_KEY = "recover_key"
    BLEICHENBACHER = "bleichenbacher"
    REGISTER_COLLISION = "register_collision"
    CBC_RECOVER = "cbc_recover"


# Parallel connection each oracle needs, if any
ORACLE_HANDLES = {
    OracleKind.BLEICHENBACHER: "sslv2_server",
    OracleKind.CBC_RECOVER: "server_padding_oracle",
}


# ============================================================================
# SCRIPT
# ============================================================================

@dataclass(frozen=True)
class Trigger:
    """
    Which intercepted messages a rule applies to.

    Attributes:
        kind: Message KIND, or "*" for any
        direction: Travel direction, None for both
        occurrence: 1-based count among messages of this kind and direction
        where: (field, expected) pairs; expected may be {"in": [...]}
    """
    kind: str = "*"
    direction: Optional[Direction] = None
    occurrence: Optional[int] = None
    where: tuple[tuple[str, Any], ...] = ()

    def matches(self, message, direction: Direction, occurrence: int) -> bool:
        if self.kind != "*" and self.kind != message.KIND:
            return False
        if self.direction is not None and self.direction is not direction:
            return False
        if self.occurrence is not None and self.occurrence != occurrence:
            return False
        for name, expected in self.where:
            if not hasattr(message, name):
                return False
            actual = to_plain(getattr(message, name))
            if isinstance(expected, dict) and "in" in expected:
                if actual not in expected["in"]:
                    return False
            elif actual != expected:
                return False
        return True


@dataclass(frozen=True)
class Forward:
    kind = ActionKind.FORWARD


@dataclass(frozen=True)
class Drop:
    kind = ActionKind.DROP


@dataclass(frozen=True)
class Modify:
    """Declarative field edits; values are JSON values or one of TOKENS."""
    edits: tuple[tuple[str, Any], ...]
    kind = ActionKind.MODIFY


@dataclass(frozen=True)
class Inject:
    """
    Deliver a crafted message.

    Attributes:
        message: Message to deliver, impersonating the peer
        direction: Where it goes
        in_reply: Consume the triggering message instead of forwarding it
    """
    message: Any
    direction: Direction
    in_reply: bool = False
    kind = ActionKind.INJECT


InterceptAction = Union[Forward, Drop, Modify, Inject]
FORWARD = Forward()


@dataclass(frozen=True)
class ScriptRule:
    """
    A trigger bound to an interception action, an oracle call, or both.

    Attributes:
        trigger: Messages the rule applies to
        action: Interception action; None for oracle-only rules
        oracle: Oracle to call on the triggering message
        params: Oracle parameters
    """
    trigger: Trigger
    action: Optional[InterceptAction] = None
    oracle: Optional[OracleKind] = None
    params: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self):
        if self.action is None and self.oracle is None:
            raise ScriptError("rule needs an action or an oracle")

    def param(self, name: str, default: Any = None) -> Any:
        return dict(self.params).get(name, default)


@dataclass(frozen=True)
class AdversaryScript:
    """
    Ordered rules plus the resources the adversary starts with.

    Attributes:
        rules: Rules in priority order; the first matching action wins
        budget_units: Initial work budget
        parallel_connections: Names of extra endpoints the adversary may talk to
    """
    rules: tuple[ScriptRule, ...] = ()
    budget_units: int = ADVERSARY_DEFAULTS["budget_units"]
    parallel_connections: tuple[str, ...] = ()

    def __post_init__(self):
        if self.budget_units < 0:
            raise ScriptError("budget cannot be negative")
        for rule in self.rules:
            needed = ORACLE_HANDLES.get(rule.oracle)
            if needed is not None and needed not in self.parallel_connections:
                logger.warning("rule uses %s without a %s connection", rule.oracle.value, needed)

    @property
    def action_kinds(self) -> frozenset[ActionKind]:
        return frozenset(r.action.kind for r in self.rules if r.action is not None)


PASSIVE_SCRIPT = AdversaryScript()


# ============================================================================
# KNOWLEDGE
# ============================================================================

@dataclass(frozen=True)
class KnowledgeEntry:
    """
    One fact the adversary holds.

    Attributes:
        kind: observed, dh_secret, rsa_private, pms, ms, keys, plaintext, own_share, forged or collision
        label: Short name for the fact
        value: The fact itself
        derivation: Observation or oracle call that produced it
    """
    kind: str
    label: str
    value: Any
    derivation: str


class KnowledgeSet:
    """Append-only store of what the adversary knows."""

    def __init__(self):
        self.entries: list[KnowledgeEntry] = []
        self.dh_secrets: dict[tuple[int, int], int] = {}
        self.rsa_private: dict[int, tuple[int, int]] = {}
        self.pms_by_ciphertext: dict[bytes, bytes] = {}

    def add(self, kind: str, label: str, value: Any, derivation: str) -> KnowledgeEntry:
        entry = KnowledgeEntry(kind, label, value, derivation)
        self.entries.append(entry)
        if kind != "observed":
            logger.debug("adversary learns %s %s via %s", kind, label, derivation)
        return entry

    def learn_dh_secret(self, public: DhPublicValue, secret: int, derivation: str) -> None:
        group = public.group
        self.dh_secrets[(group.prime_p, public.public_value)] = secret
        self.add("dh_secret", f"{group.label}:{public.public_value}", secret, derivation)

    def learn_rsa_private(self, key: RsaPublicKey, private_exp: int, derivation: str) -> None:
        self.rsa_private[key.modulus_n] = (key.public_exp, private_exp)
        self.add("rsa_private", f"n={key.modulus_n}", private_exp, derivation)

    def learn_pms(self, ciphertext: bytes, pms: bytes, derivation: str) -> None:
        self.pms_by_ciphertext[ciphertext] = pms
        self.add("pms", "decrypted", pms, derivation)

    def of_kind(self, kind: str) -> list[KnowledgeEntry]:
        return [e for e in self.entries if e.kind == kind]

    def has(self, kind: str) -> bool:
        return any(e.kind == kind for e in self.entries)

    @property
    def plaintexts(self) -> list[bytes]:
        return [e.value for e in self.entries if e.kind == "plaintext"]

    def summary(self) -> dict:
        """Counts per kind plus the labels of everything that is not an observation."""
        counts: dict[str, int] = {}
        for entry in self.entries:
            counts[entry.kind] = counts.get(entry.kind, 0) + 1
        return {
            "counts": dict(sorted(counts.items())),
            "facts": [f"{e.kind}:{e.label} <- {e.derivation}" for e in self.entries if e.kind != "observed"],
        }


@dataclass(frozen=True)
class CannotForge:
    reason: str

    def __bool__(self) -> bool:
        return False


def attempt_key_recovery(
    knowledge: KnowledgeSet,
    params: Union[DhPublicValue, RsaPublicKey, EffectiveKey],
    budget: WorkBudget,
    derivation: str = "recover_private",
) -> KnowledgeSet:
    """
    Try to break observed public key parameters and record the result.

    Session secrets follow once the matching key exchange is seen; failures
    leave knowledge unchanged.

    Args:
        knowledge: Knowledge to extend
        params: Observed public parameters
        budget: Work budget, debited on success
        derivation: Text recorded as the source of the secret

    Returns:
        The same KnowledgeSet
    """
    if isinstance(params, EffectiveKey):
        params = params.dh if params.dh is not None else params.rsa
    try:
        result = recover_private(params, budget)
    except KeyParamError as exc:
        logger.info("key recovery rejected parameters: %s", exc)
        return knowledge
    if isinstance(result, Infeasible):
        logger.info("key recovery infeasible: %s", result.reason)
        return knowledge
    if isinstance(params, DhPublicValue):
        knowledge.learn_dh_secret(params, result, derivation)
    else:
        knowledge.learn_rsa_private(params, result, derivation)
    return knowledge


def forge_finished(
    knowledge: KnowledgeSet,
    target_transcript: tuple[bytes, ...],
    hash_algo: Union[HashAlgo, HashId],
    collisions: CollisionTable = EMPTY_COLLISIONS,
    *,
    ms: Optional[bytes] = None,
    observed_tag: Optional[bytes] = None,
    observed_transcript: Optional[tuple[bytes, ...]] = None,
) -> Union[bytes, CannotForge]:
    """
    Produce a Finished tag the verifier of `target_transcript` will accept.

    With the master secret the tag is simply computed. Without it, an honest
    tag observed over a different transcript still verifies when the hash is
    weak and a registered collision makes both transcripts hash alike.

    Args:
        knowledge: Adversary knowledge; its latest master secret is used when ms is None
        target_transcript: Transcript the verifier holds
        hash_algo: Finished hash of the session
        collisions: Registered collisions
        ms: Master secret of the verifier's session, if known
        observed_tag: Honest tag seen on the wire
        observed_transcript: Transcript the honest tag was computed over

    Returns:
        The tag, or CannotForge
    """
    algo = hash_algo if isinstance(hash_algo, HashAlgo) else HashAlgo(hash_algo)
    if ms is None:
        known = knowledge.of_kind("ms")
        ms = known[-1].value if known else None
    if ms is not None:
        return finished_mac(ms, transcript_hash(target_transcript, algo, collisions))
    if algo.collision_resistant:
        return CannotForge("master secret unknown and the transcript hash is collision resistant")
    if observed_tag is None or observed_transcript is None:
        return CannotForge("no honest tag to replay")
    if transcript_hash(target_transcript, algo, collisions) == transcript_hash(observed_transcript, algo, collisions):
        return observed_tag
    return CannotForge("no registered collision covers the transcripts")


# ============================================================================
# PARALLEL CONNECTIONS
# ============================================================================

@dataclass
class Sslv2Host:
    """An SSLv2 endpoint serving the same RSA key as the target server."""
    key: RsaToyKey

    def decrypt(self, ciphertext: bytes, budget: WorkBudget):
        return bleichenbacher_decrypt(ciphertext, self.key, budget)


@dataclass
class PaddingOracleHost:
    """Padding checks of the live server session, reachable by replaying records."""
    server_state: Callable[[], Any]

    def recover(self, record: tuple[bytes, bytes], marker: bytes, terminator: bytes, budget: WorkBudget):
        state = self.server_state()
        if state.secrets is None or state.suite is None:
            return Infeasible("server has no session keys yet")
        suite = catalog.get_cipher_suite(state.suite)
        return cbc_recover(record, state.secrets.k_I, state.version, suite.enc, marker, terminator, budget)


# ============================================================================
# SESSION VIEWS
# ============================================================================

@dataclass
class SessionView:
    """What one endpoint has seen and sent, reconstructed from the wire."""
    role: Role
    transcript: list[bytes] = field(default_factory=list)
    client_nonce: bytes = b""
    server_nonce: bytes = b""
    version: Optional[VersionId] = None
    suite: Optional[str] = None
    hello: Optional[ClientHello] = None
    ske: Optional[ServerKeyExchange] = None
    cke: Optional[ClientKeyExchange] = None
    certificate: Optional[Any] = None
    client_share: Optional[Any] = None
    server_share: Optional[Any] = None
    own_keypair: Optional[DhKeyPair] = None
    secrets: Optional[SecretBundle] = None
    records_in: int = 0
    retried: bool = False

    @property
    def expected_family(self) -> Optional[str]:
        if self.suite is None:
            return None
        return catalog.get_cipher_suite(self.suite).kx.family

    @property
    def finished_hash(self) -> Optional[HashId]:
        if self.version is None or self.suite is None:
            return None
        return catalog.finished_hash(self.version, catalog.get_cipher_suite(self.suite))

    @property
    def enc(self) -> Optional[Encryption]:
        return catalog.get_cipher_suite(self.suite).enc if self.suite else None

    def effective_key(self) -> Optional[EffectiveKey]:
        if self.ske is None or self.expected_family is None:
            return None
        try:
            return interpret_key_params(self.ske.param_bytes, self.expected_family, self.ske.algo_label)
        except KeyParamError:
            return None

    def observe(self, message) -> None:
        if isinstance(message, ClientHello):
            self._observe_hello(message)
            return
        if isinstance(message, HelloRetryRequest):
            self.transcript.append(encode_message(message))
            self.retried = True
            return
        if isinstance(message, ServerHello):
            self.version, self.suite, self.server_nonce = message.version, message.suite, message.nonce
            self.server_share = message.key_share
        elif isinstance(message, ServerCertificate):
            self.certificate = message.certificate
        elif isinstance(message, ServerKeyExchange):
            self.ske = message
        elif isinstance(message, ClientKeyExchange):
            self.cke = message
        if message.KIND not in NON_TRANSCRIPT_KINDS:
            self.transcript.append(encode_message(message))

    def _observe_hello(self, hello: ClientHello) -> None:
        encoded = encode_message(hello)
        if self.retried and self.hello is not None and hello.nonce == self.hello.nonce:
            newest = max(hello.supported_versions) if hello.supported_versions else VersionId.TLS12
            if HelloRetryPolicy.for_version(newest).restart_transcript_on_hrr:
                self.transcript = [encoded]
            else:
                self.transcript.append(encoded)
            self.retried = False
        else:
            self.transcript = [encoded]
            self.version = self.suite = None
            self.ske = self.cke = self.secrets = None
            self.own_keypair = None
            self.records_in = 0
        self.hello = hello
        self.client_nonce = hello.nonce
        self.client_share = hello.key_shares[0] if hello.key_shares else None


# ============================================================================
# ADVERSARY
# ============================================================================

class Adversary:
    """
    Runs an AdversaryScript against one session.

    Args:
        script: Rules and resources
        seed: Seed for the adversary's own key shares
        trace: Trace receiving interception and oracle events
        hosts: Parallel connections by name (Sslv2Host, PaddingOracleHost)
    """

    def __init__(self, script: AdversaryScript, seed: int = 0, trace: Optional[Trace] = None,
                 hosts: Optional[dict[str, Any]] = None):
        self.script = script
        self.seed = seed
        self.trace = trace if trace is not None else Trace()
        self.hosts = hosts or {}
        self.budget = WorkBudget(script.budget_units)
        self.knowledge = KnowledgeSet()
        self.collisions = EMPTY_COLLISIONS
        self.views = {Role.CLIENT: SessionView(Role.CLIENT), Role.SERVER: SessionView(Role.SERVER)}
        self._seen: dict[tuple[str, Direction], int] = {}
        self._shares = 0

    # ---- interception -------------------------------------------------

    def intercept(self, message, direction: Direction) -> list[tuple[Direction, Any]]:
        """
        Apply the script to one in-flight message.

        Returns:
            (direction, message) pairs to deliver, possibly empty

        Raises:
            ScriptError: If an edit names a field the message lacks
        """
        key = (message.KIND, direction)
        self._seen[key] = self._seen.get(key, 0) + 1
        occurrence = self._seen[key]
        matching = [r for r in self.script.rules if r.trigger.matches(message, direction, occurrence)]
        action = next((r.action for r in matching if r.action is not None), FORWARD)

        deliveries, delivered = self._apply(action, message, direction)
        for rule in matching:
            if rule.oracle is not None:
                self._run_oracle(rule, message, delivered, direction)

        self.views[direction.sender].observe(message)
        if delivered is not None:
            self.views[direction.receiver].observe(delivered)
        if isinstance(action, Inject):
            self.views[action.direction.receiver].observe(action.message)
        self._note_observation(message, direction)
        for view in self.views.values():
            self._refresh_secrets(view)
        return deliveries

    def _apply(self, action, message, direction):
        if isinstance(action, Drop):
            self.trace.record("adversary", "intercept", message.KIND, direction, action.kind.value)
            return [], None
        if isinstance(action, Modify):
            modified = self._modify(message, direction, action)
            changed = sorted(name for name, _ in action.edits)
            self.trace.record("adversary", "intercept", message.KIND, direction, action.kind.value,
                              fields=changed)
            return [(direction, modified)], modified
        if isinstance(action, Inject):
            self.trace.record("adversary", "intercept", action.message.KIND, action.direction,
                              action.kind.value, trigger=message.KIND, in_reply=action.in_reply)
            injected = [(action.direction, action.message)]
            if action.in_reply:
                return injected, None
            return [(direction, message)] + injected, message
        self.trace.record("adversary", "intercept", message.KIND, direction, ActionKind.FORWARD.value)
        return [(direction, message)], message

    def _modify(self, message, direction: Direction, action: Modify):
        changes = {}
        for name, value in action.edits:
            check_field(type(message), name)
            if isinstance(value, str) and value in TOKENS:
                resolved = self._resolve_token(value, name, message, direction)
                if resolved is None:
                    self.trace.record("adversary", "note", message.KIND, direction,
                                      unresolved=value, field=name)
                    continue
                changes[name] = resolved
            else:
                changes[name] = coerce_field(type(message), name, value)
        return replace(message, **changes) if changes else message

    def _resolve_token(self, token: str, name: str, message, direction: Direction):
        source = self.views[direction.sender]
        target = self.views[direction.receiver]
        if token == TOKEN_FINISHED:
            return self._forge_for(target, message)
        if token == TOKEN_SHARE:
            return self._adversary_share(target)
        if token == TOKEN_REENCRYPT:
            return self._reencrypt(message, source, target, name)
        return None

    def _forge_for(self, target: SessionView, message) -> Optional[bytes]:
        if target.secrets is None or target.finished_hash is None:
            return None
        tag = forge_finished(self.knowledge, tuple(target.transcript), target.finished_hash,
                             self.collisions, ms=target.secrets.ms)
        if isinstance(tag, CannotForge):
            return None
        self.knowledge.add("forged", f"{message.KIND} for {target.role.value}", tag,
                           "finished_mac with recovered ms")
        return tag

    def _adversary_share(self, target: SessionView) -> Optional[bytes]:
        key = target.effective_key()
        if key is None or key.dh is None:
            return None
        if target.own_keypair is None or target.own_keypair.group != key.dh.group:
            self._shares += 1
            target.own_keypair = dh_keygen(key.dh.group, derive_seed(self.seed, 97, self._shares))
            self.knowledge.add("own_share", key.dh.group.label, target.own_keypair.secret_exponent,
                               "adversary keygen")
        return pack_ints((target.own_keypair.public_value,))

    def _reencrypt(self, message: AppData, source: SessionView, target: SessionView, name: str):
        if source.secrets is None or target.secrets is None:
            return None
        plaintext = open_record(source.secrets.k_I, message.ciphertext, message.tag,
                                source.enc, source.records_in)
        if plaintext is None:
            return None
        ciphertext, tag = seal_record(target.secrets.k_I, plaintext, target.enc, target.records_in)
        if name == "ciphertext":
            self.knowledge.add("forged", f"record for {target.role.value}", ciphertext,
                               "re-encrypted under the server session key")
            return ciphertext
        return tag

    # ---- oracles ------------------------------------------------------

    def _run_oracle(self, rule: ScriptRule, original, delivered, direction: Direction) -> None:
        handle = ORACLE_HANDLES.get(rule.oracle)
        if handle is not None and (handle not in self.script.parallel_connections or handle not in self.hosts):
            self._oracle_event(rule.oracle, direction, Infeasible(f"no {handle} connection"))
            return
        before = self.budget.spent
        if rule.oracle is OracleKind.RECOVER_KEY:
            result = self._recover_key(rule, original)
        elif rule.oracle is OracleKind.BLEICHENBACHER:
            result = self._bleichenbacher(original)
        elif rule.oracle is OracleKind.REGISTER_COLLISION:
            result = self._register_collision(rule, original, delivered)
        else:
            result = self._cbc_recover(rule, original)
        self._oracle_event(rule.oracle, direction, result, self.budget.spent - before)

    def _oracle_event(self, oracle: OracleKind, direction, result, cost: int = 0) -> None:
        ok = not isinstance(result, Infeasible)
        self.trace.record("adversary", "oracle", oracle.value, direction,
                          ok=ok, cost=cost, reason="" if ok else result.reason)

    def _recover_key(self, rule: ScriptRule, message):
        client = self.views[Role.CLIENT]
        family = rule.param("interpret_as", ADVERSARY_DEFAULTS["interpret_family"]) or client.expected_family
        if isinstance(message, ServerKeyExchange):
            if family is None:
                return Infeasible("client view has no negotiated suite")
            try:
                key = interpret_key_params(message.param_bytes, family, message.algo_label)
            except KeyParamError as exc:
                return Infeasible(str(exc))
            params = key.dh if key.dh is not None else key.rsa
        elif isinstance(message, ClientKeyExchange):
            key = client.effective_key()
            if key is None or key.dh is None:
                return Infeasible("no DH group for the client share")
            try:
                (value,) = unpack_ints(message.param_bytes)
            except (EncodingError, ValueError):
                return Infeasible("client share is not one integer")
            params = DhPublicValue(key.dh.group, value)
        else:
            return Infeasible(f"no key parameters in {message.KIND}")
        attempt_key_recovery(self.knowledge, params, self.budget, f"recover_private on {message.KIND}")
        if not self._knows(params):
            return Infeasible("key too strong or budget exhausted")
        return True

    def _knows(self, params: Union[DhPublicValue, RsaPublicKey]) -> bool:
        if isinstance(params, DhPublicValue):
            return (params.group.prime_p, params.public_value) in self.knowledge.dh_secrets
        return params.modulus_n in self.knowledge.rsa_private

    def _bleichenbacher(self, message):
        if not isinstance(message, ClientKeyExchange) or message.algo_label != "RSA":
            return Infeasible("decryption oracle needs an RSA ClientKeyExchange")
        result = self.hosts["sslv2_server"].decrypt(message.param_bytes, self.budget)
        if isinstance(result, Infeasible):
            return result
        self.knowledge.learn_pms(message.param_bytes, result, "bleichenbacher oracle via SSLv2 host")
        return True

    def _register_collision(self, rule: ScriptRule, original, delivered):
        if delivered is None or delivered == original:
            return Infeasible("nothing to collide")
        algo = STRONG_HASH if rule.param("hash", "WEAK_MD5SHA1") == HashId.STRONG.value else WEAK_HASH
        try:
            table = register_collision(self.collisions, encode_message(original), encode_message(delivered),
                                       algo, self.budget)
        except OracleUnavailable as exc:
            return Infeasible(str(exc))
        if isinstance(table, Infeasible):
            return table
        self.collisions = table
        self.knowledge.add("collision", original.KIND, len(table.entries), "register_collision")
        return True

    def _cbc_recover(self, rule: ScriptRule, message):
        if not isinstance(message, AppData):
            return Infeasible("padding oracle needs an application record")
        marker = rule.param("marker", APP_DATA["secret_marker"]).encode()
        terminator = rule.param("terminator", APP_DATA["secret_terminator"]).encode()
        result = self.hosts["server_padding_oracle"].recover(
            (message.ciphertext, message.tag), marker, terminator, self.budget)
        if isinstance(result, Infeasible):
            return result
        self.knowledge.add("plaintext", "cbc secret", result, "padding oracle")
        return True

    # ---- passive observation -------------------------------------------

    def _note_observation(self, message, direction: Direction) -> None:
        self.knowledge.add("observed", message.KIND, encode_message(message), f"wire {direction.value}")
        if isinstance(message, PlainMail):
            self.knowledge.add("plaintext", "plain mail", message.payload, "observed in cleartext")
        if not isinstance(message, AppData):
            return
        view = self.views[direction.sender]
        if view.enc is Encryption.NULL:
            self.knowledge.add("plaintext", "NULL record", message.ciphertext, "NULL encryption")
        elif view.secrets is not None:
            plaintext = open_record(view.secrets.k_I, message.ciphertext, message.tag, view.enc,
                                    view.records_in)
            if plaintext is not None:
                self.knowledge.add("plaintext", f"{view.role.value} record", plaintext,
                                   f"decrypted with the {view.role.value} session k_I")
        for v in self.views.values():
            v.records_in += 1

    def _refresh_secrets(self, view: SessionView) -> None:
        if view.secrets is not None or view.version is None:
            return
        pms = self._view_pms(view)
        if pms is None:
            return
        view.secrets = derive_secrets(pms, view.client_nonce, view.server_nonce)
        self.knowledge.add("ms", f"{view.role.value} session", view.secrets.ms, "derive_secrets")
        self.knowledge.add("keys", f"{view.role.value} session", (view.secrets.k_I, view.secrets.k_R),
                           "derive_secrets")

    def _view_pms(self, view: SessionView) -> Optional[bytes]:
        if view.version is not None and view.version.is_tls13:
            return self._tls13_pms(view)
        cke = view.cke
        if cke is None:
            return None
        if cke.algo_label == "RSA":
            return self._rsa_pms(view, cke)
        return self._dh_pms(view, cke)

    def _rsa_pms(self, view: SessionView, cke: ClientKeyExchange) -> Optional[bytes]:
        known = self.knowledge.pms_by_ciphertext.get(cke.param_bytes)
        if known is not None:
            return known
        candidates = []
        key = view.effective_key()
        if key is not None and key.rsa is not None:
            candidates.append(key.rsa)
        if view.certificate is not None:
            candidates.append(certificate_key(view.certificate))
        for public in candidates:
            private = self.knowledge.rsa_private.get(public.modulus_n)
            if private is not None:
                e, d = private
                try:
                    return rsa_unwrap_pms(cke.param_bytes, RsaToyKey(public.modulus_n, e, d))
                except KeyParamError:
                    continue
        return None

    def _dh_pms(self, view: SessionView, cke: ClientKeyExchange) -> Optional[bytes]:
        key = view.effective_key()
        if key is None or key.dh is None:
            return None
        try:
            (client_value,) = unpack_ints(cke.param_bytes)
        except (EncodingError, ValueError):
            return None
        return self._shared(key.dh.group, key.dh.public_value, client_value, view.own_keypair)

    def _tls13_pms(self, view: SessionView) -> Optional[bytes]:
        if view.client_share is None or view.server_share is None:
            return None
        group = catalog.get_group(view.server_share.group)
        return self._shared(group, view.server_share.public_value, view.client_share.public_value,
                            view.own_keypair)

    def _shared(self, group, server_value: int, client_value: int, own: Optional[DhKeyPair]) -> Optional[bytes]:
        p = group.prime_p
        if own is not None and own.group == group and own.public_value == client_value:
            shared = pow(server_value, own.secret_exponent, p)
        elif (p, server_value) in self.knowledge.dh_secrets:
            shared = pow(client_value, self.knowledge.dh_secrets[(p, server_value)], p)
        elif (p, client_value) in self.knowledge.dh_secrets:
            shared = pow(server_value, self.knowledge.dh_secrets[(p, client_value)], p)
        else:
            return None
        return int_to_bytes(shared, byte_length(p))
