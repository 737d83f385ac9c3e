"""
Experiment harness: runs scenarios, attacks and the full classification matrix.

A session run wires two endpoints (plain TLS or SMTP with STARTTLS) and an
optional scripted adversary into the network runner, then reduces what
happened to a SessionOutcome. Proxied scenarios use the proxy runner
instead. Reports are deterministic for a given seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from multiprocessing.pool import ThreadPool
from typing import Optional, Union

from core import catalog
from core.adversary import Adversary, PaddingOracleHost, Sslv2Host
from core.app_layer import (
    ProxyResult,
    ProxyScenario,
    SmtpConfig,
    SmtpState,
    new_smtp_client,
    new_smtp_server,
    run_proxy_session,
    smtp_step,
)
from core.attacks import AttackSpec, all_attacks, get_attack
from core.config import REPORT, SESSION
from core.crypto_model import derive_seed
from core.errors import ConfigError, FormatError
from core.handshake import EndpointState, client_step, new_client_state, new_server_state, server_step
from core.models import AbortReason, Damage, NegotiatedMode, Role, VersionId
from core.network import NetworkResult, Party, Trace, run_network
from core.taxonomy import (
    ClassificationReport,
    SecurityGoalsRecord,
    SessionOutcome,
    verify_classification,
)
from utils.codec import to_plain
from utils.scenario_io import Scenario, SmtpScenario, scenario_from_dict

logger = logging.getLogger(__name__)

# Seed offsets for the parties of one session
_CLIENT_SEED, _SERVER_SEED, _ADVERSARY_SEED = 1, 2, 3


# ============================================================================
# SESSIONS
# ============================================================================

def _tls_state(state: Union[EndpointState, SmtpState]) -> EndpointState:
    return state.tls if isinstance(state, SmtpState) else state


def _tls_mode(state: EndpointState) -> Optional[NegotiatedMode]:
    """Mode a connected endpoint agreed on; the group only counts for DH and EC key exchange."""
    if not state.connected:
        return None
    suite = catalog.get_cipher_suite(state.suite)
    group = state.group if suite.kx.family != "RSA" else None
    return NegotiatedMode(state.version, state.suite, group, layer=True)


def _parties(scenario: Scenario) -> tuple[Party, Party]:
    seed = scenario.seed
    client_seed, server_seed = derive_seed(seed, _CLIENT_SEED), derive_seed(seed, _SERVER_SEED)
    if isinstance(scenario.app_layer, SmtpScenario):
        smtp = scenario.app_layer
        client_config = SmtpConfig(Role.CLIENT, scenario.client, policy=smtp.policy)
        server_config = SmtpConfig(Role.SERVER, scenario.server, offers_starttls=smtp.offers_starttls,
                                   domain="server.example")
        return (
            Party(Role.CLIENT, new_smtp_client(client_seed, scenario.app_payload),
                  lambda s, m, c: smtp_step(s, client_config, m, c)),
            Party(Role.SERVER, new_smtp_server(server_seed),
                  lambda s, m, c: smtp_step(s, server_config, m, c)),
        )
    return (
        Party(Role.CLIENT, new_client_state(client_seed, scenario.app_payload),
              lambda s, m, c: client_step(s, scenario.client, m, c)),
        Party(Role.SERVER, new_server_state(server_seed),
              lambda s, m, c: server_step(s, scenario.server, m, c)),
    )


def drive_session(scenario: Scenario, trace: Trace) -> tuple[NetworkResult, Optional[Adversary]]:
    """
    Run the endpoints of a TLS or SMTP scenario, with its adversary if scripted.

    Returns:
        Tuple of (network result, adversary or None)
    """
    client, server = _parties(scenario)
    adversary = None
    if scenario.script is not None:
        hosts = {
            "server_padding_oracle": PaddingOracleHost(lambda: _tls_state(server.state)),
        }
        if scenario.server.rsa_key is not None:
            hosts["sslv2_server"] = Sslv2Host(scenario.server.rsa_key)
        adversary = Adversary(scenario.script, seed=derive_seed(scenario.seed, _ADVERSARY_SEED),
                              trace=trace, hosts=hosts)
    result = run_network(client, server, adversary, trace=trace,
                         max_timeouts=SESSION["max_timeouts"], max_deliveries=SESSION["max_deliveries"])
    return result, adversary


def _client_mode(state: Union[EndpointState, SmtpState]) -> Optional[NegotiatedMode]:
    if isinstance(state, SmtpState):
        return state.negotiated
    return _tls_mode(state)


def _client_completed(state: Union[EndpointState, SmtpState]) -> bool:
    return state.completed if isinstance(state, SmtpState) else state.connected


def preferred_mode(scenario: Scenario) -> Optional[NegotiatedMode]:
    """
    Mode the two configurations agree on without an adversary.

    Returns:
        NegotiatedMode, or None if even the honest run does not complete
    """
    honest = replace(scenario, script=None)
    if isinstance(honest.app_layer, ProxyScenario):
        honest = replace(honest, app_layer=None)
    result, _ = drive_session(honest, Trace())
    return _client_mode(result.client_state)


def _first_abort(trace: Trace) -> tuple[Optional[AbortReason], Optional[Role]]:
    for event in trace.of("abort"):
        try:
            return AbortReason(event.kind), Role(event.actor)
        except ValueError:
            continue
    return None, None


def _session_goals(payload: bytes, client: EndpointState, server: EndpointState,
                   adversary: Optional[Adversary]) -> SecurityGoalsRecord:
    secrecy = integrity = authentication = ""
    if adversary is not None:
        knowledge = adversary.knowledge
        for entry in knowledge.of_kind("plaintext"):
            if entry.value and bytes(entry.value) in payload:
                secrecy = f"adversary holds {len(entry.value)} bytes of client data ({entry.label} via {entry.derivation})"
                break
        forged = {entry.label for entry in knowledge.of_kind("forged")}
        if server.received_app and "record for server" in forged:
            integrity = "server accepted an application record the adversary re-encrypted"
        if client.connected and "SF for client" in forged:
            authentication = "client accepted a server Finished forged by the adversary"
    if not authentication and client.connected and server.connected and client.transcript != server.transcript:
        authentication = "client and server completed over different handshake transcripts"
    return SecurityGoalsRecord(
        secrecy_broken=bool(secrecy),
        integrity_broken=bool(integrity),
        authentication_broken=bool(authentication),
        secrecy_witness=secrecy,
        integrity_witness=integrity,
        authentication_witness=authentication,
    )


def _outcome(scenario: Scenario, negotiated, preferred, completed, goals, knowledge, trace, notes) -> SessionOutcome:
    aborted, party = _first_abort(trace)
    return SessionOutcome(
        negotiated=negotiated,
        preferred=preferred,
        completed=completed,
        aborted=aborted,
        abort_party=party,
        goals=goals,
        knowledge_summary=knowledge,
        trace=trace,
        client_suites=scenario.client.suites_by_preference,
        server_suites=scenario.server.suites_by_preference,
        client_groups=scenario.client.groups_by_preference,
        server_groups=scenario.server.groups_by_preference,
        notes=tuple(notes),
    )


def _proxy_goals(scenario: Scenario, result: ProxyResult) -> SecurityGoalsRecord:
    issuer = scenario.app_layer.proxy_issuer
    read = any(payload == scenario.app_payload for payload in result.read_payloads)
    accepted = result.certificate_accepted and result.client_state.connected
    return SecurityGoalsRecord(
        secrecy_broken=read,
        authentication_broken=accepted,
        secrecy_witness="proxy decrypted the client payload" if read else "",
        authentication_witness=f"client accepted a certificate issued by {issuer}" if accepted else "",
    )


def _run_proxied(scenario: Scenario, notes) -> SessionOutcome:
    trace = Trace()
    result = run_proxy_session(scenario.app_layer, scenario.client, scenario.server, scenario.app_payload,
                               seed=derive_seed(scenario.seed, _CLIENT_SEED), trace=trace)
    client_mode = _tls_mode(result.client_state)
    negotiated = result.upstream_mode if result.upstream_mode is not None else client_mode
    knowledge = {
        "counts": {"plaintext": len(result.read_payloads)} if result.read_payloads else {},
        "facts": [f"plaintext:proxied record <- {scenario.app_layer.behavior.value}"
                  for _ in result.read_payloads],
    }
    return _outcome(scenario, negotiated, preferred_mode(scenario), result.client_state.connected,
                    _proxy_goals(scenario, result), knowledge, trace, notes)


def run_session(scenario: Scenario, notes: tuple[str, ...] = ()) -> SessionOutcome:
    """
    Execute one scenario and evaluate it.

    Args:
        scenario: Endpoint configurations, app layer, script and seed
        notes: Assumption notes to carry into the outcome

    Returns:
        SessionOutcome with negotiated and preferred modes, goals and trace

    Raises:
        ConfigError: If the scenario is malformed
    """
    if not isinstance(scenario, Scenario):
        raise ConfigError(f"expected a Scenario, got {type(scenario).__name__}")
    logger.info("running session %s (seed %d)", scenario.name, scenario.seed)
    if isinstance(scenario.app_layer, ProxyScenario):
        return _run_proxied(scenario, notes)

    trace = Trace()
    result, adversary = drive_session(scenario, trace)
    client, server = _tls_state(result.client_state), _tls_state(result.server_state)
    goals = _session_goals(scenario.app_payload, client, server, adversary)
    knowledge = adversary.knowledge.summary() if adversary else {"counts": {}, "facts": []}
    outcome = _outcome(scenario, _client_mode(result.client_state), preferred_mode(scenario),
                       _client_completed(result.client_state), goals, knowledge, trace, notes)
    logger.debug("session %s: damage %s, aborted %s", scenario.name, outcome.damage.value,
                 outcome.aborted.value if outcome.aborted else None)
    return outcome


# ============================================================================
# ATTACKS AND MATRIX
# ============================================================================

@dataclass
class AttackRun:
    """
    Vulnerable and patched runs of one attack.

    Attributes:
        attack: The attack definition
        vulnerable: Outcome of the vulnerable scenario
        patched: Outcome of the patched scenario
        report: Classification check of the vulnerable run
    """
    attack: AttackSpec
    vulnerable: SessionOutcome
    patched: SessionOutcome
    report: ClassificationReport

    @property
    def patch_holds(self) -> bool:
        return self.patched.damage is not Damage.BROKEN


def run_attack(attack_id, seed: Optional[int] = None) -> AttackRun:
    """
    Run an attack in its vulnerable and patched configurations.

    Args:
        attack_id: 7, "7" or "07"
        seed: Overrides the scenario seed

    Returns:
        AttackRun

    Raises:
        NotFound: If the id is unknown
    """
    attack = get_attack(attack_id)
    vulnerable = run_session(attack.scenario(seed=seed), attack.notes)
    patched = run_session(attack.scenario(patched=True, seed=seed), attack.notes)
    report = verify_classification(attack.id, vulnerable)
    if not report.matches:
        logger.warning("attack %s: observed %s via %s, declared %s via %s", attack.id,
                       report.observed_damage.value, sorted(m.value for m in report.observed_methods),
                       report.declared.damage.value, report.declared.method.value)
    if not (patched.damage is Damage.NONE):
        logger.warning("attack %s: patched scenario still %s", attack.id, patched.damage.value)
    return AttackRun(attack, vulnerable, patched, report)


def _mode_dict(mode: Optional[NegotiatedMode]) -> Optional[dict]:
    return to_plain(mode) if mode is not None else None


@dataclass(frozen=True)
class MatrixRow:
    """One attack's line of the experiment report."""
    attack_id: str
    name: str
    theoretical: bool
    declared: dict
    observed_damage: Damage
    observed_methods: tuple[str, ...]
    damage_match: bool
    method_match: bool
    negotiated: Optional[dict]
    preferred: Optional[dict]
    goals: dict
    aborted: Optional[str]
    patched_damage: Damage
    patched_aborted: Optional[str]
    patch_description: str
    element_note: str
    notes: tuple[str, ...]
    trace_digest: str
    patched_trace_digest: str

    @classmethod
    def from_run(cls, run: AttackRun) -> "MatrixRow":
        report, vulnerable, patched = run.report, run.vulnerable, run.patched
        return cls(
            attack_id=run.attack.id,
            name=run.attack.name,
            theoretical=run.attack.theoretical,
            declared=to_plain(report.declared),
            observed_damage=report.observed_damage,
            observed_methods=tuple(sorted(m.value for m in report.observed_methods)),
            damage_match=report.damage_match,
            method_match=report.method_match,
            negotiated=_mode_dict(vulnerable.negotiated),
            preferred=_mode_dict(vulnerable.preferred),
            goals=vulnerable.goals.to_dict(),
            aborted=vulnerable.aborted.value if vulnerable.aborted else None,
            patched_damage=patched.damage,
            patched_aborted=patched.aborted.value if patched.aborted else None,
            patch_description=run.attack.patch_description,
            element_note=report.element_note,
            notes=run.attack.notes,
            trace_digest=vulnerable.trace.digest(),
            patched_trace_digest=patched.trace.digest(),
        )

    @property
    def matches(self) -> bool:
        return self.damage_match and self.method_match

    def to_dict(self) -> dict:
        return to_plain({
            "id": self.attack_id,
            "attack": self.name,
            "theoretical": self.theoretical,
            "declared": self.declared,
            "observed": {
                "damage": self.observed_damage,
                "methods": list(self.observed_methods),
                "negotiated": self.negotiated,
                "preferred": self.preferred,
                "goals": self.goals,
                "aborted": self.aborted,
                "trace_digest": self.trace_digest,
            },
            "damage_match": self.damage_match,
            "method_match": self.method_match,
            "patched": {
                "damage": self.patched_damage,
                "aborted": self.patched_aborted,
                "description": self.patch_description,
                "trace_digest": self.patched_trace_digest,
            },
            "element_note": self.element_note,
            "notes": list(self.notes),
        })

    @classmethod
    def from_dict(cls, data: dict) -> "MatrixRow":
        observed, patched = data["observed"], data["patched"]
        return cls(
            attack_id=data["id"],
            name=data["attack"],
            theoretical=data["theoretical"],
            declared=data["declared"],
            observed_damage=Damage(observed["damage"]),
            observed_methods=tuple(observed["methods"]),
            damage_match=data["damage_match"],
            method_match=data["method_match"],
            negotiated=observed["negotiated"],
            preferred=observed["preferred"],
            goals=observed["goals"],
            aborted=observed["aborted"],
            patched_damage=Damage(patched["damage"]),
            patched_aborted=patched["aborted"],
            patch_description=patched["description"],
            element_note=data["element_note"],
            notes=tuple(data["notes"]),
            trace_digest=observed["trace_digest"],
            patched_trace_digest=patched["trace_digest"],
        )


@dataclass
class ExperimentReport:
    """
    Result of running every attack.

    Attributes:
        seed: Seed every scenario ran under
        rows: One row per attack, ordered by id
    """
    seed: int
    rows: list[MatrixRow] = field(default_factory=list)

    @property
    def damage_matches(self) -> int:
        return sum(row.damage_match for row in self.rows)

    @property
    def method_matches(self) -> int:
        return sum(row.method_match for row in self.rows)

    @property
    def all_match(self) -> bool:
        return all(row.matches for row in self.rows)

    @property
    def patched_broken(self) -> list[str]:
        return [row.attack_id for row in self.rows if row.patched_damage is Damage.BROKEN]

    @property
    def succeeded(self) -> bool:
        return self.all_match and not self.patched_broken

    def damage_counts(self, patched: bool = False) -> dict[str, int]:
        counts = {damage.value: 0 for damage in Damage}
        for row in self.rows:
            counts[(row.patched_damage if patched else row.observed_damage).value] += 1
        return counts

    def summary(self) -> dict:
        return {
            "attacks": len(self.rows),
            "damage_matches": self.damage_matches,
            "method_matches": self.method_matches,
            "observed": self.damage_counts(),
            "patched": self.damage_counts(patched=True),
            "mismatched": [row.attack_id for row in self.rows if not row.matches],
        }

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT["schema_version"],
            "seed": self.seed,
            "summary": self.summary(),
            "rows": [row.to_dict() for row in self.rows],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        """
        Rebuild a report from its JSON form.

        Raises:
            FormatError: If the data is not a report of this schema version
        """
        if not isinstance(data, dict) or data.get("schema_version") != REPORT["schema_version"]:
            raise FormatError(f"not a report of schema version {REPORT['schema_version']}")
        try:
            return cls(seed=data["seed"], rows=[MatrixRow.from_dict(row) for row in data["rows"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed report: {exc}") from exc


def run_matrix(seed: int = SESSION["default_seed"], max_workers: int = 1,
               attack_ids: Optional[list] = None) -> ExperimentReport:
    """
    Run every attack (or the listed ones) and compare with the classification table.

    Args:
        seed: Seed applied to every scenario
        max_workers: Attacks run concurrently; rows are ordered by id either way
        attack_ids: Subset of attacks to run

    Returns:
        ExperimentReport
    """
    attacks = all_attacks() if attack_ids is None else [get_attack(a) for a in attack_ids]
    ids = [attack.id for attack in attacks]
    logger.info("running %d attacks with seed %d", len(ids), seed)
    if max_workers > 1:
        with ThreadPool(max_workers) as pool:
            runs = pool.map(lambda attack_id: run_attack(attack_id, seed), ids)
    else:
        runs = [run_attack(attack_id, seed) for attack_id in ids]
    rows = sorted((MatrixRow.from_run(run) for run in runs), key=lambda row: row.attack_id)
    report = ExperimentReport(seed=seed, rows=rows)
    logger.info("damage matches %d/%d, method matches %d/%d", report.damage_matches, len(rows),
                report.method_matches, len(rows))
    return report


# ============================================================================
# REPORTS
# ============================================================================

MARKDOWN_COLUMNS = ("No.", "Attack", "Element", "Vuln.", "Method", "Damage", "Observed", "Methods seen", "Patched")


def _markdown(report: ExperimentReport) -> str:
    summary = report.summary()
    lines = [
        f"# Downgrade attack matrix (seed {report.seed})",
        "",
        f"Damage matches: {summary['damage_matches']}/{summary['attacks']}. "
        f"Method matches: {summary['method_matches']}/{summary['attacks']}. "
        f"Patched runs broken: {len(report.patched_broken)}.",
        "",
        "| " + " | ".join(MARKDOWN_COLUMNS) + " |",
        "|" + "|".join("---" for _ in MARKDOWN_COLUMNS) + "|",
    ]
    for row in report.rows:
        name = f"{row.name}*" if row.theoretical else row.name
        observed = row.observed_damage.value + ("" if row.damage_match else " (mismatch)")
        methods = ", ".join(row.observed_methods) or "-"
        if not row.method_match:
            methods += " (mismatch)"
        patched = row.patched_damage.value
        if row.patched_aborted:
            patched += f" ({row.patched_aborted})"
        declared = row.declared
        lines.append("| " + " | ".join((
            row.attack_id, name, declared["element"], declared["vulnerability"], declared["method"],
            declared["damage"], observed, methods, patched,
        )) + " |")
    lines += ["", "\\* theoretical attack, run under worst-case assumptions", ""]
    return "\n".join(lines)


def emit_report(report: ExperimentReport, fmt: str = "json") -> bytes:
    """
    Serialize a report.

    Args:
        report: Matrix report
        fmt: "json" or "md"

    Returns:
        UTF-8 bytes; identical for identical reports

    Raises:
        FormatError: For any other format
    """
    if fmt == "json":
        return (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode("utf-8")
    if fmt in ("md", "markdown"):
        return _markdown(report).encode("utf-8")
    raise FormatError(f"unknown report format {fmt!r}; use json or md")


def outcome_to_dict(outcome: SessionOutcome, include_trace: bool = True) -> dict:
    """Plain-data view of a single session for the session and run commands."""
    data = {
        "negotiated": _mode_dict(outcome.negotiated),
        "preferred": _mode_dict(outcome.preferred),
        "completed": outcome.completed,
        "aborted": outcome.aborted.value if outcome.aborted else None,
        "abort_party": outcome.abort_party.value if outcome.abort_party else None,
        "damage": outcome.damage.value,
        "goals": outcome.goals.to_dict(),
        "knowledge": outcome.knowledge_summary,
        "notes": list(outcome.notes),
        "trace_digest": outcome.trace.digest(),
    }
    if include_trace:
        data["trace"] = outcome.trace.to_dicts()
    return to_plain(data)


# ============================================================================
# BENIGN SESSIONS
# ============================================================================

# Mixed configurations on top of the per-(version, suite) grid
_MIXED_BENIGN = (
    ("tls13_client_tls12_server", ["TLS10", "TLS13_FINAL"], ["TLS10", "TLS12"],
     ["TLS13_AES_128_GCM_SHA256", "ECDHE_RSA_WITH_AES_128_GCM_SHA256"], ["ECDHE_RSA_WITH_AES_128_GCM_SHA256"]),
    ("tls12_client_tls13_server", ["TLS10", "TLS12"], ["TLS12", "TLS13_FINAL"],
     ["ECDHE_RSA_WITH_AES_128_GCM_SHA256"], ["TLS13_AES_128_GCM_SHA256", "ECDHE_RSA_WITH_AES_128_GCM_SHA256"]),
    ("ssl30_client_tls11_server", ["SSL30", "TLS12"], ["TLS10", "TLS11"],
     ["RSA_WITH_AES_128_CBC_SHA"], ["RSA_WITH_AES_128_CBC_SHA"]),
)


def _benign_dict(name: str, client_range, server_range, client_suites, server_suites,
                 seed: int, client_groups=None, server_groups=None) -> dict:
    client = {"version_range": list(client_range), "suites": list(client_suites)}
    server = {"version_range": list(server_range), "suites": list(server_suites)}
    if client_groups:
        client["groups"] = list(client_groups)
    if server_groups:
        server["groups"] = list(server_groups)
    return {"schema_version": 1, "name": name, "seed": seed, "client": client, "server": server,
            "app_layer": None, "script": None}


def benign_pairs(seed: int = SESSION["default_seed"]) -> list[Scenario]:
    """
    Adversary-free scenarios for every (version, suite) pair the feature table allows.

    Both endpoints are pinned to one version and one suite. A few mixed
    configurations exercise version negotiation and HelloRetryRequest.

    Returns:
        Scenarios ordered by version, then suite id
    """
    scenarios = []
    for version in VersionId:
        for suite in catalog.get_all_suites():
            if not suite.supports(version):
                continue
            pinned = [version.value, version.value]
            name = f"benign_{version.value}_{suite.suite_id}"
            scenarios.append(scenario_from_dict(
                _benign_dict(name, pinned, pinned, [suite.suite_id], [suite.suite_id], seed)))
    for name, client_range, server_range, client_suites, server_suites in _MIXED_BENIGN:
        scenarios.append(scenario_from_dict(
            _benign_dict(f"benign_{name}", client_range, server_range, client_suites, server_suites, seed)))
    for version in (VersionId.TLS13_DRAFT10, VersionId.TLS13_FINAL):
        pinned = [version.value, version.value]
        scenarios.append(scenario_from_dict(_benign_dict(
            f"benign_{version.value}_hello_retry", pinned, pinned,
            ["TLS13_AES_128_GCM_SHA256"], ["TLS13_AES_128_GCM_SHA256"], seed,
            client_groups=["ec_m31", "ec_m127"], server_groups=["ec_m127"])))
    return scenarios
