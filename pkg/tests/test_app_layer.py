from __future__ import annotations

import pytest

from core.app_layer import (
    PolicyMode,
    ProxyScenario,
    SmtpConfig,
    SmtpPhase,
    new_smtp_client,
    new_smtp_server,
    run_proxy_session,
    smtp_step,
)
from core.harness import run_session
from core.messages import START, TIMEOUT, Capabilities, Ehlo, SmtpReply, StartTls
from core.models import AbortReason, Damage, ProxyBehavior, Role, UpgradePolicy
from tests.conftest import ECDHE_GCM, RSA_CBC, endpoint_dict
from utils.scenario_io import SCENARIO_DIR, load_scenario

MAIL = b"MAIL FROM:<a@example>\r\nsecret body\r\n"
STRIP_STARTTLS = {"rules": [{"trigger": {"kind": "CAPS", "direction": "to_client"},
                             "action": {"type": "modify", "edits": {"capabilities": ["PIPELINING"]}}}]}


def _smtp(*, policy: str = "FAIL_CLOSED", offers_starttls: bool = True) -> dict:
    return {"type": "smtp", "client_policy": policy, "server_offers_starttls": offers_starttls}


def _proxy(*, behavior: str = "FORWARD_PLAINTEXT") -> dict:
    return {"type": "proxy", "proxy_issuer": "Corp Inspection CA", "behavior": behavior}


# ============================================================================
# SMTP STATE MACHINE
# ============================================================================

def test_client_upgrade_sequence(make_endpoint):
    config = SmtpConfig(Role.CLIENT, make_endpoint())
    state, sent = smtp_step(new_smtp_client(1, MAIL), config, START)
    assert [m.KIND for m in sent] == ["EHLO"]
    state, sent = smtp_step(state, config, Capabilities(("PIPELINING", "STARTTLS")))
    assert sent == [StartTls()]
    state, sent = smtp_step(state, config, SmtpReply(220, "Ready"))
    assert state.tunnel
    assert [m.KIND for m in sent] == ["CH"]


@pytest.mark.parametrize("policy,plaintext", [(UpgradePolicy.FAIL_OPEN, True), (UpgradePolicy.FAIL_CLOSED, False)])
def test_missing_starttls_follows_policy(make_endpoint, policy, plaintext):
    config = SmtpConfig(Role.CLIENT, make_endpoint(), policy=PolicyMode(policy))
    state, _ = smtp_step(new_smtp_client(1, MAIL), config, START)
    state, sent = smtp_step(state, config, Capabilities(("PIPELINING",)))
    if plaintext:
        assert state.phase is SmtpPhase.PLAIN_SENT
        assert sent[0].payload == MAIL
    else:
        assert sent == []
        assert state.aborted is AbortReason.UPGRADE_REFUSED


def test_timeout_waiting_for_ready_counts_as_upgrade_failure(make_endpoint):
    config = SmtpConfig(Role.CLIENT, make_endpoint(), policy=PolicyMode(UpgradePolicy.FAIL_OPEN))
    state, _ = smtp_step(new_smtp_client(1, MAIL), config, START)
    state, _ = smtp_step(state, config, Capabilities(("STARTTLS",)))
    assert state.waiting
    state, sent = smtp_step(state, config, TIMEOUT)
    assert state.phase is SmtpPhase.PLAIN_SENT
    assert [m.KIND for m in sent] == ["MAIL"]


def test_server_refuses_unknown_verb(make_endpoint):
    config = SmtpConfig(Role.SERVER, make_endpoint(Role.SERVER), domain="server.example")
    state, (caps,) = smtp_step(new_smtp_server(2), config, Ehlo("client.example"))
    assert "STARTTLS" in caps.capabilities
    state, (reply,) = smtp_step(state, config, StartTls(verb="XXXXXXXX"))
    assert reply.code == 502
    assert state.phase is SmtpPhase.WAIT_COMMAND


# ============================================================================
# SMTP SESSIONS
# ============================================================================

def test_starttls_session_runs_tls(make_scenario):
    outcome = run_session(make_scenario(app_layer=_smtp()))
    assert outcome.completed
    assert outcome.negotiated.layer
    assert outcome.negotiated.suite == ECDHE_GCM
    assert outcome.damage is Damage.NONE


def test_plaintext_without_adversary_is_not_a_downgrade(make_scenario):
    outcome = run_session(make_scenario(app_layer=_smtp(policy="FAIL_OPEN", offers_starttls=False)))
    assert outcome.completed
    assert not outcome.negotiated.layer
    assert not outcome.preferred.layer
    assert outcome.damage is Damage.NONE


def test_stripping_against_fail_open_client_is_broken(make_scenario):
    outcome = run_session(make_scenario(app_layer=_smtp(policy="FAIL_OPEN"), script=STRIP_STARTTLS))
    assert outcome.completed
    assert not outcome.negotiated.layer
    assert outcome.preferred.layer
    assert outcome.goals.secrecy_broken
    assert outcome.damage is Damage.BROKEN


def test_stripping_against_fail_closed_client_is_refused(make_scenario):
    outcome = run_session(make_scenario(app_layer=_smtp(policy="FAIL_CLOSED"), script=STRIP_STARTTLS))
    assert not outcome.completed
    assert outcome.aborted is AbortReason.UPGRADE_REFUSED
    assert outcome.damage is Damage.NONE


@pytest.mark.parametrize("name", ["attack_11_dropping", "attack_11_rewrite"])
def test_stripping_variants(name):
    vulnerable = run_session(load_scenario(SCENARIO_DIR / f"{name}.json"))
    assert vulnerable.damage is Damage.BROKEN
    patched = run_session(load_scenario(SCENARIO_DIR / f"{name}.json", patched=True))
    assert patched.damage is Damage.NONE
    assert patched.aborted is AbortReason.UPGRADE_REFUSED


# ============================================================================
# PROXY
# ============================================================================

def _trusting_client() -> dict:
    return endpoint_dict(trust_store=["Example Root CA", "Corp Inspection CA"])


def test_trusted_proxy_reads_and_forwards_plaintext(make_endpoint):
    client = make_endpoint(trust_store=["Example Root CA", "Corp Inspection CA"])
    server = make_endpoint(Role.SERVER)
    scenario = ProxyScenario("Corp Inspection CA")
    assert scenario.trusted_by(client)
    result = run_proxy_session(scenario, client, server, MAIL, seed=3)
    assert result.certificate_accepted
    assert result.read_payloads == [MAIL]
    assert result.server_received == MAIL
    assert not result.upstream_mode.layer


def test_reencrypting_proxy_uses_the_weakest_server_suite(make_endpoint):
    client = make_endpoint(trust_store=["Corp Inspection CA"])
    server = make_endpoint(Role.SERVER, versions=("TLS10", "TLS12"), suites=(ECDHE_GCM, RSA_CBC))
    result = run_proxy_session(ProxyScenario("Corp Inspection CA", ProxyBehavior.REENCRYPT_WEAK),
                               client, server, MAIL, seed=3)
    assert result.upstream_mode.layer
    assert result.upstream_mode.suite == RSA_CBC
    assert result.server_received == MAIL
    assert result.upstream_trace is not None


def test_untrusted_proxy_is_rejected(make_endpoint):
    client = make_endpoint()
    server = make_endpoint(Role.SERVER)
    result = run_proxy_session(ProxyScenario("Corp Inspection CA"), client, server, MAIL, seed=3)
    assert result.client_state.aborted is AbortReason.CERT_REJECTED
    assert result.read_payloads == []
    assert result.server_received is None


def test_proxy_sessions_through_the_harness(make_scenario):
    broken = run_session(make_scenario(client=_trusting_client(), app_layer=_proxy()))
    assert broken.damage is Damage.BROKEN
    assert broken.goals.secrecy_broken and broken.goals.authentication_broken
    safe = run_session(make_scenario(app_layer=_proxy()))
    assert safe.damage is Damage.NONE
    assert safe.aborted is AbortReason.CERT_REJECTED
