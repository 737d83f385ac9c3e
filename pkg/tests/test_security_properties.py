"""Security properties that must hold under every adversary script."""

from __future__ import annotations

import dataclasses
import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core import catalog
from core.adversary import AdversaryScript, Drop, Modify, ScriptRule, Trigger
from core.app_layer import ProxyScenario, SmtpState
from core.attacks import all_attacks, patched_scenario, vulnerable_scenario
from core.crypto_model import rsa_unwrap_pms
from core.harness import drive_session, run_session
from core.models import Damage, Direction
from core.network import Trace
from core.taxonomy import INTACT
from tests.conftest import ECDHE_GCM, RSA_GCM, endpoint_dict, scenario_dict
from utils.scenario_io import SCENARIO_DIR, load_scenario, scenario_from_dict

TO_SERVER, TO_CLIENT = Direction.TO_SERVER, Direction.TO_CLIENT


def _rule(kind: str, direction: Direction, action) -> ScriptRule:
    return ScriptRule(Trigger(kind=kind, direction=direction), action=action)


def _scripted_scenarios() -> list:
    scenarios = []
    for attack in all_attacks():
        scenarios.append(vulnerable_scenario(attack.id))
        scenarios.append(patched_scenario(attack.id))
    for name in ("illustrative_export", "attack_11_dropping", "attack_11_rewrite"):
        scenarios.append(load_scenario(SCENARIO_DIR / f"{name}.json"))
    return [s for s in scenarios if s.script is not None and not isinstance(s.app_layer, ProxyScenario)]


# ============================================================================
# STARTTLS FAIL-CLOSED
# ============================================================================

FAIL_CLOSED_SMTP = scenario_from_dict(scenario_dict(
    name="fail_closed_smtp",
    app_layer={"type": "smtp", "client_policy": "FAIL_CLOSED", "server_offers_starttls": True},
))

SMTP_RULES = (
    _rule("CAPS", TO_CLIENT, Modify(edits=(("capabilities", ["PIPELINING"]),))),
    _rule("CAPS", TO_CLIENT, Drop()),
    _rule("STARTTLS", TO_SERVER, Drop()),
    _rule("STARTTLS", TO_SERVER, Modify(edits=(("verb", "XXXXXXXX"),))),
    _rule("REPLY", TO_CLIENT, Modify(edits=(("code", 454),))),
    _rule("CH", TO_SERVER, Drop()),
)


@pytest.mark.slow
def test_fail_closed_client_never_sends_mail_in_cleartext():
    for depth in range(1, 5):
        for rules in itertools.product(SMTP_RULES, repeat=depth):
            outcome = run_session(dataclasses.replace(FAIL_CLOSED_SMTP, script=AdversaryScript(rules=rules)))
            sent = [event.kind for event in outcome.trace.of("send") if event.actor == "client"]
            assert "MAIL" not in sent, rules
            assert not outcome.goals.secrecy_broken, rules


# ============================================================================
# ZERO BUDGET AGAINST A STRONG CONFIGURATION
# ============================================================================

STRONG_TLS12 = scenario_from_dict(scenario_dict(
    name="strong_tls12",
    client=endpoint_dict(suites=(ECDHE_GCM, RSA_GCM), groups=("ec_m127", "ec_m89")),
    server=endpoint_dict(suites=(ECDHE_GCM, RSA_GCM), groups=("ec_m127", "ec_m89")),
))

fixed_rules = st.sampled_from([
    _rule("CH", TO_SERVER, Drop()),
    _rule("CH", TO_SERVER, Modify(edits=(("suites", [RSA_GCM]),))),
    _rule("CH", TO_SERVER, Modify(edits=(("supported_groups", ["ec_m89"]),))),
    _rule("SH", TO_CLIENT, Drop()),
    _rule("CKE", TO_SERVER, Drop()),
    _rule("CKE", TO_SERVER, Modify(edits=(("param_bytes", "$adversary_share"),))),
    _rule("CF", TO_SERVER, Drop()),
    _rule("CF", TO_SERVER, Modify(edits=(("mac", "$finished"),))),
    _rule("SF", TO_CLIENT, Drop()),
    _rule("SF", TO_CLIENT, Modify(edits=(("mac", "$finished"),))),
])

nonce_rules = st.tuples(
    st.sampled_from([("CH", TO_SERVER), ("SH", TO_CLIENT)]),
    st.binary(min_size=32, max_size=32),
).map(lambda t: _rule(t[0][0], t[0][1], Modify(edits=(("nonce", t[1].hex()),))))

scripts = st.lists(st.one_of(fixed_rules, nonce_rules), min_size=1, max_size=4).map(
    lambda rules: AdversaryScript(rules=tuple(rules), budget_units=0))


@pytest.mark.slow
@settings(max_examples=300, deadline=None)
@given(script=scripts)
def test_zero_budget_adversary_gets_no_plaintext_and_no_forgery(script):
    outcome = run_session(dataclasses.replace(STRONG_TLS12, script=script))
    assert not outcome.goals.any_broken
    assert outcome.knowledge_summary["counts"].get("plaintext", 0) == 0
    assert outcome.damage is not Damage.BROKEN


# ============================================================================
# KNOWLEDGE SOUNDNESS
# ============================================================================

def _tls(state):
    return state.tls if isinstance(state, SmtpState) else state


def _check_entry(entry, knowledge, scenario, endpoints) -> None:
    if entry.kind == "dh_secret":
        label, public = entry.label.rsplit(":", 1)
        group = catalog.get_group(label)
        assert pow(group.generator_g, entry.value, group.prime_p) == int(public)
        assert knowledge.dh_secrets[(group.prime_p, int(public))] == entry.value
    elif entry.kind == "rsa_private":
        n = int(entry.label.removeprefix("n="))
        e, d = knowledge.rsa_private[n]
        assert d == entry.value
        assert all(pow(pow(m, e, n), d, n) == m for m in (2, 3, n - 2))
    elif entry.kind == "pms":
        ciphertexts = [ct for ct, pms in knowledge.pms_by_ciphertext.items() if pms == entry.value]
        assert any(rsa_unwrap_pms(ct, scenario.server.rsa_key) == entry.value for ct in ciphertexts)
    elif entry.kind in ("ms", "keys"):
        state = endpoints[entry.label.split()[0]]
        if state.connected and state.secrets is not None:
            real = state.secrets.ms if entry.kind == "ms" else (state.secrets.k_I, state.secrets.k_R)
            assert entry.value == real
    elif entry.kind == "plaintext":
        assert bytes(entry.value) in scenario.app_payload


@pytest.mark.slow
def test_every_secret_replays_from_its_derivation():
    seen = set()
    for scenario in _scripted_scenarios():
        result, adversary = drive_session(scenario, Trace())
        endpoints = {"client": _tls(result.client_state), "server": _tls(result.server_state)}
        for entry in adversary.knowledge.entries:
            _check_entry(entry, adversary.knowledge, scenario, endpoints)
            seen.add(entry.kind)
    assert {"dh_secret", "rsa_private", "pms", "ms", "keys", "plaintext"} <= seen


# ============================================================================
# DAMAGE MONOTONICITY
# ============================================================================

def _without_oracles(scenario):
    rules = tuple(dataclasses.replace(rule, oracle=None, params=())
                  for rule in scenario.script.rules if rule.action is not None)
    return dataclasses.replace(scenario, script=dataclasses.replace(scenario.script, rules=rules))


@pytest.mark.slow
def test_removing_oracles_never_makes_a_session_broken():
    for scenario in _scripted_scenarios():
        original = run_session(scenario)
        stripped = run_session(_without_oracles(scenario))
        if original.damage is not Damage.BROKEN:
            assert stripped.damage is not Damage.BROKEN, scenario.name


def test_damage_without_witnesses_is_never_broken():
    outcome = run_session(vulnerable_scenario("10"))
    assert outcome.damage is Damage.BROKEN
    cleared = dataclasses.replace(outcome, goals=INTACT)
    assert cleared.damage in (Damage.NONE, Damage.WEAKENED)
