from __future__ import annotations

import json

import pytest

from core.adversary import Inject, Modify
from core.app_layer import ProxyScenario
from core.errors import ConfigError
from core.models import BugFlag, ProxyBehavior, Role, UpgradePolicy, VersionId
from tests.conftest import RSA_CBC, endpoint_dict, scenario_dict
from utils.scenario_io import (
    DEFAULT_ISSUER,
    SCENARIO_DIR,
    SmtpScenario,
    apply_patch,
    build_app_layer,
    build_endpoint_config,
    build_script,
    load_json,
    load_scenario,
    scenario_from_dict,
)


def test_client_and_server_configs():
    client = build_endpoint_config(endpoint_dict(bug_flags=("DOWNGRADE_DANCE",)), Role.CLIENT, 7)
    assert client.version_range == (VersionId.TLS12, VersionId.TLS12)
    assert client.trust_store == frozenset({DEFAULT_ISSUER})
    assert client.has_flag(BugFlag.DOWNGRADE_DANCE)
    assert client.rsa_key is None

    server = build_endpoint_config(endpoint_dict(), Role.SERVER, 7)
    assert server.certificate.modulus_n == server.rsa_key.modulus_n
    assert server.certificate.issuer == DEFAULT_ISSUER
    assert build_endpoint_config(endpoint_dict(), Role.SERVER, 7).rsa_key == server.rsa_key


def test_server_key_can_be_shared_with_sslv2():
    server = build_endpoint_config(endpoint_dict(rsa_key={"shared_with_sslv2": True}), Role.SERVER, 7)
    assert server.rsa_key.shared_with_sslv2


def test_build_script_turns_json_into_actions():
    script = build_script({
        "budget_units": 12,
        "rules": [
            {"trigger": {"kind": "CH", "direction": "to_server"},
             "action": {"type": "modify", "edits": {"suites": [RSA_CBC]}}},
            {"trigger": {"kind": "CH", "direction": "to_server", "occurrence": 1},
             "action": {"type": "inject", "direction": "to_client", "in_reply": True,
                        "message": {"kind": "HRR", "fields": {"version": "TLS13_DRAFT10",
                                                              "suite": "TLS13_AES_128_GCM_SHA256",
                                                              "group": "ffdhe_strong"}}}},
        ],
    })
    assert script.budget_units == 12
    assert isinstance(script.rules[0].action, Modify)
    assert script.rules[0].action.edits == (("suites", [RSA_CBC]),)
    inject = script.rules[1].action
    assert isinstance(inject, Inject)
    assert inject.in_reply
    assert inject.message.group == "ffdhe_strong"
    assert build_script(None) is None


def test_build_app_layer():
    smtp = build_app_layer({"type": "smtp", "client_policy": "FAIL_OPEN", "server_offers_starttls": False})
    assert isinstance(smtp, SmtpScenario)
    assert smtp.policy.on_upgrade_failure is UpgradePolicy.FAIL_OPEN
    assert not smtp.offers_starttls

    proxy = build_app_layer({"type": "proxy", "proxy_issuer": "Corp CA", "behavior": "REENCRYPT_WEAK"})
    assert proxy == ProxyScenario("Corp CA", ProxyBehavior.REENCRYPT_WEAK)


def test_apply_patch_leaves_the_original_alone():
    data = scenario_dict()
    patched = apply_patch(data, {"server.suites": [RSA_CBC], "client.version_range": ["TLS10", "TLS12"]})
    assert patched["server"]["suites"] == [RSA_CBC]
    assert patched["client"]["version_range"] == ["TLS10", "TLS12"]
    assert data["server"]["suites"] != [RSA_CBC]


def test_apply_patch_rejects_missing_paths_and_invalid_results():
    with pytest.raises(ConfigError):
        apply_patch(scenario_dict(), {"nowhere.suites": [RSA_CBC]})
    with pytest.raises(ConfigError):
        apply_patch(scenario_dict(), {"server.suites": []})


def test_scenario_seed_and_name_overrides(make_scenario):
    scenario = make_scenario(seed=3)
    assert scenario.seed == 3
    assert scenario.name == "test_scenario"
    other = scenario_from_dict(scenario_dict(), seed=11, name="renamed")
    assert (other.seed, other.name) == (11, "renamed")


def test_invalid_dicts_raise_config_error():
    with pytest.raises(ConfigError):
        scenario_from_dict(scenario_dict(client={"suites": [RSA_CBC]}))
    with pytest.raises(ConfigError):
        scenario_from_dict(scenario_dict(script={"budget_units": -1, "rules": []}))
    with pytest.raises(ConfigError):
        scenario_from_dict(scenario_dict(server=endpoint_dict(versions=("TLS12", "TLS10"))))


def test_load_json_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_json(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_json(broken)
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"schema_version": 9}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_json(wrong)


def test_load_scenario_with_and_without_patch():
    vulnerable = load_scenario(SCENARIO_DIR / "attack_10.json")
    patched = load_scenario(SCENARIO_DIR / "attack_10.json", patched=True)
    assert len(vulnerable.server.suites_by_preference) == 2
    assert patched.server.suites_by_preference == ("DHE_RSA_WITH_AES_128_GCM_SHA256",)
    with pytest.raises(ConfigError):
        load_scenario(SCENARIO_DIR / "benign_tls12_ecdhe.json", patched=True)


@pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_every_shipped_scenario_loads(path):
    scenario = load_scenario(path)
    assert scenario.seed == 7
