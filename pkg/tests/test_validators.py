from __future__ import annotations

import pytest

from tests.conftest import RSA_CBC, endpoint_dict, scenario_dict
from utils.validators import (
    validate_app_layer,
    validate_bug_flags,
    validate_endpoint,
    validate_rule,
    validate_scenario_dict,
    validate_script,
    validate_suites,
    validate_version_range,
)


def test_valid_scenario_passes():
    assert validate_scenario_dict(scenario_dict()) == (True, None)


@pytest.mark.parametrize("value", [["TLS12"], ["TLS12", "TLS99"], ["TLS12", "SSL30"], "TLS12"])
def test_bad_version_ranges(value):
    is_valid, error_msg = validate_version_range(value)
    assert not is_valid
    assert error_msg


@pytest.mark.parametrize("suites", [[], ["NOT_A_SUITE"], [RSA_CBC, RSA_CBC], RSA_CBC])
def test_bad_suite_lists(suites):
    assert validate_suites(suites)[0] is False


def test_unknown_bug_flag():
    is_valid, error_msg = validate_bug_flags(["DOWNGRADE_DANCE", "SEGFAULT"])
    assert not is_valid
    assert "SEGFAULT" in error_msg


def test_endpoint_errors_name_the_role():
    is_valid, error_msg = validate_endpoint({"suites": [RSA_CBC]}, "server")
    assert not is_valid
    assert error_msg.startswith("server")
    is_valid, error_msg = validate_endpoint(endpoint_dict(groups=("no_such_group",)), "client")
    assert not is_valid
    assert error_msg.startswith("client")


@pytest.mark.parametrize("rule", [
    {"trigger": {"kind": "CH"}},
    {"trigger": {"kind": "XX"}, "action": {"type": "drop"}},
    {"trigger": {"kind": "CH", "direction": "sideways"}, "action": {"type": "drop"}},
    {"trigger": {"kind": "CH", "occurrence": 0}, "action": {"type": "drop"}},
    {"trigger": {"kind": "CH"}, "action": {"type": "modify"}},
    {"trigger": {"kind": "CH"}, "action": {"type": "inject", "message": {"kind": "SH"}}},
    {"trigger": {"kind": "CH"}, "oracle": "psychic"},
])
def test_bad_rules(rule):
    assert validate_rule(rule, 0)[0] is False


def test_good_rules():
    assert validate_rule({"trigger": {"kind": "CH"}, "action": {"type": "drop"}}, 0) == (True, None)
    assert validate_rule({"trigger": {"kind": "SKE"}, "oracle": "recover_key"}, 1) == (True, None)


def test_script_budget_must_be_non_negative():
    assert validate_script(None) == (True, None)
    assert validate_script({"budget_units": -5, "rules": []})[0] is False


@pytest.mark.parametrize("app_layer,expected", [
    (None, True),
    ({"type": "smtp", "client_policy": "FAIL_OPEN"}, True),
    ({"type": "smtp", "client_policy": "MAYBE"}, False),
    ({"type": "proxy", "proxy_issuer": "Corp CA"}, True),
    ({"type": "proxy"}, False),
    ({"type": "ftp"}, False),
])
def test_app_layer_validation(app_layer, expected):
    assert validate_app_layer(app_layer)[0] is expected


def test_schema_version_and_seed_are_checked():
    bad_schema = scenario_dict()
    bad_schema["schema_version"] = 2
    assert validate_scenario_dict(bad_schema)[0] is False
    assert validate_scenario_dict(scenario_dict(seed=-1))[0] is False
