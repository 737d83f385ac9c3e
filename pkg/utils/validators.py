"""
Scenario validation utilities.

This module validates scenario dictionaries (as loaded from JSON) before
they are turned into endpoint configurations and adversary scripts.
"""

from typing import Any, Optional

from core.catalog import CIPHER_SUITES, get_group
from core.errors import NotFound
from core.messages import MESSAGE_TYPES
from core.models import BugFlag, Direction, ProxyBehavior, UpgradePolicy, VersionId

SCHEMA_VERSION = 1
ACTION_TYPES = ("forward", "drop", "modify", "inject")
ORACLE_NAMES = ("recover_key", "bleichenbacher", "register_collision", "cbc_recover")


def validate_version_range(value: Any) -> tuple[bool, Optional[str]]:
    """
    Validate a [min, max] version pair.

    Args:
        value: Two version names

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        return False, "version_range must be a [min, max] pair"
    try:
        low, high = VersionId(value[0]), VersionId(value[1])
    except ValueError:
        return False, f"Unknown version in {list(value)}"
    if low > high:
        return False, f"Minimum version {low.value} is above maximum {high.value}"
    return True, None


def validate_suites(suites: Any) -> tuple[bool, Optional[str]]:
    """
    Validate a suite preference list.

    Args:
        suites: List of cipher suite ids

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(suites, list) or not suites:
        return False, "Suite preference list must be a non-empty list"
    unknown = [s for s in suites if s not in CIPHER_SUITES]
    if unknown:
        return False, f"Unknown cipher suites: {unknown}"
    if len(set(suites)) != len(suites):
        return False, "Suite preference list has duplicates"
    return True, None


def validate_groups(groups: Any) -> tuple[bool, Optional[str]]:
    if not isinstance(groups, list) or not groups:
        return False, "Group preference list must be a non-empty list"
    for label in groups:
        try:
            get_group(label)
        except NotFound:
            return False, f"Unknown group {label!r}"
    return True, None


def validate_bug_flags(flags: Any) -> tuple[bool, Optional[str]]:
    if not isinstance(flags, list):
        return False, "bug_flags must be a list"
    names = {f.value for f in BugFlag}
    unknown = [f for f in flags if f not in names]
    if unknown:
        return False, f"Unknown bug flags: {unknown}"
    return True, None


def validate_endpoint(data: Any, role: str) -> tuple[bool, Optional[str]]:
    """
    Validate one endpoint block.

    Args:
        data: Endpoint dictionary
        role: "client" or "server", used in messages

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(data, dict):
        return False, f"{role} must be an object"
    if "version_range" not in data or "suites" not in data:
        return False, f"{role} needs version_range and suites"
    validations = [
        validate_version_range(data["version_range"]),
        validate_suites(data["suites"]),
    ]
    if "groups" in data:
        validations.append(validate_groups(data["groups"]))
    if "bug_flags" in data:
        validations.append(validate_bug_flags(data["bug_flags"]))
    if "trust_store" in data and not isinstance(data["trust_store"], list):
        validations.append((False, "trust_store must be a list"))
    for is_valid, error_msg in validations:
        if not is_valid:
            return False, f"{role}: {error_msg}"
    return True, None


def validate_rule(rule: Any, index: int) -> tuple[bool, Optional[str]]:
    """
    Validate one adversary rule.

    Args:
        rule: Rule dictionary with trigger and action and/or oracle
        index: Position in the script, used in messages

    Returns:
        Tuple of (is_valid, error_message)
    """
    where = f"rule {index}"
    if not isinstance(rule, dict):
        return False, f"{where} must be an object"
    trigger = rule.get("trigger", {})
    kind = trigger.get("kind", "*")
    if kind != "*" and kind not in MESSAGE_TYPES:
        return False, f"{where}: unknown message kind {kind!r}"
    direction = trigger.get("direction")
    if direction is not None and direction not in {d.value for d in Direction}:
        return False, f"{where}: unknown direction {direction!r}"
    occurrence = trigger.get("occurrence")
    if occurrence is not None and (not isinstance(occurrence, int) or occurrence < 1):
        return False, f"{where}: occurrence must be a positive integer"
    action = rule.get("action")
    oracle = rule.get("oracle")
    if action is None and oracle is None:
        return False, f"{where}: needs an action or an oracle"
    if action is not None:
        kind_name = action.get("type") if isinstance(action, dict) else None
        if kind_name not in ACTION_TYPES:
            return False, f"{where}: unknown action {kind_name!r}"
        if kind_name == "modify" and not action.get("edits"):
            return False, f"{where}: modify needs edits"
        if kind_name == "inject":
            message = action.get("message", {})
            if message.get("kind") not in MESSAGE_TYPES:
                return False, f"{where}: inject needs a known message kind"
            if action.get("direction") not in {d.value for d in Direction}:
                return False, f"{where}: inject needs a direction"
    if oracle is not None and oracle not in ORACLE_NAMES:
        return False, f"{where}: unknown oracle {oracle!r}"
    return True, None


def validate_script(script: Any) -> tuple[bool, Optional[str]]:
    if script is None:
        return True, None
    if not isinstance(script, dict):
        return False, "script must be an object"
    budget = script.get("budget_units", 0)
    if not isinstance(budget, int) or budget < 0:
        return False, "budget_units must be a non-negative integer"
    for index, rule in enumerate(script.get("rules", [])):
        is_valid, error_msg = validate_rule(rule, index)
        if not is_valid:
            return False, error_msg
    return True, None


def validate_app_layer(app_layer: Any) -> tuple[bool, Optional[str]]:
    if app_layer is None:
        return True, None
    kind = app_layer.get("type") if isinstance(app_layer, dict) else None
    if kind == "smtp":
        policy = app_layer.get("client_policy", UpgradePolicy.FAIL_CLOSED.value)
        if policy not in {p.value for p in UpgradePolicy}:
            return False, f"Unknown upgrade policy {policy!r}"
        return True, None
    if kind == "proxy":
        if not app_layer.get("proxy_issuer"):
            return False, "proxy needs a proxy_issuer"
        behavior = app_layer.get("behavior", ProxyBehavior.FORWARD_PLAINTEXT.value)
        if behavior not in {b.value for b in ProxyBehavior}:
            return False, f"Unknown proxy behavior {behavior!r}"
        return True, None
    return False, f"Unknown app_layer type {kind!r}"


def validate_scenario_dict(data: Any) -> tuple[bool, Optional[str]]:
    """
    Validate a whole scenario at once.

    Args:
        data: Scenario dictionary

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(data, dict):
        return False, "Scenario must be an object"
    if data.get("schema_version") != SCHEMA_VERSION:
        return False, f"Unsupported schema_version {data.get('schema_version')!r}"
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        return False, "seed must be a non-negative integer"

    validations = [
        validate_endpoint(data.get("client"), "client"),
        validate_endpoint(data.get("server"), "server"),
        validate_app_layer(data.get("app_layer")),
        validate_script(data.get("script")),
    ]

    for is_valid, error_msg in validations:
        if not is_valid:
            return False, error_msg

    return True, None
