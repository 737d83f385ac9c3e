"""
Scenario files.

A scenario is a JSON document (schema_version 1) describing two endpoints,
an optional application layer, an optional adversary script and a seed.
Attack scenarios additionally carry their Table-1 metadata and a patch:
a map of dotted paths to replacement values that turns the vulnerable
configuration into the patched one.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

from core.adversary import (
    AdversaryScript,
    Drop,
    Forward,
    Inject,
    Modify,
    OracleKind,
    ScriptRule,
    Trigger,
)
from core.app_layer import PolicyMode, ProxyScenario
from core.config import APP_DATA, DEFAULT_GROUPS, SESSION
from core.crypto_model import derive_seed, generate_rsa_key
from core.errors import ConfigError, DowngradeLabError
from core.handshake import EndpointConfig
from core.models import BugFlag, Certificate, Direction, ProxyBehavior, Role, Strength, UpgradePolicy, VersionId
from utils.codec import message_from_dict
from utils.validators import validate_scenario_dict

logger = logging.getLogger(__name__)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "data" / "scenarios"
DEFAULT_ISSUER = "Example Root CA"
DEFAULT_SUBJECT = "server.example"


@dataclass(frozen=True)
class SmtpScenario:
    """SMTP upgrade context: client policy and whether the server offers STARTTLS."""
    policy: PolicyMode
    offers_starttls: bool = True


AppLayer = Union[SmtpScenario, ProxyScenario]


@dataclass(frozen=True)
class Scenario:
    """
    Everything one session run needs.

    Attributes:
        name: Scenario name
        client: Client TLS configuration
        server: Server TLS configuration
        app_layer: SMTP or proxy context, None for plain TLS
        script: Adversary script, None for no adversary
        seed: Seed for every random choice in the run
        app_payload: Data the client sends once connected
    """
    name: str
    client: EndpointConfig
    server: EndpointConfig
    app_layer: Optional[AppLayer]
    script: Optional[AdversaryScript]
    seed: int
    app_payload: bytes


def load_json(path: Union[str, Path]) -> dict:
    """
    Read and validate a scenario file.

    Raises:
        ConfigError: If the file is missing, not JSON, or invalid
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path.name}: not valid JSON ({exc})") from exc
    is_valid, error_msg = validate_scenario_dict(data)
    if not is_valid:
        raise ConfigError(f"{path.name}: {error_msg}")
    return data


def apply_patch(data: dict, changes: dict[str, Any]) -> dict:
    """
    Return a copy of a scenario dict with dotted-path replacements applied.

    Raises:
        ConfigError: If a path does not lead into an object
    """
    patched = copy.deepcopy(data)
    for path, value in changes.items():
        *parents, leaf = path.split(".")
        node = patched
        for part in parents:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"patch path {path!r} does not exist")
            node = node[part]
        node[leaf] = copy.deepcopy(value)
    is_valid, error_msg = validate_scenario_dict(patched)
    if not is_valid:
        raise ConfigError(f"patch produces an invalid scenario: {error_msg}")
    return patched


def build_endpoint_config(data: dict, role: Role, seed: int) -> EndpointConfig:
    """
    Turn an endpoint block into an EndpointConfig.

    Servers get a deterministic STRONG RSA key and a certificate from
    `certificate.issuer`; clients trust DEFAULT_ISSUER unless told otherwise.
    """
    low, high = (VersionId(v) for v in data["version_range"])
    common = dict(
        role=role,
        version_range=(low, high),
        suites_by_preference=tuple(data["suites"]),
        groups_by_preference=tuple(data.get("groups", DEFAULT_GROUPS)),
        bug_flags=frozenset(BugFlag(f) for f in data.get("bug_flags", [])),
    )
    if role is Role.CLIENT:
        return EndpointConfig(trust_store=frozenset(data.get("trust_store", [DEFAULT_ISSUER])), **common)

    key_spec = data.get("rsa_key", {})
    key = generate_rsa_key(Strength.STRONG, derive_seed(seed, 11),
                           shared_with_sslv2=bool(key_spec.get("shared_with_sslv2", False)))
    cert_spec = data.get("certificate", {})
    certificate = Certificate(
        subject=cert_spec.get("subject", DEFAULT_SUBJECT),
        issuer=cert_spec.get("issuer", DEFAULT_ISSUER),
        modulus_n=key.modulus_n,
        public_exp=key.public_exp,
    )
    return EndpointConfig(rsa_key=key, certificate=certificate, **common)


def _build_action(spec: Optional[dict]):
    if spec is None:
        return None
    kind = spec["type"]
    if kind == "forward":
        return Forward()
    if kind == "drop":
        return Drop()
    if kind == "modify":
        return Modify(edits=tuple(spec["edits"].items()))
    return Inject(
        message=message_from_dict(spec["message"]),
        direction=Direction(spec["direction"]),
        in_reply=bool(spec.get("in_reply", False)),
    )


def build_script(data: Optional[dict]) -> Optional[AdversaryScript]:
    """Turn a script block into an AdversaryScript; None stays None."""
    if data is None:
        return None
    rules = []
    for spec in data.get("rules", []):
        trigger = spec.get("trigger", {})
        rules.append(ScriptRule(
            trigger=Trigger(
                kind=trigger.get("kind", "*"),
                direction=Direction(trigger["direction"]) if trigger.get("direction") else None,
                occurrence=trigger.get("occurrence"),
                where=tuple(trigger.get("where", {}).items()),
            ),
            action=_build_action(spec.get("action")),
            oracle=OracleKind(spec["oracle"]) if spec.get("oracle") else None,
            params=tuple(spec.get("params", {}).items()),
        ))
    return AdversaryScript(
        rules=tuple(rules),
        budget_units=data.get("budget_units", AdversaryScript.budget_units),
        parallel_connections=tuple(data.get("parallel_connections", [])),
    )


def build_app_layer(data: Optional[dict]) -> Optional[AppLayer]:
    if data is None:
        return None
    if data["type"] == "smtp":
        return SmtpScenario(
            policy=PolicyMode(UpgradePolicy(data.get("client_policy", UpgradePolicy.FAIL_CLOSED.value))),
            offers_starttls=bool(data.get("server_offers_starttls", True)),
        )
    return ProxyScenario(
        proxy_issuer=data["proxy_issuer"],
        behavior=ProxyBehavior(data.get("behavior", ProxyBehavior.FORWARD_PLAINTEXT.value)),
    )


def scenario_from_dict(data: dict, *, seed: Optional[int] = None, name: Optional[str] = None) -> Scenario:
    """
    Build a runnable Scenario from a scenario dict.

    Args:
        data: Validated scenario dictionary
        seed: Overrides the file's seed
        name: Overrides the file's name

    Returns:
        Scenario

    Raises:
        ConfigError: If the dict is invalid or builds an inconsistent configuration
    """
    is_valid, error_msg = validate_scenario_dict(data)
    if not is_valid:
        raise ConfigError(error_msg)
    run_seed = seed if seed is not None else data.get("seed", SESSION["default_seed"])
    payload = data.get("app_payload", APP_DATA["default_payload"]).encode("utf-8")
    try:
        return Scenario(
            name=name or data.get("name", "scenario"),
            client=build_endpoint_config(data["client"], Role.CLIENT, run_seed),
            server=build_endpoint_config(data["server"], Role.SERVER, run_seed),
            app_layer=build_app_layer(data.get("app_layer")),
            script=build_script(data.get("script")),
            seed=run_seed,
            app_payload=payload,
        )
    except DowngradeLabError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path: Union[str, Path], *, patched: bool = False, seed: Optional[int] = None) -> Scenario:
    """Load a scenario file, optionally applying its patch."""
    data = load_json(path)
    if patched:
        patch = data.get("patch")
        if not patch:
            raise ConfigError(f"{Path(path).name} has no patch")
        data = apply_patch(data, patch["changes"])
    logger.debug("loaded scenario %s (patched=%s)", data.get("name"), patched)
    return scenario_from_dict(data, seed=seed)
