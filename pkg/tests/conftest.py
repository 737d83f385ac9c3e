from __future__ import annotations

from typing import Any, Optional

import pytest

from core.handshake import EndpointConfig
from core.models import Role
from utils.scenario_io import Scenario, build_endpoint_config, scenario_from_dict

ECDHE_GCM = "ECDHE_RSA_WITH_AES_128_GCM_SHA256"
RSA_GCM = "RSA_WITH_AES_128_GCM_SHA256"
DHE_GCM = "DHE_RSA_WITH_AES_128_GCM_SHA256"
RSA_CBC = "RSA_WITH_AES_128_CBC_SHA"
RSA_3DES = "RSA_WITH_3DES_EDE_CBC_SHA"
RSA_NULL = "RSA_WITH_NULL_MD5"
DHE_EXPORT = "DHE_RSA_EXPORT_WITH_DES40_CBC_SHA"
RSA_EXPORT = "RSA_EXPORT_WITH_DES40_CBC_SHA"
TLS13_AES = "TLS13_AES_128_GCM_SHA256"


def endpoint_dict(
    *,
    versions: tuple[str, str] = ("TLS12", "TLS12"),
    suites: tuple[str, ...] = (ECDHE_GCM,),
    groups: Optional[tuple[str, ...]] = None,
    bug_flags: tuple[str, ...] = (),
    **extra: Any,
) -> dict:
    data = {"version_range": list(versions), "suites": list(suites)}
    if groups is not None:
        data["groups"] = list(groups)
    if bug_flags:
        data["bug_flags"] = list(bug_flags)
    data.update(extra)
    return data


def scenario_dict(
    *,
    client: Optional[dict] = None,
    server: Optional[dict] = None,
    script: Optional[dict] = None,
    app_layer: Optional[dict] = None,
    seed: int = 7,
    name: str = "test_scenario",
) -> dict:
    return {
        "schema_version": 1,
        "name": name,
        "seed": seed,
        "client": client if client is not None else endpoint_dict(),
        "server": server if server is not None else endpoint_dict(),
        "app_layer": app_layer,
        "script": script,
    }


@pytest.fixture
def make_scenario():
    """Build a runnable Scenario from keyword overrides of scenario_dict."""
    def build(**kwargs) -> Scenario:
        return scenario_from_dict(scenario_dict(**kwargs))
    return build


@pytest.fixture
def make_endpoint():
    """Build an EndpointConfig for one role from keyword overrides of endpoint_dict."""
    def build(role: Role = Role.CLIENT, seed: int = 7, **kwargs) -> EndpointConfig:
        return build_endpoint_config(endpoint_dict(**kwargs), role, seed)
    return build
