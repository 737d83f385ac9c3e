from __future__ import annotations

import json

import pytest

from core.errors import ConfigError, FormatError, NotFound
from core.harness import (
    ExperimentReport,
    benign_pairs,
    emit_report,
    outcome_to_dict,
    preferred_mode,
    run_attack,
    run_matrix,
    run_session,
)
from core.models import Damage, VersionId
from tests.conftest import ECDHE_GCM, RSA_GCM, endpoint_dict
from utils.scenario_io import SCENARIO_DIR, load_scenario


@pytest.fixture(scope="module")
def small_report():
    return run_matrix(seed=7, attack_ids=["07", "09", "10"])


def test_honest_session(make_scenario):
    outcome = run_session(make_scenario())
    assert outcome.completed
    assert outcome.aborted is None
    assert outcome.negotiated == outcome.preferred
    assert outcome.negotiated.version is VersionId.TLS12
    assert outcome.damage is Damage.NONE
    assert outcome.knowledge_summary == {"counts": {}, "facts": []}


def test_run_session_needs_a_scenario():
    with pytest.raises(ConfigError):
        run_session({"name": "not a scenario"})


def test_preferred_mode_ignores_the_script(make_scenario):
    scenario = make_scenario(
        client=endpoint_dict(suites=(ECDHE_GCM, RSA_GCM)),
        server=endpoint_dict(suites=(ECDHE_GCM, RSA_GCM)),
        script={"rules": [{"trigger": {"kind": "CH", "direction": "to_server"}, "action": {"type": "drop"}}]},
    )
    assert preferred_mode(scenario).suite == ECDHE_GCM
    outcome = run_session(scenario)
    assert not outcome.completed
    assert outcome.negotiated is None


def test_run_attack():
    run = run_attack(7)
    assert run.attack.id == "07"
    assert run.report.matches
    assert run.vulnerable.damage is Damage.BROKEN
    assert run.patch_holds
    with pytest.raises(NotFound):
        run_attack(42)


def test_outcome_to_dict_is_plain_json(make_scenario):
    data = outcome_to_dict(run_session(make_scenario()))
    assert data["damage"] == "None"
    assert data["negotiated"]["version"] == "TLS12"
    assert data["trace"]
    json.dumps(data)
    assert "trace" not in outcome_to_dict(run_session(make_scenario()), include_trace=False)


def test_matrix_subset(small_report):
    assert [row.attack_id for row in small_report.rows] == ["07", "09", "10"]
    assert small_report.damage_matches == 3
    assert small_report.patched_broken == []
    assert small_report.summary()["observed"] == {"None": 0, "Weakened": 1, "Broken": 2}


def test_matrix_rows_do_not_depend_on_workers(small_report):
    threaded = run_matrix(seed=7, max_workers=3, attack_ids=["10", "07", "09"])
    assert emit_report(threaded) == emit_report(small_report)


def test_emit_report_formats(small_report):
    data = json.loads(emit_report(small_report, "json"))
    assert data["seed"] == 7
    assert [row["id"] for row in data["rows"]] == ["07", "09", "10"]
    markdown = emit_report(small_report, "md").decode("utf-8")
    assert "| 10 | Logjam |" in markdown
    with pytest.raises(FormatError):
        emit_report(small_report, "csv")


def test_json_report_parses_back_to_an_equal_report(small_report):
    parsed = ExperimentReport.from_dict(json.loads(emit_report(small_report, "json")))
    assert parsed == small_report
    assert emit_report(parsed) == emit_report(small_report)
    with pytest.raises(FormatError):
        ExperimentReport.from_dict({"schema_version": 99, "seed": 7, "rows": []})
    with pytest.raises(FormatError):
        ExperimentReport.from_dict({**small_report.to_dict(), "rows": [{"id": "07"}]})


def test_benign_pairs():
    scenarios = benign_pairs()
    assert len(scenarios) >= 20
    names = [scenario.name for scenario in scenarios]
    assert len(set(names)) == len(names)
    assert all(scenario.script is None for scenario in scenarios)


def test_illustrative_export_downgrade():
    outcome = run_session(load_scenario(SCENARIO_DIR / "illustrative_export.json"))
    assert outcome.completed
    assert outcome.damage is Damage.BROKEN
    assert outcome.goals.secrecy_broken
    assert outcome.knowledge_summary["counts"].get("plaintext", 0) >= 1
