from __future__ import annotations

import pytest

from core.errors import NotFound
from core.models import (
    AbortReason,
    Damage,
    Direction,
    Element,
    Method,
    NegotiatedMode,
    Role,
    VersionId,
)
from core.network import Trace
from core.taxonomy import (
    INTACT,
    TABLE_1,
    SecurityGoalsRecord,
    SessionOutcome,
    evaluate_damage,
    explain_outcome,
    is_downgraded,
    load_table1_file,
    normalize_attack_id,
    observed_methods,
    table1_vector,
    verify_classification,
)
from tests.conftest import DHE_EXPORT, DHE_GCM, ECDHE_GCM, RSA_GCM

STRONG = NegotiatedMode(VersionId.TLS12, ECDHE_GCM, "ec_m127")


def _outcome(*, negotiated=STRONG, preferred=STRONG, completed=True, goals=INTACT, trace=None,
             suites=(ECDHE_GCM, RSA_GCM, DHE_EXPORT), groups=("ec_m127", "ec_m89"),
             aborted=None, abort_party=None) -> SessionOutcome:
    return SessionOutcome(
        negotiated=negotiated,
        preferred=preferred,
        completed=completed,
        aborted=aborted,
        abort_party=abort_party,
        goals=goals,
        knowledge_summary={"counts": {}, "facts": []},
        trace=trace or Trace(),
        client_suites=suites,
        server_suites=suites,
        client_groups=groups,
        server_groups=groups,
    )


def _trace(*actions: str) -> Trace:
    trace = Trace()
    for action in actions:
        trace.record("adversary", "intercept", "CH", Direction.TO_SERVER, action=action)
    return trace


# ============================================================================
# GOALS AND OUTCOMES
# ============================================================================

def test_broken_goal_needs_a_witness():
    with pytest.raises(ValueError):
        SecurityGoalsRecord(secrecy_broken=True)
    goals = SecurityGoalsRecord(integrity_broken=True, integrity_witness="forged record")
    assert goals.any_broken
    assert goals.to_dict() == {"secrecy": None, "integrity": "forged record", "authentication": None}
    assert not INTACT.any_broken


def test_completed_outcome_needs_a_mode():
    with pytest.raises(ValueError):
        _outcome(negotiated=None)


def test_downgrade_detection():
    assert not is_downgraded(_outcome())
    export = NegotiatedMode(VersionId.TLS12, DHE_EXPORT, "ffdhe_export")
    assert is_downgraded(_outcome(negotiated=export))
    older = NegotiatedMode(VersionId.TLS11, ECDHE_GCM, "ec_m127")
    assert is_downgraded(_outcome(negotiated=older))
    weaker_group = NegotiatedMode(VersionId.TLS12, ECDHE_GCM, "ec_m89")
    assert is_downgraded(_outcome(negotiated=weaker_group))
    plaintext = NegotiatedMode(None, None, layer=False)
    assert is_downgraded(_outcome(negotiated=plaintext, preferred=NegotiatedMode(VersionId.TLS12, ECDHE_GCM)))
    assert not is_downgraded(_outcome(negotiated=None, completed=False))


def test_suite_unranked_by_one_endpoint_is_not_a_downgrade():
    outcome = _outcome(negotiated=NegotiatedMode(VersionId.TLS12, DHE_GCM, "ec_m127"), suites=())
    assert not is_downgraded(outcome)


def test_damage_levels():
    assert evaluate_damage(_outcome()) is Damage.NONE
    weak = _outcome(negotiated=NegotiatedMode(VersionId.TLS12, RSA_GCM))
    assert evaluate_damage(weak) is Damage.WEAKENED
    broken_goals = SecurityGoalsRecord(secrecy_broken=True, secrecy_witness="payload read")
    assert evaluate_damage(_outcome(goals=broken_goals)) is Damage.BROKEN
    # an aborted session is never weakened
    aborted = _outcome(negotiated=NegotiatedMode(VersionId.TLS12, RSA_GCM), completed=False)
    assert aborted.damage is Damage.NONE


def test_observed_methods_ignore_forwarding():
    assert observed_methods(_trace("forward", "forward")) == frozenset()
    assert observed_methods(_trace("forward", "modify", "drop")) == {Method.MODIFICATION, Method.DROPPING}
    assert observed_methods(_trace("inject")) == {Method.INJECTION}


# ============================================================================
# CLASSIFICATION TABLE
# ============================================================================

def test_table_has_every_attack():
    assert sorted(TABLE_1) == [f"{n:02d}" for n in range(1, 16)]
    assert TABLE_1["10"][0] == "Logjam"
    weakened = sorted(key for key, (_, vector) in TABLE_1.items() if vector.damage is Damage.WEAKENED)
    assert weakened == ["09", "15"]


def test_data_file_agrees_with_the_table():
    assert load_table1_file() == {key: vector for key, (_, vector) in TABLE_1.items()}


@pytest.mark.parametrize("raw", [7, "7", "07"])
def test_normalize_attack_id(raw):
    assert normalize_attack_id(raw) == "07"
    assert table1_vector(raw).element is Element.ALGORITHM


@pytest.mark.parametrize("raw", [0, 16, "x", None])
def test_unknown_attack_id(raw):
    with pytest.raises(NotFound):
        normalize_attack_id(raw)


def test_verify_classification():
    goals = SecurityGoalsRecord(secrecy_broken=True, secrecy_witness="payload read")
    report = verify_classification(10, _outcome(goals=goals, trace=_trace("modify")))
    assert report.attack_id == "10"
    assert report.observed_damage is Damage.BROKEN
    assert report.damage_match and report.method_match and report.matches
    assert "declared" in report.element_note

    wrong_method = verify_classification("10", _outcome(goals=goals, trace=_trace("modify", "drop")))
    assert wrong_method.damage_match
    assert not wrong_method.method_match


def test_explain_outcome():
    assert explain_outcome(_outcome()).startswith("No damage")
    weak = _outcome(negotiated=NegotiatedMode(VersionId.TLS12, RSA_GCM))
    assert "weakened" in explain_outcome(weak)
    broken = _outcome(goals=SecurityGoalsRecord(secrecy_broken=True, secrecy_witness="payload read"))
    assert "payload read" in explain_outcome(broken)
    aborted = _outcome(negotiated=None, completed=False, aborted=AbortReason.DOWNGRADE_DETECTED,
                       abort_party=Role.CLIENT)
    assert "client aborted with DowngradeDetected" in explain_outcome(aborted)
