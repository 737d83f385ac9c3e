from __future__ import annotations

import dataclasses

import pytest

from core.adversary import AdversaryScript, Drop, ScriptRule, Trigger
from core.attacks import all_attacks, get_attack, patched_scenario, vulnerable_scenario
from core.errors import ConfigError, NotFound
from core.models import ACTION_METHODS, ActionKind
from core.taxonomy import TABLE_1, load_table1_rows


def test_registry_covers_the_table():
    attacks = all_attacks()
    assert [attack.id for attack in attacks] == sorted(TABLE_1)
    for attack in attacks:
        assert attack.declared_vector == TABLE_1[attack.id][1]
        assert attack.patch_description
        assert attack.patched_data != attack.vulnerable_data


def test_lookup_accepts_loose_ids():
    assert get_attack(7).id == "07"
    assert get_attack("7") is get_attack("07")
    with pytest.raises(NotFound):
        get_attack(99)


def test_theoretical_flags_follow_the_data_file():
    theoretical = {row["id"] for row in load_table1_rows() if row["theoretical"]}
    assert {attack.id for attack in all_attacks() if attack.theoretical} == theoretical
    assert get_attack(10).theoretical is False
    assert get_attack(13).theoretical is True


@pytest.mark.parametrize("attack", all_attacks(), ids=lambda a: a.id)
def test_script_actions_fit_the_declared_method(attack):
    if attack.script is None:
        assert attack.id == "12"
        return
    kinds = attack.script.action_kinds - {ActionKind.FORWARD}
    assert kinds
    assert {ACTION_METHODS[kind] for kind in kinds} == {attack.declared_vector.method}


def test_contradicting_script_is_rejected():
    logjam = get_attack(10)
    dropping = AdversaryScript(rules=(ScriptRule(Trigger(kind="SKE"), action=Drop()),))
    with pytest.raises(ConfigError):
        dataclasses.replace(logjam, script=dropping)


def test_scenarios_are_named_and_seeded():
    vulnerable = vulnerable_scenario("07")
    patched = patched_scenario("07", seed=11)
    assert vulnerable.name == "attack_07_vulnerable"
    assert vulnerable.seed == 7
    assert patched.name == "attack_07_patched"
    assert patched.seed == 11
    assert vulnerable.client != patched.client or vulnerable.server != patched.server
