"""
Registry of the fifteen surveyed downgrade attacks.

Each attack lives in data/scenarios/attack_NN.json: the vulnerable endpoint
configurations, the adversary script, a patch that defeats the attack and
notes stating the worst-case assumptions theoretical attacks run under.
The declared classification always comes from the ground-truth table.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from core.adversary import AdversaryScript
from core.errors import ConfigError
from core.models import ACTION_METHODS, ActionKind, TaxonomyVector
from core.taxonomy import TABLE_1, load_table1_rows, normalize_attack_id
from utils.scenario_io import SCENARIO_DIR, Scenario, apply_patch, build_script, load_json, scenario_from_dict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackSpec:
    """
    One surveyed attack.

    Attributes:
        id: Two-digit attack id, "01" to "15"
        name: Attack name as listed in the classification table
        declared_vector: Ground-truth classification
        script: Adversary script; None when the app layer plays the adversary
        notes: Worst-case assumption notes
        patch_description: What the patched scenario changes
        vulnerable_data: Scenario dictionary of the vulnerable configuration
        patched_data: Scenario dictionary with the patch applied
        theoretical: Whether the attack is only shown in theory
    """
    id: str
    name: str
    declared_vector: TaxonomyVector
    script: Optional[AdversaryScript]
    notes: tuple[str, ...]
    patch_description: str
    vulnerable_data: dict
    patched_data: dict
    theoretical: bool = False

    def __post_init__(self):
        """Script actions must fit the declared method."""
        if self.script is None:
            return
        declared = self.declared_vector.method
        for kind in self.script.action_kinds:
            if kind is ActionKind.FORWARD:
                continue
            if ACTION_METHODS[kind] is not declared:
                raise ConfigError(
                    f"attack {self.id}: {kind.value} action contradicts declared method {declared.value}"
                )

    def scenario(self, *, patched: bool = False, seed: Optional[int] = None) -> Scenario:
        data = self.patched_data if patched else self.vulnerable_data
        suffix = "patched" if patched else "vulnerable"
        return scenario_from_dict(data, seed=seed, name=f"attack_{self.id}_{suffix}")


def _theoretical_ids() -> frozenset[str]:
    return frozenset(row["id"] for row in load_table1_rows() if row.get("theoretical"))


def _load(attack_id: str) -> AttackSpec:
    path = SCENARIO_DIR / f"attack_{attack_id}.json"
    data = load_json(path)
    meta = data.get("attack") or {}
    if meta.get("id") != attack_id:
        raise ConfigError(f"{path.name} describes attack {meta.get('id')!r}, not {attack_id}")
    patch = data.get("patch")
    if not patch:
        raise ConfigError(f"{path.name} has no patch")
    name, vector = TABLE_1[attack_id]
    return AttackSpec(
        id=attack_id,
        name=name,
        declared_vector=vector,
        script=build_script(data.get("script")),
        notes=tuple(meta.get("notes", [])),
        patch_description=patch.get("description", ""),
        vulnerable_data=data,
        patched_data=apply_patch(data, patch["changes"]),
        theoretical=attack_id in _theoretical_ids(),
    )


@lru_cache(maxsize=None)
def _registry() -> dict[str, AttackSpec]:
    registry = {attack_id: _load(attack_id) for attack_id in sorted(TABLE_1)}
    logger.debug("loaded %d attacks", len(registry))
    return registry


def get_attack(attack_id) -> AttackSpec:
    """
    Look up an attack by id.

    Args:
        attack_id: 7, "7" or "07"

    Returns:
        AttackSpec

    Raises:
        NotFound: If the id is not 01..15
    """
    return _registry()[normalize_attack_id(attack_id)]


def all_attacks() -> list[AttackSpec]:
    return [_registry()[key] for key in sorted(_registry())]


def vulnerable_scenario(attack_id, seed: Optional[int] = None) -> Scenario:
    """Scenario in which the attack succeeds."""
    return get_attack(attack_id).scenario(seed=seed)


def patched_scenario(attack_id, seed: Optional[int] = None) -> Scenario:
    """Scenario with the minimal change that defeats the attack."""
    return get_attack(attack_id).scenario(patched=True, seed=seed)
