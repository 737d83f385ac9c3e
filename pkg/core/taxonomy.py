"""
Classification engine for downgrade attacks.

This module turns an executed session into observed damage and compares
it with the ground-truth classification table:

- evaluate_damage: Broken, Weakened or None from goals and negotiated mode
- table1_vector: the declared four-vector classification of an attack
- verify_classification: damage and method checks for one attack run

Element and vulnerability are declared per attack, never inferred from a
trace. Damage and method are inferred and verified.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from core.errors import NotFound
from core.models import (
    ACTION_METHODS,
    AbortReason,
    ActionKind,
    Damage,
    Element,
    Method,
    NegotiatedMode,
    Role,
    TaxonomyVector,
    Vulnerability,
)
from core.network import Trace

TABLE1_PATH = Path(__file__).resolve().parent.parent / "data" / "table1.json"

A, V, L = Element.ALGORITHM, Element.VERSION, Element.LAYER
IMPL, DES, TRUST = Vulnerability.IMPLEMENTATION, Vulnerability.DESIGN, Vulnerability.TRUST_MODEL
MOD, DROP, INJ = Method.MODIFICATION, Method.DROPPING, Method.INJECTION
W, B = Damage.WEAKENED, Damage.BROKEN

# Ground-truth classification of the fifteen surveyed attacks
TABLE_1: dict[str, tuple[str, TaxonomyVector]] = {
    "01": ("SSL 2.0 Ciphersuite rollback", TaxonomyVector(A, DES, MOD, B)),
    "02": ("SSL 3.0 Version rollback", TaxonomyVector(V, DES, MOD, B)),
    "03": ("SSL 3.0 key-exchange rollback", TaxonomyVector(A, DES, MOD, B)),
    "04": ("DHE key-exchange rollback", TaxonomyVector(A, DES, MOD, B)),
    "05": ("TLS 1.0-1.1 SLOTH", TaxonomyVector(V, DES, MOD, B)),
    "06": ("POODLE version downgrade", TaxonomyVector(V, IMPL, DROP, B)),
    "07": ("FREAK", TaxonomyVector(A, IMPL, MOD, B)),
    "08": ("DROWN", TaxonomyVector(A, TRUST, MOD, B)),
    "09": ("Forward Secrecy rollback", TaxonomyVector(A, IMPL, DROP, W)),
    "10": ("Logjam", TaxonomyVector(A, DES, MOD, B)),
    "11": ("SMTPS to SMTP", TaxonomyVector(L, DES, MOD, B)),
    "12": ("Proxied HTTPS", TaxonomyVector(L, TRUST, INJ, B)),
    "13": ("TLS 1.3 Version rollback", TaxonomyVector(V, DES, MOD, B)),
    "14": ("TLS 1.3 Downgrade-dance version fallback", TaxonomyVector(V, IMPL, DROP, B)),
    "15": ("TLS 1.3 HelloRetry downgrade", TaxonomyVector(A, DES, INJ, W)),
}


def normalize_attack_id(attack_id) -> str:
    """Accept 7, "7" or "07"."""
    try:
        number = int(attack_id)
    except (TypeError, ValueError):
        raise NotFound(f"unknown attack id {attack_id!r}") from None
    key = f"{number:02d}"
    if key not in TABLE_1:
        raise NotFound(f"unknown attack id {attack_id!r}")
    return key


def table1_vector(attack_id) -> TaxonomyVector:
    """
    Declared classification of an attack.

    Raises:
        NotFound: If the id is not 01..15
    """
    return TABLE_1[normalize_attack_id(attack_id)][1]


def load_table1_rows(path: Path = TABLE1_PATH) -> list[dict]:
    return json.loads(path.read_text(encoding="utf-8"))["rows"]


def load_table1_file(path: Path = TABLE1_PATH) -> dict[str, TaxonomyVector]:
    """Read the checked-in ground-truth data file."""
    rows = load_table1_rows(path)
    return {
        row["id"]: TaxonomyVector(
            Element(row["element"]),
            Vulnerability(row["vulnerability"]),
            Method(row["method"]),
            Damage(row["damage"]),
        )
        for row in rows
    }


# ============================================================================
# OUTCOMES
# ============================================================================

@dataclass(frozen=True)
class SecurityGoalsRecord:
    """
    Which TLS guarantees an adversary broke, each backed by a witness.

    Attributes:
        secrecy_broken: Adversary holds plaintext the client sent
        integrity_broken: An endpoint accepted a record the adversary produced
        authentication_broken: The client accepted a Finished or certificate the adversary produced
    """
    secrecy_broken: bool = False
    integrity_broken: bool = False
    authentication_broken: bool = False
    secrecy_witness: str = ""
    integrity_witness: str = ""
    authentication_witness: str = ""

    def __post_init__(self):
        """Every broken goal needs a witness."""
        for goal in ("secrecy", "integrity", "authentication"):
            if getattr(self, f"{goal}_broken") and not getattr(self, f"{goal}_witness"):
                raise ValueError(f"{goal} marked broken without a witness")

    @property
    def any_broken(self) -> bool:
        return self.secrecy_broken or self.integrity_broken or self.authentication_broken

    def to_dict(self) -> dict:
        return {
            "secrecy": self.secrecy_witness if self.secrecy_broken else None,
            "integrity": self.integrity_witness if self.integrity_broken else None,
            "authentication": self.authentication_witness if self.authentication_broken else None,
        }


INTACT = SecurityGoalsRecord()


@dataclass
class SessionOutcome:
    """
    Everything a finished session produced.

    Attributes:
        negotiated: Mode the client ended up in; None if it aborted before agreement
        preferred: Mode an adversary-free run of the same configurations agrees on
        completed: Whether the client finished and sent its data
        aborted: First abort reason, if any
        abort_party: Endpoint that aborted first
        goals: Broken security goals with witnesses
        knowledge_summary: Adversary knowledge, summarized
        trace: Full event trace
        client_suites: Client suite preference order
        server_suites: Server suite preference order
        client_groups: Client group preference order
        server_groups: Server group preference order
        notes: Assumption notes carried from the attack
    """
    negotiated: Optional[NegotiatedMode]
    preferred: Optional[NegotiatedMode]
    completed: bool
    aborted: Optional[AbortReason]
    abort_party: Optional[Role]
    goals: SecurityGoalsRecord
    knowledge_summary: dict
    trace: Trace
    client_suites: tuple[str, ...] = ()
    server_suites: tuple[str, ...] = ()
    client_groups: tuple[str, ...] = ()
    server_groups: tuple[str, ...] = ()
    notes: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.completed and self.negotiated is None:
            raise ValueError("a completed session must have a negotiated mode")

    @property
    def damage(self) -> Damage:
        return evaluate_damage(self)


def _rank(item: Optional[str], order: tuple[str, ...]) -> int:
    if item is None:
        return len(order)
    return order.index(item) if item in order else len(order)


def _less_preferred(item, best, first: tuple[str, ...], second: tuple[str, ...]) -> bool:
    """Worse for at least one endpoint and better for neither."""
    if item == best:
        return False
    deltas = [_rank(item, order) - _rank(best, order) for order in (first, second) if order]
    return bool(deltas) and all(d >= 0 for d in deltas) and any(d > 0 for d in deltas)


def is_downgraded(outcome: SessionOutcome) -> bool:
    """Whether the negotiated mode is strictly less preferred than the honest agreement."""
    got, want = outcome.negotiated, outcome.preferred
    if got is None or want is None:
        return False
    if want.layer and not got.layer:
        return True
    if got.version is not None and want.version is not None and got.version < want.version:
        return True
    if _less_preferred(got.suite, want.suite, outcome.client_suites, outcome.server_suites):
        return True
    return _less_preferred(got.group, want.group, outcome.client_groups, outcome.server_groups)


def evaluate_damage(outcome: SessionOutcome) -> Damage:
    """
    Observed damage of a session.

    Args:
        outcome: Session outcome with goals and negotiated mode

    Returns:
        BROKEN if any goal is broken, WEAKENED if the session completed in a
        less preferred mode, NONE otherwise
    """
    if outcome.goals.any_broken:
        return Damage.BROKEN
    if outcome.completed and is_downgraded(outcome):
        return Damage.WEAKENED
    return Damage.NONE


def observed_methods(trace: Trace) -> frozenset[Method]:
    """Methods of every non-forward interception in a trace."""
    methods = set()
    for event in trace.of("intercept"):
        if event.action and event.action != ActionKind.FORWARD.value:
            methods.add(ACTION_METHODS[ActionKind(event.action)])
    return frozenset(methods)


@dataclass(frozen=True)
class ClassificationReport:
    """
    Comparison of one attack run with its declared classification.

    Attributes:
        attack_id: Two-digit attack id
        declared: Ground-truth vector
        observed_damage: Damage evaluated from the outcome
        observed_methods: Interception methods found in the trace
        damage_match: observed_damage equals the declared damage
        method_match: Trace methods are exactly the declared method
        element_note: How the element was assigned
    """
    attack_id: str
    declared: TaxonomyVector
    observed_damage: Damage
    observed_methods: frozenset[Method]
    damage_match: bool
    method_match: bool
    element_note: str

    @property
    def matches(self) -> bool:
        return self.damage_match and self.method_match


def verify_classification(attack_id, outcome: SessionOutcome) -> ClassificationReport:
    """
    Check a vulnerable-scenario run against the declared classification.

    Args:
        attack_id: Attack id in any accepted form
        outcome: Outcome of running the attack

    Returns:
        ClassificationReport
    """
    key = normalize_attack_id(attack_id)
    declared = table1_vector(key)
    damage = evaluate_damage(outcome)
    methods = observed_methods(outcome.trace)
    return ClassificationReport(
        attack_id=key,
        declared=declared,
        observed_damage=damage,
        observed_methods=methods,
        damage_match=damage is declared.damage,
        method_match=methods == frozenset({declared.method}),
        element_note=(f"{declared.element.value} / {declared.vulnerability.value} declared by analysis; "
                      f"damage and method checked against the trace"),
    )


def explain_outcome(outcome: SessionOutcome) -> str:
    """
    Generate a short textual explanation of why a session got its damage.

    Args:
        outcome: Evaluated session

    Returns:
        Explanation string
    """
    damage = evaluate_damage(outcome)
    if outcome.aborted is not None and not outcome.completed:
        party = outcome.abort_party.value if outcome.abort_party else "an endpoint"
        return (f"The handshake did not complete: {party} aborted with {outcome.aborted.value}. "
                f"No data was exchanged in a downgraded mode.")

    mode = outcome.negotiated
    described = "plaintext (no TLS layer)" if mode and not mode.layer else \
        f"{mode.version.value if mode and mode.version else '?'} with {mode.suite if mode else '?'}"
    explanations = {
        Damage.BROKEN: (
            f"Security is broken. The session ran in {described} and the adversary "
            f"defeated at least one guarantee: "
            + "; ".join(f"{goal}: {witness}" for goal, witness in outcome.goals.to_dict().items() if witness)
            + "."
        ),
        Damage.WEAKENED: (
            f"Security is weakened. The session completed in {described}, which both endpoints "
            f"rank below the mode they agree on without interference, but no guarantee was broken."
        ),
        Damage.NONE: (
            f"No damage. The session completed in {described}, the mode both endpoints prefer."
        ),
    }
    return explanations[damage]
