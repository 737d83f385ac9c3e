"""
In-order simulated network.

Two parties exchange messages through a FIFO queue. Every message a party
sends passes through the adversary (when present) before it is queued, so
the adversary sees traffic in exactly the order it is delivered. When the
queue runs dry while the client still waits for a reply, the network hands
the client a Timeout; that is how dropped messages surface.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol

from core.config import SESSION
from core.crypto_model import EMPTY_COLLISIONS, CollisionTable, digest_bytes
from core.messages import START, TIMEOUT
from core.models import Direction, HashId, Role
from utils.codec import to_plain

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceEvent:
    """
    One line of a session trace.

    Attributes:
        step: Delivery counter at the time of the event
        actor: "client", "server", "adversary" or "network"
        event: send, deliver, intercept, oracle, abort, timeout or note
        kind: Message KIND, oracle name or abort reason
        direction: Travel direction for message events
        action: Interception kind for adversary events
        detail: JSON-friendly extra data
    """
    step: int
    actor: str
    event: str
    kind: str
    direction: Optional[str] = None
    action: Optional[str] = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "actor": self.actor,
            "event": self.event,
            "kind": self.kind,
            "direction": self.direction,
            "action": self.action,
            "detail": to_plain(self.detail),
        }


class Trace:
    """Append-only event log of one session."""

    def __init__(self):
        self.events: list[TraceEvent] = []
        self.step = 0

    def record(self, actor: str, event: str, kind: str, direction: Optional[Direction] = None,
               action: Optional[str] = None, **detail: Any) -> TraceEvent:
        entry = TraceEvent(
            step=self.step,
            actor=actor,
            event=event,
            kind=kind,
            direction=direction.value if direction is not None else None,
            action=action,
            detail=detail,
        )
        self.events.append(entry)
        return entry

    def __iter__(self):
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of(self, event: str) -> list[TraceEvent]:
        return [e for e in self.events if e.event == event]

    def to_dicts(self) -> list[dict]:
        return [e.to_dict() for e in self.events]

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dicts(), sort_keys=True, separators=(",", ":")).encode("utf-8")

    def digest(self) -> str:
        """STRONG hash of the canonical trace bytes, hex encoded."""
        return digest_bytes(self.canonical_bytes(), HashId.STRONG).hex()


StepFn = Callable[[Any, Any, CollisionTable], tuple[Any, list]]


@dataclass
class Party:
    """
    An endpoint plugged into the network.

    Attributes:
        role: Client or server
        state: Current endpoint state; replaced on every step
        step: (state, incoming, collisions) -> (state, outgoing)
        waiting: Whether the party still expects input; only the client gets timeouts
    """
    role: Role
    state: Any
    step: StepFn
    waiting: Callable[[Any], bool] = lambda state: state.waiting

    @property
    def outbound(self) -> Direction:
        return Direction.TO_SERVER if self.role is Role.CLIENT else Direction.TO_CLIENT


class Interceptor(Protocol):
    collisions: CollisionTable

    def intercept(self, message, direction: Direction) -> list[tuple[Direction, Any]]:
        ...


@dataclass
class NetworkResult:
    client_state: Any
    server_state: Any
    trace: Trace
    deliveries: int
    timeouts: int


def _aborted(state) -> Optional[str]:
    reason = getattr(state, "aborted", None)
    return reason.value if reason is not None else None


def run_network(
    client: Party,
    server: Party,
    adversary: Optional[Interceptor] = None,
    *,
    trace: Optional[Trace] = None,
    max_timeouts: int = SESSION["max_timeouts"],
    max_deliveries: int = SESSION["max_deliveries"],
) -> NetworkResult:
    """
    Drive two parties until neither has anything left to do.

    Args:
        client: Initiating party; receives START first and all timeouts
        server: Responding party
        adversary: Optional interceptor placed on the wire
        trace: Trace to append to
        max_timeouts: Timeouts handed to the client before giving up
        max_deliveries: Hard cap on delivered messages

    Returns:
        NetworkResult with final states and the trace
    """
    trace = trace if trace is not None else Trace()
    queue: deque[tuple[Direction, Any]] = deque()
    parties = {Role.CLIENT: client, Role.SERVER: server}

    def collisions() -> CollisionTable:
        return adversary.collisions if adversary is not None else EMPTY_COLLISIONS

    def send(party: Party, outgoing: list) -> None:
        for message in outgoing:
            direction = party.outbound
            trace.record(party.role.value, "send", message.KIND, direction)
            if adversary is None:
                queue.append((direction, message))
            else:
                queue.extend(adversary.intercept(message, direction))

    def feed(party: Party, incoming) -> None:
        before = _aborted(party.state)
        party.state, outgoing = party.step(party.state, incoming, collisions())
        after = _aborted(party.state)
        if after is not None and before is None:
            trace.record(party.role.value, "abort", after,
                         reason=getattr(party.state, "abort_detail", ""))
        send(party, outgoing)

    feed(client, START)
    deliveries = 0
    timeouts = 0
    while deliveries < max_deliveries:
        if queue:
            direction, message = queue.popleft()
            deliveries += 1
            trace.step = deliveries
            receiver = parties[direction.receiver]
            trace.record(receiver.role.value, "deliver", message.KIND, direction)
            feed(receiver, message)
            continue
        if client.waiting(client.state) and timeouts < max_timeouts:
            timeouts += 1
            trace.record("network", "timeout", TIMEOUT.KIND, Direction.TO_CLIENT)
            feed(client, TIMEOUT)
            continue
        break
    else:
        logger.warning("delivery cap of %d reached", max_deliveries)

    logger.debug("network quiescent after %d deliveries, %d timeouts", deliveries, timeouts)
    return NetworkResult(client.state, server.state, trace, deliveries, timeouts)
