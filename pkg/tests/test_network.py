from __future__ import annotations

from core.crypto_model import EMPTY_COLLISIONS
from core.handshake import client_step, new_client_state, new_server_state, server_step
from core.models import AbortReason, Direction, Role
from core.network import Party, Trace, run_network
from tests.conftest import DHE_GCM, ECDHE_GCM, RSA_CBC

PAYLOAD = b"GET / HTTP/1.1\r\n\r\n"


def _parties(scenario, *, client_seed: int = 1, server_seed: int = 2) -> tuple[Party, Party]:
    return (
        Party(Role.CLIENT, new_client_state(client_seed, PAYLOAD),
              lambda s, m, c: client_step(s, scenario.client, m, c)),
        Party(Role.SERVER, new_server_state(server_seed),
              lambda s, m, c: server_step(s, scenario.server, m, c)),
    )


class DropEverything:
    """Interceptor that swallows every message of one kind."""

    def __init__(self, kind: str):
        self.kind = kind
        self.collisions = EMPTY_COLLISIONS

    def intercept(self, message, direction: Direction):
        return [] if message.KIND == self.kind else [(direction, message)]


def test_honest_tls12_session_completes(make_scenario):
    scenario = make_scenario()
    client, server = _parties(scenario)
    result = run_network(client, server)

    assert result.client_state.connected
    assert result.server_state.connected
    assert result.client_state.secrets == result.server_state.secrets
    assert result.client_state.transcript == result.server_state.transcript
    assert result.server_state.received_app == (PAYLOAD,)
    assert result.timeouts == 0


def test_trace_records_sends_and_deliveries(make_scenario):
    scenario = make_scenario(client={"version_range": ["TLS12", "TLS12"], "suites": [DHE_GCM]},
                             server={"version_range": ["TLS12", "TLS12"], "suites": [DHE_GCM]})
    client, server = _parties(scenario)
    trace = Trace()
    result = run_network(client, server, trace=trace)

    sends = [(e.actor, e.kind) for e in trace.of("send")]
    assert sends[:5] == [("client", "CH"), ("server", "SH"), ("server", "SC"), ("server", "SKE"), ("server", "SHD")]
    assert len(trace.of("deliver")) == result.deliveries
    assert trace.of("abort") == []
    assert trace.events[0].step == 0


def test_same_seeds_give_the_same_trace(make_scenario):
    scenario = make_scenario(client={"version_range": ["TLS10", "TLS12"], "suites": [ECDHE_GCM, RSA_CBC]},
                             server={"version_range": ["TLS10", "TLS12"], "suites": [RSA_CBC, ECDHE_GCM]})
    first, second = Trace(), Trace()
    run_network(*_parties(scenario), trace=first)
    run_network(*_parties(scenario), trace=second)
    assert first.canonical_bytes() == second.canonical_bytes()
    assert first.digest() == second.digest()


def test_dropped_hello_times_out(make_scenario):
    scenario = make_scenario()
    client, server = _parties(scenario)
    result = run_network(client, server, DropEverything("CH"))

    assert result.client_state.aborted is AbortReason.HANDSHAKE_TIMEOUT
    assert result.timeouts == 1
    assert result.deliveries == 0
    aborts = result.trace.of("abort")
    assert [(e.actor, e.kind) for e in aborts] == [("client", "HandshakeTimeout")]


def test_downgrade_dance_uses_several_timeouts(make_scenario):
    scenario = make_scenario(
        client={"version_range": ["SSL30", "TLS12"], "suites": [RSA_CBC], "bug_flags": ["DOWNGRADE_DANCE"]},
        server={"version_range": ["SSL30", "TLS12"], "suites": [RSA_CBC]},
    )
    client, server = _parties(scenario)
    result = run_network(client, server, DropEverything("CH"), max_timeouts=2)
    assert result.timeouts == 2
    assert len(result.trace.of("timeout")) == 2
    assert [e.kind for e in result.trace.of("send")] == ["CH", "CH", "CH"]


def test_delivery_cap_stops_the_run(make_scenario):
    scenario = make_scenario()
    client, server = _parties(scenario)
    result = run_network(client, server, max_deliveries=3)
    assert result.deliveries == 3
    assert not result.client_state.connected
