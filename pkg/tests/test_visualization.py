from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pytest  # noqa: E402

from core.harness import run_matrix, run_session  # noqa: E402
from core.network import Trace  # noqa: E402
from utils.scenario_io import SCENARIO_DIR, load_scenario  # noqa: E402
from visualization.charts import (  # noqa: E402
    create_damage_chart,
    create_declared_dataframe,
    create_matrix_dataframe,
)
from visualization.graphs import build_sequence_graph, draw_sequence_diagram  # noqa: E402


@pytest.fixture(scope="module")
def report():
    return run_matrix(seed=7, attack_ids=["09", "10"])


def test_sequence_graph_of_a_dropping_attack():
    outcome = run_session(load_scenario(SCENARIO_DIR / "attack_09.json"))
    G = build_sequence_graph(outcome.trace)
    assert G.number_of_nodes() == len(outcome.trace)
    assert {d["lane"] for _, d in G.nodes(data=True)} <= {"client", "adversary", "server"}
    actions = {d["action"] for _, _, d in G.edges(data=True)}
    assert "deliver" in actions
    dropped = [n for n, d in G.nodes(data=True) if d["action"] == "drop"]
    assert dropped
    # a dropped message never reaches its receiver
    assert all(G.out_degree(n) == 0 for n in dropped)


def test_empty_trace_draws():
    assert build_sequence_graph(Trace()).number_of_nodes() == 0
    fig = draw_sequence_diagram(Trace())
    assert isinstance(fig, plt.Figure)
    plt.close(fig)


def test_sequence_diagram():
    outcome = run_session(load_scenario(SCENARIO_DIR / "attack_10.json"))
    fig = draw_sequence_diagram(outcome.trace, title="Logjam")
    assert isinstance(fig, plt.Figure)
    plt.close(fig)


def test_declared_dataframe():
    df = create_declared_dataframe()
    assert list(df.columns) == ["No.", "Attack", "Element", "Vuln.", "Method", "Damage"]
    assert len(df) == 15
    assert df.loc[df["No."] == "12", "Element"].item() == "Layer"


def test_matrix_dataframe_and_chart(report):
    df = create_matrix_dataframe(report)
    assert list(df["No."]) == ["09", "10"]
    assert list(df["Observed"]) == ["Weakened", "Broken"]
    assert set(df["Match"]) == {"✓"}
    fig = create_damage_chart(report)
    assert isinstance(fig, plt.Figure)
    plt.close(fig)
