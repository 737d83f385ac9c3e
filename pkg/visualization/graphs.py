"""
Message-sequence visualization of a session trace using NetworkX.

Every trace event becomes a node on one of three lanes (client, adversary,
server); edges follow each message from its sender through the adversary
to its receiver.
"""

import networkx as nx
import matplotlib.pyplot as plt

from core.network import Trace

LANES = ("client", "adversary", "server")

# Trace actors that are drawn on the middle lane
_MIDDLE_ACTORS = {"adversary", "network"}

ACTION_COLORS = {
    "forward": "#6C757D",  # Grey
    "modify": "#F77F00",   # Orange
    "drop": "#E63946",     # Red
    "inject": "#A23B72",   # Purple
    "deliver": "#2E86AB",  # Blue
}

EVENT_COLORS = {
    "send": "#2E86AB",
    "deliver": "#2E86AB",
    "intercept": "#FCBF49",
    "oracle": "#E63946",
    "abort": "#E63946",
    "timeout": "#6C757D",
    "note": "#ADB5BD",
}


def _lane(actor: str) -> str:
    return "adversary" if actor in _MIDDLE_ACTORS else actor


def build_sequence_graph(trace: Trace) -> nx.DiGraph:
    """
    Create a NetworkX graph of a trace.

    Nodes are named "<index>:<lane>" and carry lane, row, event, kind and
    label attributes. Edges carry the interception action that moved the
    message on ("deliver" for the final hop).

    Args:
        trace: Session trace

    Returns:
        NetworkX DiGraph
    """
    G = nx.DiGraph()
    # Last node that handled a message in flight, per (kind, direction)
    in_flight: dict[tuple, list[str]] = {}

    for row, event in enumerate(trace):
        lane = _lane(event.actor)
        node = f"{row}:{lane}"
        label = event.kind if event.event in ("send", "deliver") else f"{event.event} {event.kind}"
        if event.action and event.action != "forward":
            label = f"{event.action} {event.kind}"
        G.add_node(node, lane=lane, row=row, event=event.event, kind=event.kind,
                   action=event.action, label=label)

        key = (event.kind, event.direction)
        if event.event == "send":
            in_flight.setdefault(key, []).append(node)
        elif event.event == "intercept":
            pending = in_flight.get(key)
            if pending and not event.detail.get("in_reply") and event.action != "inject":
                G.add_edge(pending.pop(0), node, action=event.action)
            if event.action != "drop":
                in_flight.setdefault(key, []).append(node)
        elif event.event == "deliver":
            pending = in_flight.get(key)
            if pending:
                G.add_edge(pending.pop(0), node, action="deliver")

    return G


def _lane_layout(G: nx.DiGraph) -> dict:
    """Lanes left to right, trace order top to bottom."""
    rows = max((d["row"] for _, d in G.nodes(data=True)), default=0) + 1
    return {
        node: (LANES.index(d["lane"]) if d["lane"] in LANES else 1, 1.0 - d["row"] / rows)
        for node, d in G.nodes(data=True)
    }


def draw_sequence_diagram(
    trace: Trace,
    title: str = "Session trace",
    figsize: tuple = (12, 10),
    dpi: int = 100
) -> plt.Figure:
    """
    Draw a trace as a three-lane message-sequence diagram.

    Args:
        trace: Session trace
        title: Figure title
        figsize: Figure size (width, height)
        dpi: Resolution in dots per inch

    Returns:
        Matplotlib Figure object
    """
    G = build_sequence_graph(trace)
    pos = _lane_layout(G)

    fig, ax = plt.subplots(figsize=figsize, dpi=dpi, facecolor='white')

    for x, lane in enumerate(LANES):
        ax.axvline(x, color="#DEE2E6", linewidth=2, zorder=0)
        ax.text(x, 1.04, lane.capitalize(), ha="center", fontsize=12, fontweight="bold")

    node_colors = [EVENT_COLORS.get(d["event"], "#6C757D") for _, d in G.nodes(data=True)]
    nx.draw_networkx_nodes(G, pos, node_color=node_colors, node_size=60, ax=ax, alpha=0.9)

    for action, color in ACTION_COLORS.items():
        edges = [(u, v) for u, v, d in G.edges(data=True) if d.get("action") == action]
        if edges:
            nx.draw_networkx_edges(
                G, pos,
                edgelist=edges,
                edge_color=color,
                width=1.5,
                arrows=True,
                arrowsize=12,
                arrowstyle='->',
                ax=ax
            )

    # Labels only where something other than a plain delivery happens
    labels = {n: d["label"] for n, d in G.nodes(data=True) if d["event"] != "deliver"}
    label_pos = {n: (x + (0.04 if x < 2 else -0.04), y) for n, (x, y) in pos.items()}
    for node, text in labels.items():
        x, y = label_pos[node]
        ax.text(x, y, text, fontsize=7, va="center", ha="left" if x < 2 else "right")

    ax.set_title(title, fontsize=14, fontweight="bold", pad=30)
    ax.set_xlim(-0.5, 2.5)
    ax.axis("off")

    caption_text = (
        "Grey: forwarded, orange: modified, red: dropped, purple: injected. "
        "Red nodes mark oracle calls and aborts."
    )
    fig.text(0.5, 0.02, caption_text, ha='center', fontsize=9,
             style='italic', color='#666666', wrap=True)

    plt.tight_layout()
    plt.subplots_adjust(bottom=0.06)

    return fig
