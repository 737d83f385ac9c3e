"""
TLS Downgrade Lab

An interactive dashboard for running the fifteen surveyed downgrade
attacks, inspecting their traces, and reproducing the classification table.
"""

import streamlit as st
import pandas as pd

# Core modules
from core.attacks import all_attacks
from core.config import SESSION
from core.errors import DowngradeLabError
from core.harness import run_attack, run_matrix, emit_report
from core.models import Damage
from core.taxonomy import explain_outcome
from visualization.graphs import draw_sequence_diagram
from visualization.charts import (
    create_declared_dataframe,
    create_matrix_dataframe,
    create_damage_chart
)


# Page configuration
st.set_page_config(
    page_title="TLS Downgrade Lab",
    page_icon="🔐",
    layout="wide",
    initial_sidebar_state="collapsed"
)

st.markdown("""
<style>
.stApp {
    background-color: #FFFFFF !important;
}
h1, h2, h3 {
    color: #1a1a1a !important;
}
[data-testid="stMetricValue"] {
    font-weight: 700 !important;
}
</style>
""", unsafe_allow_html=True)

DAMAGE_COLORS = {
    Damage.BROKEN.value: "#E63946",
    Damage.WEAKENED.value: "#F77F00",
    Damage.NONE.value: "#28a745",
}


def initialize_session_state():
    """Initialize session state variables."""
    if 'attack_run' not in st.session_state:
        st.session_state.attack_run = None
    if 'matrix' not in st.session_state:
        st.session_state.matrix = None


def _section(title: str, subtitle: str = ""):
    st.markdown(f"""
    <div style='margin-bottom: 20px;'>
        <h2 style='margin-top: 0; padding-left: 8px; border-left: 3px solid #2E86AB; color: #2E86AB; font-size: 1.5rem;'>
            {title}
        </h2>
        <p style='color: #6c757d; margin: 4px 0 0 12px;'>{subtitle}</p>
    </div>
    """, unsafe_allow_html=True)


def _damage_badge(label: str, damage: str):
    color = DAMAGE_COLORS.get(damage, "#6C757D")
    st.markdown(f"""
    <div style='padding: 15px; border-radius: 8px; border-left: 5px solid {color}; background-color: #f8f9fa;'>
        <p style='margin: 0; color: #666; font-size: 13px;'>{label}</p>
        <p style='margin: 6px 0 0 0; font-size: 22px; font-weight: 700; color: {color};'>{damage}</p>
    </div>
    """, unsafe_allow_html=True)


def _highlight_mismatch(row):
    bad = row["Match"] != "✓"
    return ["background-color: #fdecea" if bad else "" for _ in row]


def show_attack_runner():
    """Single attack: vulnerable and patched runs, explanation and trace."""
    _section("🎯 Attack Runner", "Run one attack against its vulnerable and patched configurations")

    attacks = all_attacks()
    labels = {f"{a.id} {a.name}{'*' if a.theoretical else ''}": a.id for a in attacks}

    col1, col2, col3 = st.columns([3, 1, 1])
    with col1:
        choice = st.selectbox("**Attack**", options=list(labels), key="attack_input")
    with col2:
        seed = st.number_input("Seed", min_value=0, max_value=2 ** 31, value=SESSION["default_seed"], step=1,
                               key="seed_input")
    with col3:
        show_patched = st.toggle("Patched", value=False, help="Show the patched scenario")

    if st.button("▶️ Run attack", type="primary", use_container_width=True):
        try:
            st.session_state.attack_run = run_attack(labels[choice], seed=int(seed))
        except DowngradeLabError as e:
            st.error(f"❌ Configuration error: {e}")
            return

    run = st.session_state.attack_run
    if run is None:
        st.info("Pick an attack and run it.")
        return

    attack = run.attack
    vector = attack.declared_vector
    st.markdown("---")
    st.subheader(f"{attack.id} {attack.name}")

    col1, col2, col3, col4 = st.columns(4)
    col1.metric("Element", vector.element.value)
    col2.metric("Vulnerability", vector.vulnerability.value)
    col3.metric("Method", vector.method.value)
    col4.metric("Declared damage", vector.damage.value)

    col1, col2, col3 = st.columns(3)
    with col1:
        _damage_badge("Observed (vulnerable)", run.vulnerable.damage.value)
    with col2:
        _damage_badge("Observed (patched)", run.patched.damage.value)
    with col3:
        verdict = "match" if run.report.matches else "mismatch"
        methods = ", ".join(sorted(m.value for m in run.report.observed_methods)) or "none"
        st.markdown(f"""
        <div style='padding: 15px; border-radius: 8px; border-left: 5px solid #2E86AB; background-color: #f8f9fa;'>
            <p style='margin: 0; color: #666; font-size: 13px;'>Classification check</p>
            <p style='margin: 6px 0 0 0; font-size: 22px; font-weight: 700; color: #2E86AB;'>{verdict}</p>
            <p style='margin: 4px 0 0 0; font-size: 13px; color: #666;'>methods seen: {methods}</p>
        </div>
        """, unsafe_allow_html=True)

    outcome = run.patched if show_patched else run.vulnerable

    with st.expander("📖 Explanation", expanded=True):
        st.write(explain_outcome(outcome))
        goals = {goal: witness for goal, witness in outcome.goals.to_dict().items() if witness}
        for goal, witness in goals.items():
            st.markdown(f"- **{goal}**: {witness}")
        if show_patched:
            st.caption(f"Patch: {attack.patch_description}")

    if attack.notes:
        with st.expander("⚠️ Worst-case assumptions", expanded=attack.theoretical):
            for note in attack.notes:
                st.markdown(f"- {note}")

    with st.expander("🧠 Adversary knowledge", expanded=False):
        facts = outcome.knowledge_summary.get("facts", [])
        if facts:
            st.dataframe(pd.DataFrame({"Fact": facts}), use_container_width=True, hide_index=True)
        else:
            st.caption("The adversary learned nothing beyond the wire bytes.")

    st.subheader("Message sequence")
    title = f"{attack.id} {attack.name} ({'patched' if show_patched else 'vulnerable'})"
    fig = draw_sequence_diagram(outcome.trace, title=title)
    st.pyplot(fig, use_container_width=True)


def show_matrix():
    """Full matrix against the classification table."""
    _section("📊 Classification Matrix", "Run all fifteen attacks and compare with the declared table")

    col1, col2 = st.columns([1, 2])
    with col1:
        seed = st.number_input("Matrix seed", min_value=0, max_value=2 ** 31, value=SESSION["default_seed"],
                               step=1, key="matrix_seed_input")
    with col2:
        st.markdown("<br>", unsafe_allow_html=True)
        if st.button("▶️ Run matrix", type="primary", use_container_width=True):
            with st.spinner("Running fifteen attacks..."):
                st.session_state.matrix = run_matrix(seed=int(seed))

    report = st.session_state.matrix
    if report is None:
        st.dataframe(create_declared_dataframe(), use_container_width=True, hide_index=True)
        st.caption("* theoretical attack")
        return

    summary = report.summary()
    col1, col2, col3 = st.columns(3)
    col1.metric("Damage matches", f"{summary['damage_matches']}/{summary['attacks']}")
    col2.metric("Method matches", f"{summary['method_matches']}/{summary['attacks']}")
    col3.metric("Patched runs broken", len(report.patched_broken))

    if report.succeeded:
        st.success("✅ Observed classification matches the table for every attack.")
    else:
        st.error(f"❌ Mismatched attacks: {', '.join(summary['mismatched']) or 'none'}; "
                 f"broken patches: {', '.join(report.patched_broken) or 'none'}")

    df = create_matrix_dataframe(report)
    st.dataframe(df.style.apply(_highlight_mismatch, axis=1), use_container_width=True, hide_index=True)
    st.caption("* theoretical attack, run under worst-case assumptions")

    st.pyplot(create_damage_chart(report), use_container_width=True)

    col1, col2 = st.columns(2)
    with col1:
        st.download_button("⬇️ JSON report", emit_report(report, "json"),
                           file_name=f"matrix_seed{report.seed}.json", mime="application/json")
    with col2:
        st.download_button("⬇️ Markdown table", emit_report(report, "md"),
                           file_name=f"matrix_seed{report.seed}.md", mime="text/markdown")


def main():
    """Main application function."""
    initialize_session_state()

    st.markdown("""
    <div style='padding: 20px 0; margin-bottom: 30px; border-bottom: 2px solid #e9ecef;'>
        <h1 style='color: #1a1a1a; margin: 0; padding: 0; border: none; font-size: 2rem; font-weight: 600;'>
            🔐 TLS Downgrade Attack Lab
        </h1>
        <p style='color: #6c757d; margin-top: 8px; font-size: 1rem; margin-bottom: 0;'>
            Simulated handshakes, a scripted man-in-the-middle, and a four-dimension attack taxonomy
        </p>
    </div>
    """, unsafe_allow_html=True)

    col1, col2, col3 = st.columns([1, 1, 1])
    with col3:
        if st.button("🔄 Reset All", use_container_width=True, type="secondary"):
            st.session_state.attack_run = None
            st.session_state.matrix = None
            st.rerun()

    runner_tab, matrix_tab = st.tabs(["Attack runner", "Matrix"])
    with runner_tab:
        show_attack_runner()
    with matrix_tab:
        show_matrix()


if __name__ == "__main__":
    main()
