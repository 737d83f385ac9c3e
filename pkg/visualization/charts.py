"""
Chart and table utilities for the attack matrix.

This module builds the classification table (declared vs observed) as a
pandas DataFrame and a damage comparison bar chart.
"""

import pandas as pd
import matplotlib.pyplot as plt

from core.harness import ExperimentReport
from core.models import Damage
from core.taxonomy import TABLE_1


def create_declared_dataframe() -> pd.DataFrame:
    """
    Create a DataFrame of the ground-truth classification table.

    Returns:
        DataFrame with one row per attack
    """
    data = []
    for attack_id, (name, vector) in sorted(TABLE_1.items()):
        data.append({
            "No.": attack_id,
            "Attack": name,
            "Element": vector.element.value,
            "Vuln.": vector.vulnerability.value,
            "Method": vector.method.value,
            "Damage": vector.damage.value,
        })
    return pd.DataFrame(data)


def create_matrix_dataframe(report: ExperimentReport) -> pd.DataFrame:
    """
    Create a DataFrame comparing declared and observed classification.

    Args:
        report: Result of run_matrix

    Returns:
        DataFrame indexed like the classification table, plus observed columns
    """
    data = []
    for row in report.rows:
        data.append({
            "No.": row.attack_id,
            "Attack": f"{row.name}*" if row.theoretical else row.name,
            "Element": row.declared["element"],
            "Vuln.": row.declared["vulnerability"],
            "Method": row.declared["method"],
            "Damage": row.declared["damage"],
            "Observed": row.observed_damage.value,
            "Methods seen": ", ".join(row.observed_methods),
            "Match": "✓" if row.matches else "✗",
            "Patched": row.patched_damage.value,
            "Patched abort": row.patched_aborted or "",
        })
    return pd.DataFrame(data)


def create_damage_chart(report: ExperimentReport) -> plt.Figure:
    """
    Create a grouped bar chart of damage counts: declared, observed, patched.

    Args:
        report: Result of run_matrix

    Returns:
        Matplotlib Figure object
    """
    fig, ax = plt.subplots(figsize=(10, 6), facecolor='white')

    levels = [damage.value for damage in Damage]
    declared = {level: 0 for level in levels}
    for row in report.rows:
        declared[row.declared["damage"]] += 1
    series = {
        "Declared": [declared[level] for level in levels],
        "Observed": [report.damage_counts()[level] for level in levels],
        "Patched": [report.damage_counts(patched=True)[level] for level in levels],
    }
    colors = {
        "Declared": "#2E86AB",  # Blue
        "Observed": "#F77F00",  # Orange
        "Patched": "#6C757D",   # Grey
    }

    width = 0.25
    for i, (name, values) in enumerate(series.items()):
        positions = [x + (i - 1) * width for x in range(len(levels))]
        bars = ax.bar(positions, values, width, label=name, color=colors[name],
                      alpha=0.8, edgecolor="black", linewidth=1.5)
        for bar, value in zip(bars, values):
            ax.text(bar.get_x() + bar.get_width() / 2., bar.get_height() + 0.1, str(value),
                    ha='center', va='bottom', fontweight='bold')

    ax.set_xticks(range(len(levels)))
    ax.set_xticklabels(levels)
    ax.set_ylabel('Attacks', fontsize=12, fontweight='bold')
    ax.set_xlabel('Damage', fontsize=12, fontweight='bold')
    ax.set_title(f'Damage by attack (seed {report.seed})', fontsize=14, fontweight='bold', pad=20)
    ax.set_ylim(0, max(len(report.rows), 1) * 1.15)
    ax.legend()
    ax.grid(axis='y', alpha=0.3, linestyle='--')
    ax.set_axisbelow(True)

    plt.tight_layout()

    return fig
