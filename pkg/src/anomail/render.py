"""Render detection reports to figure files alongside the JSON output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import networkx as nx

from .graph import CorrelationGraph
from .pipeline import DetectionReport

# Stripping the Date keeps PNG output byte-stable across runs.
_PNG_METADATA = {"Date": None}


def render_graph_figure(graph: CorrelationGraph, path: str | Path, seed: int = 0) -> None:
    """Draw the correlation graph with a force-directed layout, nodes
    colored by source country."""
    g = nx.Graph()
    for node in graph.nodes:
        g.add_node(node.event_id, country=node.country)
    for edge in graph.edges:
        g.add_edge(edge.source, edge.target, shared=",".join(edge.shared))

    fig, ax = plt.subplots(figsize=(7, 6))
    if g.number_of_nodes():
        pos = nx.spring_layout(g, seed=int(seed) % 2**32)
        countries = sorted({node.country for node in graph.nodes})
        cmap = plt.get_cmap("tab20")
        color_of = {c: cmap(i % 20) for i, c in enumerate(countries)}
        nx.draw_networkx_edges(g, pos, ax=ax, alpha=0.4, width=0.8)
        for country in countries:
            ids = [n.event_id for n in graph.nodes if n.country == country]
            nx.draw_networkx_nodes(
                g, pos, nodelist=ids, node_size=60,
                node_color=[color_of[country]], label=country, ax=ax,
            )
        ax.legend(loc="upper right", fontsize=8, title="country")
    else:
        ax.text(0.5, 0.5, "no flagged events", ha="center", va="center")
    ax.set_title(f"correlation graph: {len(graph.nodes)} events, {len(graph.edges)} links")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def render_counts_figure(report: DetectionReport, path: str | Path) -> None:
    """Detection funnel for one window: detect -> novel -> rare."""
    stages = ["detect window", "novel", "rare (flagged)"]
    values = [
        report.counts["detect_events"],
        report.counts["novel"],
        report.counts["rare"],
    ]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    bars = ax.barh(stages[::-1], values[::-1], color=["#c44e52", "#dd8452", "#4c72b0"])
    for bar, value in zip(bars, values[::-1]):
        ax.text(bar.get_width(), bar.get_y() + bar.get_height() / 2,
                f" {value}", va="center", fontsize=9)
    ax.set_xlabel("events")
    ax.set_title(
        f"detect {report.detect_start:%Y-%m-%d %H:%M} .. {report.detect_end:%Y-%m-%d %H:%M}"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
