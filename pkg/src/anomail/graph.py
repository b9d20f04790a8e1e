"""Correlation graph over flagged events and its JSON/DOT export.

Two events are linked when they share a source IP, a sender, or an
identical non-empty subject; the edge records every matching attribute.
Country is node metadata only (renderers group by it), never an edge
criterion.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidValue, MalformedLine, UnsupportedFormat
from .events import EmailEvent

EDGE_ATTRIBUTES = ("sender", "src_ip", "subject")


@dataclass(frozen=True)
class GraphNode:
    event_id: str
    country: str
    src_ip: str
    sender: str
    subject: str


@dataclass(frozen=True)
class GraphEdge:
    source: str
    target: str
    shared: tuple[str, ...]


@dataclass(frozen=True)
class CorrelationGraph:
    """Canonical form: nodes sorted by event_id, edges by (source, target)
    with source < target, so equal graphs compare equal and exports are
    byte-stable."""

    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.event_id))
        )
        object.__setattr__(
            self, "edges", tuple(sorted(self.edges, key=lambda e: (e.source, e.target)))
        )
        ids = {node.event_id for node in self.nodes}
        for edge in self.edges:
            if edge.source == edge.target:
                raise InvalidValue(f"self-edge on {edge.source!r}")
            if not edge.shared:
                raise InvalidValue(f"edge {edge.source!r}--{edge.target!r} shares nothing")
            if edge.source not in ids or edge.target not in ids:
                raise InvalidValue(
                    f"edge {edge.source!r}--{edge.target!r} references a missing node"
                )


def build_graph(events: Sequence[EmailEvent]) -> CorrelationGraph:
    """One node per event; an undirected edge wherever src_ip, sender
    (mail_from) or a non-empty subject matches exactly."""
    nodes = tuple(
        GraphNode(e.event_id, e.src_country, e.src_ip, e.mail_from, e.subject)
        for e in events
    )
    shared: dict[tuple[str, str], set[str]] = defaultdict(set)
    selectors = (
        ("src_ip", lambda e: e.src_ip),
        ("sender", lambda e: e.mail_from),
        ("subject", lambda e: e.subject or None),  # empty subjects never link
    )
    for attribute, selector in selectors:
        groups: dict[str, list[str]] = defaultdict(list)
        for event in events:
            value = selector(event)
            if value is not None:
                groups[value].append(event.event_id)
        for members in groups.values():
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    a, b = members[i], members[j]
                    if a == b:
                        continue
                    pair = (a, b) if a < b else (b, a)
                    shared[pair].add(attribute)
    edges = tuple(
        GraphEdge(source, target, tuple(sorted(attrs)))
        for (source, target), attrs in sorted(shared.items())
    )
    return CorrelationGraph(nodes, edges)


def connected_components(graph: CorrelationGraph) -> list[set[str]]:
    """Maximal connected node sets, ordered by smallest contained event_id."""
    adjacency: dict[str, list[str]] = {node.event_id: [] for node in graph.nodes}
    for edge in graph.edges:
        adjacency[edge.source].append(edge.target)
        adjacency[edge.target].append(edge.source)
    seen: set[str] = set()
    components: list[set[str]] = []
    for node_id in adjacency:
        if node_id in seen:
            continue
        stack = [node_id]
        component = set()
        while stack:
            current = stack.pop()
            if current in component:
                continue
            component.add(current)
            stack.extend(n for n in adjacency[current] if n not in component)
        seen |= component
        components.append(component)
    return sorted(components, key=min)


def _node_record(node: GraphNode) -> dict[str, str]:
    return {
        "id": node.event_id,
        "country": node.country,
        "src_ip": node.src_ip,
        "sender": node.sender,
        "subject": node.subject,
    }


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph(graph: CorrelationGraph, format: str = "json") -> str:
    """Deterministic text export.

    json: the node-link shape force-directed viewers consume, nodes and
    links sorted by id. dot: an undirected graphviz graph with the shared
    attributes as edge labels.
    """
    nodes = graph.nodes  # already canonically sorted
    edges = graph.edges
    if format == "json":
        payload = {
            "nodes": [_node_record(n) for n in nodes],
            "links": [
                {"source": e.source, "target": e.target, "shared": list(e.shared)}
                for e in edges
            ],
        }
        return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))
    if format == "dot":
        lines = ["graph correlation {"]
        for node in nodes:
            attrs = (
                f"country={_dot_quote(node.country)}"
                f" src_ip={_dot_quote(node.src_ip)}"
                f" sender={_dot_quote(node.sender)}"
                f" subject={_dot_quote(node.subject)}"
            )
            lines.append(f"  {_dot_quote(node.event_id)} [{attrs}];")
        for edge in edges:
            label = _dot_quote(",".join(edge.shared))
            lines.append(
                f"  {_dot_quote(edge.source)} -- {_dot_quote(edge.target)} [label={label}];"
            )
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise UnsupportedFormat(f"unknown export format {format!r}")


def parse_graph_json(text: str) -> CorrelationGraph:
    """Inverse of the json export; round-trips exactly."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"graph json: {exc}") from None
    nodes = tuple(
        GraphNode(n["id"], n["country"], n["src_ip"], n["sender"], n["subject"])
        for n in payload["nodes"]
    )
    edges = tuple(
        GraphEdge(l["source"], l["target"], tuple(l["shared"])) for l in payload["links"]
    )
    return CorrelationGraph(nodes, edges)
