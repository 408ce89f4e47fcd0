"""Signed relationship graphs, triangle balance checks, DOT/JSON export.

Edges carry a sign: ``same`` (+1) when the two markets were predicted to
resolve identically, ``different`` (-1) otherwise. A closed triangle is
consistent iff the product of its signs is +1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

from .evaluation import EvaluatedRelation
from .market_data import MarketRecord

SAME = "same"
DIFFERENT = "different"

NODE_COLORS = {"YES": "#2e8b57", "NO": "#c0392b"}
EDGE_COLORS = {SAME: "black", DIFFERENT: "blue"}


@dataclass(frozen=True)
class Edge:
    question_a: str
    question_b: str
    sign: str
    predicted_correct: bool
    confidence: float

    @property
    def key(self) -> frozenset[str]:
        return frozenset((self.question_a, self.question_b))


@dataclass
class SignedGraph:
    nodes: dict[str, str] = field(default_factory=dict)  # question -> outcome
    edges: dict[frozenset[str], Edge] = field(default_factory=dict)
    conflicts: int = 0

    def add_edge(self, edge: Edge) -> None:
        if edge.question_a == edge.question_b:
            raise ValueError("self-loops are not allowed")
        for q in (edge.question_a, edge.question_b):
            if q not in self.nodes:
                raise ValueError(f"edge references unknown node {q!r}")
        self.edges[edge.key] = edge

    def sign(self, a: str, b: str) -> str | None:
        edge = self.edges.get(frozenset((a, b)))
        return edge.sign if edge else None

    def neighbours(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {q: set() for q in self.nodes}
        for e in self.edges.values():
            adj[e.question_a].add(e.question_b)
            adj[e.question_b].add(e.question_a)
        return adj

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignedGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges


@dataclass(frozen=True)
class TriangleViolation:
    questions: tuple[str, str, str]
    signs: tuple[str, str, str]  # (q0-q1, q1-q2, q0-q2)


def build_graph(
    evaluated: Iterable[EvaluatedRelation], markets: Mapping[str, MarketRecord]
) -> SignedGraph:
    """One edge per eligible predicted pair; nodes carry realised outcomes.

    When several relations hit the same pair the most confident wins
    (earliest on ties); disagreeing signs bump ``graph.conflicts``.
    """
    graph = SignedGraph()
    for ev in evaluated:
        if not ev.eligible:
            continue
        rel = ev.relation
        a, b = rel.question_i.strip(), rel.question_j.strip()
        for q in (a, b):
            graph.nodes[q] = markets[q].outcome.value
        edge = Edge(a, b, SAME if rel.is_same_outcome else DIFFERENT, ev.is_correct, rel.confidence_score)
        prior = graph.edges.get(edge.key)
        if prior is not None:
            if prior.sign != edge.sign:
                graph.conflicts += 1
            if edge.confidence <= prior.confidence:
                continue
        graph.add_edge(edge)
    return graph


def is_balanced(signs: Iterable[str]) -> bool:
    """Even number of ``different`` edges."""
    return sum(s == DIFFERENT for s in signs) % 2 == 0


def triangles(graph: SignedGraph) -> list[tuple[str, str, str]]:
    """All closed triangles, each as a sorted question triple."""
    adj = graph.neighbours()
    found = []
    for a in sorted(adj):
        for b, c in combinations(sorted(n for n in adj[a] if n > a), 2):
            if c in adj[b]:
                found.append((a, b, c))
    return found


def find_triangle_violations(graph: SignedGraph) -> list[TriangleViolation]:
    out = []
    for a, b, c in triangles(graph):
        signs = (graph.sign(a, b), graph.sign(b, c), graph.sign(a, c))
        if not is_balanced(signs):
            out.append(TriangleViolation((a, b, c), signs))
    return out


def violation_rate(graph: SignedGraph) -> float | None:
    tri = triangles(graph)
    if not tri:
        return None
    return len(find_triangle_violations(graph)) / len(tri)


def _sorted_edges(graph: SignedGraph) -> list[Edge]:
    return sorted(graph.edges.values(), key=lambda e: tuple(sorted((e.question_a, e.question_b))))


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: SignedGraph, name: str = "relations") -> str:
    """Render for Graphviz.

    Node fill encodes the realised outcome, edge colour the predicted sign
    (black same, blue different) and edge style the correctness of the
    prediction (solid correct, dashed wrong).
    """
    lines = [f"graph {_dot_quote(name)} {{", "  node [shape=box style=filled fontcolor=white];"]
    for q in sorted(graph.nodes):
        outcome = graph.nodes[q]
        lines.append(
            f"  {_dot_quote(q)} [fillcolor={_dot_quote(NODE_COLORS[outcome])} outcome={outcome}];"
        )
    for e in _sorted_edges(graph):
        style = "solid" if e.predicted_correct else "dashed"
        lines.append(
            f"  {_dot_quote(e.question_a)} -- {_dot_quote(e.question_b)} "
            f"[color={EDGE_COLORS[e.sign]} style={style} sign={e.sign} "
            f"label={_dot_quote(format(e.confidence, '.2f'))}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(graph: SignedGraph) -> str:
    doc = {
        "nodes": [{"question": q, "outcome": graph.nodes[q]} for q in sorted(graph.nodes)],
        "edges": [
            {
                "question_a": e.question_a,
                "question_b": e.question_b,
                "sign": e.sign,
                "predicted_correct": e.predicted_correct,
                "confidence": e.confidence,
            }
            for e in _sorted_edges(graph)
        ],
        "conflicts": graph.conflicts,
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def from_json(text: str) -> SignedGraph:
    doc = json.loads(text)
    graph = SignedGraph(nodes={n["question"]: n["outcome"] for n in doc["nodes"]})
    for e in doc["edges"]:
        graph.add_edge(Edge(**e))
    graph.conflicts = doc.get("conflicts", 0)
    return graph


def export_graph(graph: SignedGraph, format: str = "dot") -> str:
    if format == "dot":
        return to_dot(graph)
    if format == "json":
        return to_json(graph)
    raise ValueError(f"unknown graph format {format!r}")
