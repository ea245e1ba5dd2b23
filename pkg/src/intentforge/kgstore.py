"""Assembly, persistence, and summary statistics of the intention knowledge
graph."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Sequence

from .conceptualize import AbstractIntention
from .mining import PatternAssignment
from .population import ScoredAssertion

FORMAT_VERSION = 1

ASSERT = "ASSERT"
CONCEPT_ASSERT = "CONCEPT_ASSERT"
ISA_WEIGHT = "ISA_WEIGHT"


def intention_node_id(tail: str) -> str:
    return "i:" + hashlib.sha1(tail.encode("utf-8")).hexdigest()[:16]


def item_node_id(item_id: str) -> str:
    return "item:" + item_id


@dataclass(frozen=True)
class Edge:
    edge_id: str
    kind: str
    src: str  # pair_id for ASSERT/CONCEPT_ASSERT, intention node for ISA_WEIGHT
    dst: str  # intention or abstract node id
    src_items: tuple[str, str] | None = None
    relation: str | None = None
    plausibility: float | None = None
    typicality: float | None = None
    weight: float | None = None


def _edge_id(kind: str, src: str, dst: str, relation: str | None) -> str:
    digest = hashlib.sha1(f"{kind}\x1f{src}\x1f{dst}\x1f{relation or ''}".encode("utf-8")).hexdigest()
    return "e:" + digest[:16]


@dataclass
class KnowledgeGraph:
    item_nodes: dict[str, dict] = field(default_factory=dict)
    intention_nodes: dict[str, dict] = field(default_factory=dict)
    abstract_nodes: dict[str, dict] = field(default_factory=dict)
    edges: dict[str, Edge] = field(default_factory=dict)
    plausibility_threshold: float = 0.0

    def edges_of_kind(self, kind: str) -> list[Edge]:
        return [e for e in self.edges.values() if e.kind == kind]

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.item_nodes == other.item_nodes
            and self.intention_nodes == other.intention_nodes
            and self.abstract_nodes == other.abstract_nodes
            and self.edges == other.edges
            and self.plausibility_threshold == other.plausibility_threshold
        )


class AssemblyError(RuntimeError):
    pass


def assemble(
    scored: Sequence[ScoredAssertion],
    assignments: Sequence[PatternAssignment],
    abstracts: Sequence[AbstractIntention],
    pairs: dict[str, tuple[str, str]],
    plau_threshold: float,
) -> KnowledgeGraph:
    """Build the graph from populated scores, pattern assignments, and
    conceptualization output.

    One intention node per distinct simplified tail (raw tail when the
    assertion has no assignment); one ASSERT edge per surviving assertion;
    ISA_WEIGHT edges from conceptualization; one CONCEPT_ASSERT edge per
    (pair, relation, abstract node) reachable through an ASSERT edge plus an
    ISA_WEIGHT edge, inheriting the max scores of its supporting assertions.
    """
    kg = KnowledgeGraph(plausibility_threshold=plau_threshold)
    by_assertion = {a.assertion_id: a for a in assignments if a.assertion_id}

    surviving = [s for s in scored if s.plausibility > plau_threshold]
    tail_of_assertion: dict[str, str] = {}
    for s in surviving:
        aid = s.assertion.assertion_id
        assigned = by_assertion.get(aid)
        tail = assigned.simplified_tail if assigned and assigned.pattern_id else s.assertion.tail
        tail_of_assertion[aid] = tail

    for s in surviving:
        aid = s.assertion.assertion_id
        pair_id = s.assertion.pair_id
        if pair_id not in pairs:
            raise AssemblyError(f"assertion {aid} references unknown pair {pair_id}")
        id1, id2 = pairs[pair_id]
        kg.item_nodes.setdefault(item_node_id(id1), {"id": item_node_id(id1), "kind": "item", "item_id": id1})
        kg.item_nodes.setdefault(item_node_id(id2), {"id": item_node_id(id2), "kind": "item", "item_id": id2})
        tail = tail_of_assertion[aid]
        node_id = intention_node_id(tail)
        kg.intention_nodes.setdefault(node_id, {"id": node_id, "kind": "intention", "text": tail})
        edge_id = _edge_id(ASSERT, pair_id, node_id, s.assertion.relation.value)
        prev = kg.edges.get(edge_id)
        # distinct raw tails can collapse onto one simplified tail; the merged
        # edge keeps the best score seen on each axis
        plau = s.plausibility if prev is None else max(prev.plausibility, s.plausibility)
        typ = s.typicality if prev is None else max(prev.typicality, s.typicality)
        kg.edges[edge_id] = Edge(
            edge_id=edge_id,
            kind=ASSERT,
            src=pair_id,
            dst=node_id,
            src_items=(id1, id2),
            relation=s.assertion.relation.value,
            plausibility=plau,
            typicality=typ,
        )

    # conceptualization edges for intention nodes present in the graph;
    # source_tail_id holds either the tail text or an intention node id
    isa_by_intention: dict[str, list[AbstractIntention]] = {}
    for ab in abstracts:
        src_node = (
            ab.source_tail_id if ab.source_tail_id in kg.intention_nodes else intention_node_id(ab.source_tail_id)
        )
        if src_node not in kg.intention_nodes:
            continue
        kg.abstract_nodes.setdefault(
            ab.node_id, {"id": ab.node_id, "kind": "abstract", "text": ab.abstract_tail, "concept": ab.concept}
        )
        edge_id = _edge_id(ISA_WEIGHT, src_node, ab.node_id, None)
        kg.edges[edge_id] = Edge(
            edge_id=edge_id, kind=ISA_WEIGHT, src=src_node, dst=ab.node_id, weight=ab.weight
        )
        isa_by_intention.setdefault(src_node, []).append(ab)

    for s in surviving:
        aid = s.assertion.assertion_id
        node_id = intention_node_id(tail_of_assertion[aid])
        for ab in isa_by_intention.get(node_id, []):
            pair_id = s.assertion.pair_id
            rel = s.assertion.relation.value
            edge_id = _edge_id(CONCEPT_ASSERT, pair_id, ab.node_id, rel)
            prev = kg.edges.get(edge_id)
            plau = s.plausibility if prev is None else max(prev.plausibility, s.plausibility)
            typ = s.typicality if prev is None else max(prev.typicality, s.typicality)
            kg.edges[edge_id] = Edge(
                edge_id=edge_id,
                kind=CONCEPT_ASSERT,
                src=pair_id,
                dst=ab.node_id,
                src_items=pairs[pair_id],
                relation=rel,
                plausibility=plau,
                typicality=typ,
            )
    _check_referential(kg)
    return kg


def _check_referential(kg: KnowledgeGraph) -> None:
    for e in kg.edges.values():
        if e.kind == ASSERT and e.dst not in kg.intention_nodes:
            raise AssemblyError(f"dangling ASSERT target {e.dst} on {e.edge_id}")
        if e.kind == CONCEPT_ASSERT and e.dst not in kg.abstract_nodes:
            raise AssemblyError(f"dangling CONCEPT_ASSERT target {e.dst} on {e.edge_id}")
        if e.kind == ISA_WEIGHT and (e.src not in kg.intention_nodes or e.dst not in kg.abstract_nodes):
            raise AssemblyError(f"dangling ISA_WEIGHT endpoint on {e.edge_id}")


@dataclass
class KGStats:
    node_counts: dict[str, int]
    edge_counts: dict[str, int]
    per_relation: dict[str, dict]
    avg_tail_tokens: float


def stats(kg: KnowledgeGraph) -> KGStats:
    """Exact node/edge counts plus per-relation edge, distinct-tail, and
    average tail length figures. Tail lengths never include prompt text."""
    per_relation: dict[str, dict] = {}
    tails_by_relation: dict[str, set[str]] = {}
    for e in kg.edges_of_kind(ASSERT):
        rel = e.relation or ""
        info = per_relation.setdefault(rel, {"edges": 0, "tails": 0, "avg_tail_tokens": 0.0})
        info["edges"] += 1
        tails_by_relation.setdefault(rel, set()).add(kg.intention_nodes[e.dst]["text"])
    all_tails: set[str] = set()
    for rel, tails in tails_by_relation.items():
        per_relation[rel]["tails"] = len(tails)
        per_relation[rel]["avg_tail_tokens"] = sum(len(t.split()) for t in tails) / len(tails)
        all_tails |= tails
    return KGStats(
        node_counts={
            "item": len(kg.item_nodes),
            "intention": len(kg.intention_nodes),
            "abstract": len(kg.abstract_nodes),
        },
        edge_counts={
            ASSERT: len(kg.edges_of_kind(ASSERT)),
            CONCEPT_ASSERT: len(kg.edges_of_kind(CONCEPT_ASSERT)),
            ISA_WEIGHT: len(kg.edges_of_kind(ISA_WEIGHT)),
        },
        per_relation=per_relation,
        avg_tail_tokens=(sum(len(t.split()) for t in all_tails) / len(all_tails)) if all_tails else 0.0,
    )


class FormatError(RuntimeError):
    pass


def export(kg: KnowledgeGraph, directory: str) -> None:
    """Write nodes.jsonl and edges.jsonl sorted by id, each starting with a
    version header. Re-exporting an identical graph is byte-identical."""
    os.makedirs(directory, exist_ok=True)
    header = json.dumps(
        {"format": "intent-kg", "version": FORMAT_VERSION, "plausibility_threshold": kg.plausibility_threshold}
    )
    nodes = list(kg.item_nodes.values()) + list(kg.intention_nodes.values()) + list(kg.abstract_nodes.values())
    nodes.sort(key=lambda n: n["id"])
    with open(os.path.join(directory, "nodes.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for node in nodes:
            fh.write(json.dumps(node, sort_keys=True) + "\n")
    with open(os.path.join(directory, "edges.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for edge_id in sorted(kg.edges):
            e = kg.edges[edge_id]
            record = {"edge_id": e.edge_id, "kind": e.kind, "src": e.src, "dst": e.dst}
            if e.src_items is not None:
                record["src_items"] = list(e.src_items)
            for key in ("relation", "plausibility", "typicality", "weight"):
                value = getattr(e, key)
                if value is not None:
                    record[key] = value
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _read_header(line: str, path: str) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: bad header: {exc}") from exc
    if header.get("format") != "intent-kg" or header.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format/version {header}")
    return header


def import_graph(directory: str) -> KnowledgeGraph:
    nodes_path = os.path.join(directory, "nodes.jsonl")
    edges_path = os.path.join(directory, "edges.jsonl")
    kg = KnowledgeGraph()
    with open(nodes_path, encoding="utf-8") as fh:
        header = _read_header(fh.readline(), nodes_path)
        kg.plausibility_threshold = header.get("plausibility_threshold", 0.0)
        for line in fh:
            if not line.strip():
                continue
            node = json.loads(line)
            bucket = {"item": kg.item_nodes, "intention": kg.intention_nodes, "abstract": kg.abstract_nodes}[
                node["kind"]
            ]
            bucket[node["id"]] = node
    with open(edges_path, encoding="utf-8") as fh:
        _read_header(fh.readline(), edges_path)
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            kg.edges[obj["edge_id"]] = Edge(
                edge_id=obj["edge_id"],
                kind=obj["kind"],
                src=obj["src"],
                dst=obj["dst"],
                src_items=tuple(obj["src_items"]) if "src_items" in obj else None,
                relation=obj.get("relation"),
                plausibility=obj.get("plausibility"),
                typicality=obj.get("typicality"),
                weight=obj.get("weight"),
            )
    _check_referential(kg)
    return kg


def filter_kg(kg: KnowledgeGraph, plau_t: float, typ_t: float | None = None) -> KnowledgeGraph:
    """Sub-graph of edges strictly above the score thresholds. Dependent
    ISA_WEIGHT and CONCEPT_ASSERT edges survive only while their supporting
    ASSERT edges do, preserving joinability."""
    sub = KnowledgeGraph(plausibility_threshold=max(kg.plausibility_threshold, plau_t))

    def passes(e: Edge) -> bool:
        if e.plausibility is None or e.plausibility <= plau_t:
            return False
        return typ_t is None or (e.typicality is not None and e.typicality > typ_t)

    kept_intentions: set[str] = set()
    kept_by_pair_rel: dict[tuple[str, str], set[str]] = {}
    for e in kg.edges_of_kind(ASSERT):
        if not passes(e):
            continue
        sub.edges[e.edge_id] = e
        kept_intentions.add(e.dst)
        kept_by_pair_rel.setdefault((e.src, e.relation or ""), set()).add(e.dst)
        if e.src_items:
            for item_id in e.src_items:
                node = item_node_id(item_id)
                sub.item_nodes[node] = kg.item_nodes[node]
        sub.intention_nodes[e.dst] = kg.intention_nodes[e.dst]
    isa_targets: dict[str, set[str]] = {}
    for e in kg.edges_of_kind(ISA_WEIGHT):
        if e.src in kept_intentions:
            sub.edges[e.edge_id] = e
            sub.abstract_nodes[e.dst] = kg.abstract_nodes[e.dst]
            isa_targets.setdefault(e.src, set()).add(e.dst)
    for e in kg.edges_of_kind(CONCEPT_ASSERT):
        if not passes(e):
            continue
        supported = any(
            e.dst in isa_targets.get(intention, set())
            for intention in kept_by_pair_rel.get((e.src, e.relation or ""), set())
        )
        if supported:
            sub.edges[e.edge_id] = e
    return sub


def item_coverage(kg: KnowledgeGraph, dataset_items: set[str]) -> float:
    """Fraction of dataset items that appear as item nodes of the graph."""
    if not dataset_items:
        return 0.0
    covered = {n["item_id"] for n in kg.item_nodes.values()}
    return len(covered & dataset_items) / len(dataset_items)


def write_tails_manifest(kg: KnowledgeGraph, path: str) -> None:
    """node_id -> tail text, for external sentence embedding."""
    with open(path, "w", encoding="utf-8") as fh:
        for node_id in sorted(kg.intention_nodes):
            fh.write(f"{node_id}\t{kg.intention_nodes[node_id]['text']}\n")
