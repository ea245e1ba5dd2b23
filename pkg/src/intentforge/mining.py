"""Frequent sub-tree pattern mining over dependency parses and longest-first
pattern assignment.

Patterns are connected sub-trees of dependency trees, labeled by coarse POS
(with a lexical anchor for closed-class words) on nodes and by the dependency
relation on edges. Support counts the number of trees a pattern embeds into
at least once and must strictly exceed the configured minimum.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .deptree import DepTree

logger = logging.getLogger(__name__)

# Closed-class tags keep their lemma in the node label so that patterns can
# pin function words (pronouns, determiners, adpositions, conjunctions).
CLOSED_CLASS_UPOS = frozenset({"PRON", "DET", "ADP", "CCONJ", "SCONJ"})

# The reference corpus mines 90k samples per relation at support 500; scale
# the default proportionally, never below 2.
REFERENCE_SUPPORT = 500
REFERENCE_CORPUS = 90_000


def default_min_support(n_trees: int) -> int:
    return max(2, round(REFERENCE_SUPPORT * n_trees / REFERENCE_CORPUS))


@dataclass
class LabeledTree:
    """Host tree for mining: parent pointers, labeled edges, and surfaces for
    reconstructing simplified tails."""

    labels: list[str]
    parent: list[int]  # -1 at the root
    edge_labels: list[str | None]  # label of the edge to the parent
    surfaces: list[str]
    order_keys: list[int]

    def __post_init__(self):
        kids: list[list[tuple[str, int]]] = [[] for _ in self.labels]
        for i, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append((self.edge_labels[i], i))
        for lst in kids:
            lst.sort()
        self.children = kids
        self.root = self.parent.index(-1)


def node_label(upos: str, lemma: str) -> str:
    if upos in CLOSED_CLASS_UPOS:
        return f"{upos}|{lemma.lower()}"
    return upos


def as_labeled(tree: DepTree | LabeledTree) -> LabeledTree:
    if isinstance(tree, LabeledTree):
        return tree
    nodes = sorted(tree.nodes, key=lambda n: n.index)
    index_of = {n.index: i for i, n in enumerate(nodes)}
    parent = [-1] * len(nodes)
    edge_labels: list[str | None] = [None] * len(nodes)
    for e in tree.edges:
        child = index_of[e.child_index]
        parent[child] = index_of[e.head_index]
        edge_labels[child] = e.dep_label
    return LabeledTree(
        labels=[node_label(n.upos, n.lemma) for n in nodes],
        parent=parent,
        edge_labels=edge_labels,
        surfaces=[n.surface for n in nodes],
        order_keys=[n.index for n in nodes],
    )


@dataclass(frozen=True)
class TreePattern:
    pattern_id: str
    labels: tuple[str, ...]  # canonical preorder; index 0 is the root
    edges: tuple[tuple[int, int, str], ...]  # (parent, child, dep label)
    canonical: str
    support: int
    perfect_match_count: int = 0
    relation: str | None = None

    @property
    def size(self) -> int:
        return len(self.labels)

    def children_map(self) -> dict[int, list[tuple[str, int]]]:
        out: dict[int, list[tuple[str, int]]] = {i: [] for i in range(len(self.labels))}
        for p, c, el in self.edges:
            out[p].append((el, c))
        for lst in out.values():
            lst.sort()
        return out


@dataclass(frozen=True)
class PatternAssignment:
    assertion_id: str | None
    pattern_id: str | None
    simplified_tail: str


def _canonicalize(labels: Sequence[str], edges: Sequence[tuple[int, int, str]], root: int):
    """Canonical string and preorder node ordering for a rooted labeled tree.
    Children are ranked by (edge label, subtree string); isomorphic trees map
    to identical strings."""
    kids: dict[int, list[tuple[str, int]]] = {i: [] for i in range(len(labels))}
    for p, c, el in edges:
        kids[p].append((el, c))
    serial: dict[int, str] = {}

    def serialize(v: int) -> str:
        if v in serial:
            return serial[v]
        parts = sorted((el, serialize(c)) for el, c in kids[v])
        serial[v] = "(" + labels[v] + "".join(f"[{el}]{s}" for el, s in parts) + ")"
        return serial[v]

    serialize(root)
    order: list[int] = []

    def visit(v: int) -> None:
        order.append(v)
        for _, _, c in sorted((el, serial[c], c) for el, c in kids[v]):
            visit(c)

    visit(root)
    return serial[root], order


def _build_pattern(labels: list[str], edges: list[tuple[int, int, str]], root: int):
    """Return (canonical labels, canonical edges, canonical string, old->new map)."""
    canonical, order = _canonicalize(labels, edges, root)
    new_of_old = {old: new for new, old in enumerate(order)}
    new_labels = tuple(labels[old] for old in order)
    new_edges = tuple(sorted((new_of_old[p], new_of_old[c], el) for p, c, el in edges))
    return new_labels, new_edges, canonical, new_of_old


def mine_patterns(
    trees: Sequence[DepTree | LabeledTree],
    min_support: int,
    relation: str | None = None,
) -> list[TreePattern]:
    """All connected sub-tree patterns embedding into strictly more than
    ``min_support`` distinct trees, deduplicated by canonical form. Patterns
    come back sorted by (size desc, canonical) with sequential ids."""
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    hosts = [as_labeled(t) for t in trees]

    # pattern state: canonical -> (labels, edges, embeddings)
    # an embedding is (tree index, images tuple aligned to canonical order)
    level: dict[str, tuple[tuple[str, ...], tuple[tuple[int, int, str], ...], set]] = {}
    for ti, host in enumerate(hosts):
        for v, lab in enumerate(host.labels):
            key = f"({lab})"
            if key not in level:
                level[key] = ((lab,), (), set())
            level[key][2].add((ti, (v,)))

    def frequent(entries):
        out = {}
        for key, (labels, edges, embs) in entries.items():
            if len({t for t, _ in embs}) > min_support:
                out[key] = (labels, edges, embs)
        return out

    level = frequent(level)
    survivors = dict(level)

    while level:
        nxt: dict[str, tuple[tuple[str, ...], tuple[tuple[int, int, str], ...], set]] = {}
        for labels, edges, embs in level.values():
            for ti, images in embs:
                host = hosts[ti]
                used = set(images)
                # grow downward from any mapped node
                for pi, x in enumerate(images):
                    for el, y in host.children[x]:
                        if y in used:
                            continue
                        new_labels = list(labels) + [host.labels[y]]
                        new_edges = list(edges) + [(pi, len(labels), el)]
                        _merge(nxt, new_labels, new_edges, 0, ti, images + (y,))
                # grow upward from the root image
                x0 = images[0]
                par = host.parent[x0]
                if par >= 0 and par not in used:
                    new_labels = list(labels) + [host.labels[par]]
                    new_edges = list(edges) + [(len(labels), 0, host.edge_labels[x0])]
                    _merge(nxt, new_labels, new_edges, len(labels), ti, images + (par,))
        level = frequent(nxt)
        survivors.update(level)

    ordered = sorted(survivors.items(), key=lambda kv: (-len(kv[1][0]), kv[0]))
    prefix = relation or "p"
    patterns = []
    for i, (canonical, (labels, edges, embs)) in enumerate(ordered):
        patterns.append(
            TreePattern(
                pattern_id=f"{prefix}-{i:04d}",
                labels=labels,
                edges=edges,
                canonical=canonical,
                support=len({t for t, _ in embs}),
                relation=relation,
            )
        )
    return patterns


def _merge(acc: dict, labels: list[str], edges: list[tuple[int, int, str]], root: int, ti: int, images: tuple) -> None:
    new_labels, new_edges, canonical, new_of_old = _build_pattern(labels, edges, root)
    aligned = tuple(images[old] for old in sorted(new_of_old, key=new_of_old.get))
    if canonical not in acc:
        acc[canonical] = (new_labels, new_edges, set())
    acc[canonical][2].add((ti, aligned))


def find_embedding(pattern: TreePattern, tree: DepTree | LabeledTree) -> dict[int, int] | None:
    """First embedding of the pattern into the tree under ascending node
    order, or None. Embeddings map pattern edges onto tree edges with equal
    labels and are injective."""
    host = as_labeled(tree)
    kids = pattern.children_map()

    def match_node(pi: int, x: int, used: frozenset[int]) -> dict[int, int] | None:
        if pattern.labels[pi] != host.labels[x]:
            return None
        return match_children(kids[pi], 0, x, used | {x}, {pi: x})

    def match_children(
        pending: list[tuple[str, int]], k: int, x: int, used: frozenset[int], acc: dict[int, int]
    ) -> dict[int, int] | None:
        # Siblings land in disjoint host subtrees, so backtracking only needs
        # to revisit which host child each pattern child takes.
        if k == len(pending):
            return acc
        el, ci = pending[k]
        for el2, y in host.children[x]:
            if el2 != el or y in used:
                continue
            sub = match_node(ci, y, used)
            if sub is None:
                continue
            result = match_children(pending, k + 1, x, used | frozenset(sub.values()), {**acc, **sub})
            if result is not None:
                return result
        return None

    for x in range(len(host.labels)):
        result = match_node(0, x, frozenset())
        if result is not None:
            return result
    return None


def assign_pattern(
    tree: DepTree | LabeledTree,
    patterns: Sequence[TreePattern],
    assertion_id: str | None = None,
) -> PatternAssignment:
    """Assign the largest matching pattern (ties to the lowest pattern_id);
    the simplified tail is the matched nodes' surfaces in sentence order.
    Pattern list order does not matter; it is re-sorted internally."""
    host = as_labeled(tree)
    ranked = sorted(patterns, key=lambda p: (-p.size, p.pattern_id))
    for pat in ranked:
        mapping = find_embedding(pat, host)
        if mapping is None:
            continue
        images = sorted(mapping.values(), key=lambda i: host.order_keys[i])
        simplified = " ".join(host.surfaces[i] for i in images)
        return PatternAssignment(assertion_id, pat.pattern_id, simplified)
    return PatternAssignment(assertion_id, None, " ".join(host.surfaces))


def perfect_match_counts(
    patterns: Sequence[TreePattern], trees: Sequence[DepTree | LabeledTree]
) -> dict[str, int]:
    """Per-pattern count of trees whose longest-first assignment lands on the
    pattern; each tree contributes to at most one pattern."""
    counts = {p.pattern_id: 0 for p in patterns}
    for tree in trees:
        assigned = assign_pattern(tree, patterns)
        if assigned.pattern_id is not None:
            counts[assigned.pattern_id] += 1
    return counts


def perfect_match_count(
    pattern: TreePattern,
    trees: Sequence[DepTree | LabeledTree],
    candidates: Sequence[TreePattern],
) -> int:
    pool = list(candidates)
    if all(p.pattern_id != pattern.pattern_id for p in pool):
        pool.append(pattern)
    return perfect_match_counts(pool, trees)[pattern.pattern_id]


def select_final_patterns(
    candidates: Sequence[TreePattern],
    trees: Sequence[DepTree | LabeledTree],
    min_perfect: int,
    allow: set[str] | None = None,
    deny: set[str] | None = None,
) -> list[TreePattern]:
    """Keep candidates whose perfect-match count strictly exceeds
    ``min_perfect``, then apply the human allow/deny revision lists."""
    counts = perfect_match_counts(candidates, trees)
    final = []
    for p in candidates:
        if counts[p.pattern_id] <= min_perfect:
            continue
        if allow is not None and p.pattern_id not in allow:
            continue
        if deny is not None and p.pattern_id in deny:
            continue
        final.append(replace(p, perfect_match_count=counts[p.pattern_id]))
    return final


def coverage(assignments: Iterable[PatternAssignment]) -> float:
    items = list(assignments)
    if not items:
        return 0.0
    return sum(1 for a in items if a.pattern_id is not None) / len(items)


def write_patterns(patterns: Iterable[TreePattern], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in patterns:
            fh.write(
                json.dumps(
                    {
                        "pattern_id": p.pattern_id,
                        "relation": p.relation,
                        "nodes": list(p.labels),
                        "edges": [list(e) for e in p.edges],
                        "canonical": p.canonical,
                        "support": p.support,
                        "perfect_match_count": p.perfect_match_count,
                    }
                )
                + "\n"
            )


def read_patterns(path: str) -> list[TreePattern]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(
                TreePattern(
                    pattern_id=obj["pattern_id"],
                    labels=tuple(obj["nodes"]),
                    edges=tuple((e[0], e[1], e[2]) for e in obj["edges"]),
                    canonical=obj["canonical"],
                    support=obj["support"],
                    perfect_match_count=obj.get("perfect_match_count", 0),
                    relation=obj.get("relation"),
                )
            )
    return out


def write_assignments(assignments: Iterable[PatternAssignment], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in assignments:
            fh.write(
                json.dumps(
                    {"assertion_id": a.assertion_id, "pattern_id": a.pattern_id, "simplified_tail": a.simplified_tail}
                )
                + "\n"
            )


def read_assignments(path: str) -> list[PatternAssignment]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(PatternAssignment(obj["assertion_id"], obj["pattern_id"], obj["simplified_tail"]))
    return out
