"""Dependency trees ingested from CoNLL-U produced by an external parser."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DepNode:
    index: int  # 1-based token index
    surface: str
    lemma: str
    upos: str
    ner_tag: str = "O"


@dataclass(frozen=True)
class DepEdge:
    head_index: int
    child_index: int
    dep_label: str


@dataclass
class DepTree:
    nodes: list[DepNode] = field(default_factory=list)
    edges: list[DepEdge] = field(default_factory=list)
    root_index: int = 0
    sent_id: str | None = None

    def node(self, index: int) -> DepNode:
        return self._by_index[index]

    def __post_init__(self):
        self._by_index = {n.index: n for n in self.nodes}

    def children(self, index: int) -> list[DepEdge]:
        return [e for e in self.edges if e.head_index == index]

    def text(self) -> str:
        return " ".join(n.surface for n in sorted(self.nodes, key=lambda n: n.index))


def _validate_tree(nodes: list[DepNode], heads: dict[int, tuple[int, str]]) -> DepTree:
    roots = [i for i, (h, _) in heads.items() if h == 0]
    if len(roots) != 1:
        raise ValueError(f"expected exactly one root, found {len(roots)}")
    indices = {n.index for n in nodes}
    edges = []
    for child, (head, label) in heads.items():
        if head == 0:
            continue
        if head not in indices:
            raise ValueError(f"head {head} of token {child} does not exist")
        edges.append(DepEdge(head, child, label))
    # Walking to the root from every node must terminate without revisits.
    for start in indices:
        seen = set()
        cur = start
        while cur != 0:
            if cur in seen:
                raise ValueError(f"cycle through token {cur}")
            seen.add(cur)
            cur = heads[cur][0]
    return DepTree(nodes=nodes, edges=edges, root_index=roots[0])


def _ner_from_misc(misc: str) -> str:
    for part in misc.split("|"):
        if part.startswith("NER="):
            return part[4:]
    return "O"


def parse_conllu(text: str) -> list[DepTree]:
    """Parse blank-line separated CoNLL-U blocks. Multiword (1-2) and empty
    (1.1) token lines are ignored; non-tree sentences are skipped with a
    warning."""
    trees: list[DepTree] = []
    block: list[str] = []
    sent_id: str | None = None

    def flush():
        nonlocal block, sent_id
        if not any(not ln.startswith("#") for ln in block):
            block, sent_id = [], None
            return
        nodes: list[DepNode] = []
        heads: dict[int, tuple[int, str]] = {}
        try:
            for ln in block:
                if ln.startswith("#"):
                    if ln[1:].strip().startswith("sent_id"):
                        _, _, value = ln.partition("=")
                        sent_id = value.strip()
                    continue
                cols = ln.split("\t")
                if len(cols) != 10:
                    raise ValueError(f"expected 10 columns, got {len(cols)}")
                if "-" in cols[0] or "." in cols[0]:
                    continue  # multiword range / empty node
                idx = int(cols[0])
                nodes.append(DepNode(idx, cols[1], cols[2], cols[3], _ner_from_misc(cols[9])))
                heads[idx] = (int(cols[6]), cols[7])
            tree = _validate_tree(nodes, heads)
            tree.sent_id = sent_id
            trees.append(tree)
        except ValueError as exc:
            logger.warning("skipping malformed CoNLL-U sentence (%s): %s", sent_id or "?", exc)
        block, sent_id = [], None

    for line in text.splitlines():
        if line.strip() == "":
            if block:
                flush()
        else:
            block.append(line)
    if block:
        flush()
    return trees


def read_conllu_file(path: str) -> list[DepTree]:
    with open(path, encoding="utf-8") as fh:
        return parse_conllu(fh.read())


def read_parse_index(path: str) -> dict[str, int]:
    """Sidecar index mapping assertion_id to the ordinal of its CoNLL-U block."""
    index = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            aid, _, ordinal = line.partition("\t")
            index[aid] = int(ordinal)
    return index
