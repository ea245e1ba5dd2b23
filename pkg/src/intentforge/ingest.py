"""Catalog loading, co-buy graph construction, and behavior pair sampling."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

# Degree cutoff for pair sampling: both endpoints must have degree
# strictly greater than this.
DEFAULT_MIN_DEGREE = 5

# Title spam heuristics.
MAX_TITLE_TOKENS = 40
MAX_CONSECUTIVE_REPEATS = 2  # a 3rd consecutive copy of a token fails the filter
MAX_IDENTICAL_FRACTION = 0.5


@dataclass(frozen=True)
class Item:
    id: str
    title: str
    category: str = ""
    subcategory_path: tuple[str, ...] = ()
    image_urls: tuple[str, ...] = ()
    url: str = ""


@dataclass
class ItemCatalog:
    items: dict[str, Item] = field(default_factory=dict)
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self.items

    def get(self, item_id: str) -> Item | None:
        return self.items.get(item_id)


@dataclass
class CoBuyGraph:
    """Undirected simple graph over item ids."""

    nodes: set[str] = field(default_factory=set)
    edges: set[frozenset[str]] = field(default_factory=set)

    def degree(self, node: str) -> int:
        return sum(1 for e in self.edges if node in e)

    def degrees(self) -> dict[str, int]:
        deg = {n: 0 for n in self.nodes}
        for e in self.edges:
            for n in e:
                deg[n] += 1
        return deg

    def edge_list(self) -> list[tuple[str, str]]:
        return sorted(tuple(sorted(e)) for e in self.edges)


@dataclass(frozen=True)
class CoBuyPair:
    item1: Item
    item2: Item
    pair_id: str

    @staticmethod
    def make(item1: Item, item2: Item) -> "CoBuyPair":
        if item1.id == item2.id:
            raise ValueError(f"co-buy pair endpoints must differ: {item1.id}")
        a, b = sorted((item1, item2), key=lambda it: it.id)
        return CoBuyPair(a, b, pair_id_for(a.id, b.id))


def pair_id_for(id1: str, id2: str) -> str:
    a, b = sorted((id1, id2))
    return f"{a}__{b}"


def _parse_item(obj: dict) -> Item:
    item_id = obj["id"]
    title = str(obj["title"]).strip()
    if not isinstance(item_id, str) or not item_id:
        raise ValueError("missing or empty id")
    if not title:
        raise ValueError("empty title")
    category = obj.get("category", "")
    # Some catalogs list several top-level categories; keep the first.
    if isinstance(category, list):
        category = category[0] if category else ""
    return Item(
        id=item_id,
        title=title,
        category=str(category),
        subcategory_path=tuple(obj.get("subcategory_path", []) or []),
        image_urls=tuple(obj.get("image_urls", []) or []),
        url=str(obj.get("url", "") or ""),
    )


def load_catalog(path: str) -> ItemCatalog:
    """Read a JSONL item catalog. Duplicate ids keep the last record;
    malformed lines are skipped and counted in ``catalog.dropped``."""
    catalog = ItemCatalog()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                item = _parse_item(json.loads(line))
                catalog.items[item.id] = item
            except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
                catalog.dropped += 1
                logger.warning("skipping malformed catalog line %d: %s", lineno, exc)
    return catalog


def build_cobuy_graph(records: list[tuple[str, str]], catalog: ItemCatalog) -> CoBuyGraph:
    """Build the undirected co-buy graph. Self-loops and duplicate edges are
    dropped; records naming unknown items are skipped with a warning."""
    graph = CoBuyGraph()
    for id1, id2 in records:
        if id1 not in catalog or id2 not in catalog:
            logger.warning("skipping co-buy record with unknown item: (%s, %s)", id1, id2)
            continue
        if id1 == id2:
            continue
        graph.nodes.add(id1)
        graph.nodes.add(id2)
        graph.edges.add(frozenset((id1, id2)))
    return graph


def load_cobuy_records(path: str) -> list[tuple[str, str]]:
    """Read cobuy.tsv: two tab-separated item ids per line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                logger.warning("skipping malformed co-buy line: %r", line)
                continue
            records.append((parts[0], parts[1]))
    return records


def title_quality_filter(item: Item) -> bool:
    """Reject SEO-spam titles: a token repeated 3+ times in a row, a single
    token making up more than half of the title, or more than 40 tokens."""
    tokens = item.title.split()
    if len(tokens) > MAX_TITLE_TOKENS:
        return False
    run = 1
    for prev, cur in zip(tokens, tokens[1:]):
        if cur.lower() == prev.lower():
            run += 1
            if run > MAX_CONSECUTIVE_REPEATS:
                return False
        else:
            run = 1
    if tokens:
        counts: dict[str, int] = {}
        for tok in tokens:
            key = tok.lower()
            counts[key] = counts.get(key, 0) + 1
        top = max(counts.values())
        if top >= 2 and top / len(tokens) > MAX_IDENTICAL_FRACTION:
            return False
    return True


def sample_pairs(
    graph: CoBuyGraph,
    catalog: ItemCatalog,
    categories: set[str] | None,
    n: int,
    min_degree: int = DEFAULT_MIN_DEGREE,
    seed: int = 0,
) -> list[CoBuyPair]:
    """Uniformly sample up to ``n`` co-buy pairs without replacement among
    edges whose endpoints both exceed ``min_degree`` and pass the category and
    title-quality predicates. Deterministic for a given seed; the result is
    sorted by pair_id."""
    if n < 0 or min_degree < 0:
        raise ValueError("n and min_degree must be non-negative")
    deg = graph.degrees()

    def eligible(item_id: str) -> bool:
        item = catalog.get(item_id)
        if item is None:
            return False
        if deg[item_id] <= min_degree:
            return False
        if categories and item.category not in categories:
            return False
        return title_quality_filter(item)

    candidates = [e for e in graph.edge_list() if eligible(e[0]) and eligible(e[1])]
    rng = random.Random(seed)
    chosen = candidates if len(candidates) <= n else rng.sample(candidates, n)
    pairs = [CoBuyPair.make(catalog.items[a], catalog.items[b]) for a, b in chosen]
    pairs.sort(key=lambda p: p.pair_id)
    return pairs


def write_pairs(pairs: list[CoBuyPair], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps({"pair_id": p.pair_id, "item1_id": p.item1.id, "item2_id": p.item2.id}) + "\n")


def read_pairs(path: str, catalog: ItemCatalog) -> list[CoBuyPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            pairs.append(CoBuyPair.make(catalog.items[obj["item1_id"]], catalog.items[obj["item2_id"]]))
    return pairs
