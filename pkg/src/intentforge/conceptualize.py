"""Abstract intentions: replace a tail's entity span with weighted concepts
from an IsA likelihood table."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 10
DEFAULT_MIN_WEIGHT = 0.01


class ConceptTable:
    """entity span -> [(concept, likelihood)] with spans lowercased."""

    def __init__(self):
        self.entries: dict[str, dict[str, float]] = {}

    def add(self, entity: str, concept: str, likelihood: float) -> None:
        if not math.isfinite(likelihood) or likelihood <= 0:
            raise ValueError(f"likelihood must be finite and > 0, got {likelihood}")
        span = entity.lower().strip()
        self.entries.setdefault(span, {})
        self.entries[span][concept] = self.entries[span].get(concept, 0.0) + likelihood

    def concepts(self, span: str) -> list[tuple[str, float]]:
        found = self.entries.get(span.lower(), {})
        return sorted(found.items(), key=lambda kv: (-kv[1], kv[0]))

    def __contains__(self, span: str) -> bool:
        return span.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def load_concept_table(path: str) -> ConceptTable:
    """Read TSV rows (entity, concept, likelihood); duplicate pairs are
    summed and rows with a non-numeric likelihood skipped with a warning."""
    table = ConceptTable()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                logger.warning("concepts line %d: expected 3 columns, skipped", lineno)
                continue
            entity, concept, raw = parts
            try:
                likelihood = float(raw)
                table.add(entity, concept, likelihood)
            except ValueError:
                logger.warning("concepts line %d: bad likelihood %r, skipped", lineno, raw)
    return table


@dataclass(frozen=True)
class AbstractIntention:
    node_id: str
    abstract_tail: str
    source_tail_id: str
    concept: str
    weight: float


def abstract_node_id(source_tail: str, concept: str) -> str:
    digest = hashlib.sha1(f"{source_tail}\x1f{concept}".encode("utf-8")).hexdigest()
    return digest[:16]


def _find_span(tokens: list[str], table: ConceptTable) -> tuple[int, int] | None:
    """Longest table-matching token span, preferring spans nearer the tail's
    head noun (right end) among equals."""
    n = len(tokens)
    for length in range(n, 0, -1):
        for start in range(n - length, -1, -1):
            span = " ".join(tokens[start : start + length]).lower()
            if span in table:
                return start, start + length
    return None


def conceptualize_tail(
    simplified_tail: str,
    table: ConceptTable,
    top_k: int = DEFAULT_TOP_K,
    min_weight: float = DEFAULT_MIN_WEIGHT,
    source_tail_id: str | None = None,
) -> list[AbstractIntention]:
    """Map one tail to abstract variants. The matched span's concept
    likelihoods are normalized over the span's full concept list; the top_k
    concepts with weight >= min_weight each yield one abstract tail with the
    span replaced."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    tokens = simplified_tail.split()
    found = _find_span(tokens, table)
    if found is None:
        return []
    start, end = found
    span = " ".join(tokens[start:end]).lower()
    concepts = table.concepts(span)
    total = sum(lk for _, lk in concepts)
    out = []
    tail_id = source_tail_id or simplified_tail
    for concept, likelihood in concepts[:top_k]:
        weight = likelihood / total
        if weight < min_weight:
            continue
        abstract = " ".join(tokens[:start] + concept.split() + tokens[end:])
        out.append(
            AbstractIntention(
                node_id=abstract_node_id(simplified_tail, concept),
                abstract_tail=abstract,
                source_tail_id=tail_id,
                concept=concept,
                weight=weight,
            )
        )
    return out


def write_abstracts(abstracts, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in abstracts:
            fh.write(
                json.dumps(
                    {
                        "node_id": a.node_id,
                        "source_tail_id": a.source_tail_id,
                        "concept": a.concept,
                        "weight": a.weight,
                        "abstract_tail": a.abstract_tail,
                    }
                )
                + "\n"
            )


def read_abstracts(path: str) -> list[AbstractIntention]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(
                AbstractIntention(
                    node_id=obj["node_id"],
                    abstract_tail=obj["abstract_tail"],
                    source_tail_id=obj["source_tail_id"],
                    concept=obj["concept"],
                    weight=float(obj["weight"]),
                )
            )
    return out
