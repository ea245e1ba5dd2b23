"""Margin-based translational embedding over (item-pair, relation, tail)
triples: the head is the mean of the two item vectors, and negatives corrupt
one item of the head pair while keeping relation and tail fixed."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kgstore

logger = logging.getLogger(__name__)

COBUY_RELATION = "COBUY"


@dataclass
class TrainConfig:
    dim: int = 64
    margin: float = 1.0
    lr: float = 0.01
    epochs: int = 100
    negatives: int = 1
    seed: int = 0
    tails_trainable: bool = True


@dataclass
class EmbeddingTable:
    dim: int
    items: dict[str, np.ndarray] = field(default_factory=dict)
    relations: dict[str, np.ndarray] = field(default_factory=dict)
    tails: dict[str, np.ndarray] = field(default_factory=dict)


Triple = tuple[str, str, str, str]  # (item1, item2, relation, tail_id)


def triple_loss(p1, p2, r, e, p1_neg, p2_neg, margin: float) -> float:
    """max(0, margin + d(mean(p1,p2) + r, e) - d(mean(p1',p2') + r, e)) with
    Euclidean distance d."""
    p1, p2, r, e, p1_neg, p2_neg = (np.asarray(v, dtype=float) for v in (p1, p2, r, e, p1_neg, p2_neg))
    dims = {v.shape for v in (p1, p2, r, e, p1_neg, p2_neg)}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    pos = np.linalg.norm((p1 + p2) / 2 + r - e)
    neg = np.linalg.norm((p1_neg + p2_neg) / 2 + r - e)
    return float(max(0.0, margin + pos - neg))


def triple_loss_grads(p1, p2, r, e, p1_neg, p2_neg, margin: float):
    """Loss plus analytic gradients w.r.t. every input vector. At hinge or
    distance kinks the gradients are zero."""
    p1, p2, r, e, p1_neg, p2_neg = (np.asarray(v, dtype=float) for v in (p1, p2, r, e, p1_neg, p2_neg))
    u = (p1 + p2) / 2 + r - e
    v = (p1_neg + p2_neg) / 2 + r - e
    pos = float(np.linalg.norm(u))
    neg = float(np.linalg.norm(v))
    loss = max(0.0, margin + pos - neg)
    zeros = np.zeros_like(p1)
    grads = {"p1": zeros, "p2": zeros, "r": zeros, "e": zeros, "p1_neg": zeros, "p2_neg": zeros}
    if loss > 0.0 and pos > 0.0 and neg > 0.0:
        gu = u / pos
        gv = v / neg
        grads = {
            "p1": gu / 2,
            "p2": gu / 2,
            "r": gu - gv,
            "e": gv - gu,
            "p1_neg": -gv / 2,
            "p2_neg": -gv / 2,
        }
    return loss, grads


def train(
    triples: list[Triple],
    cfg: TrainConfig,
    tail_init: dict[str, np.ndarray] | None = None,
    extra_items: list[str] | None = None,
) -> tuple[EmbeddingTable, list[tuple[int, float]]]:
    """Deterministic single-threaded SGD. Item vectors are projected onto the
    unit ball at initialization and after every epoch; zero-loss steps are
    skipped. Negative heads are drawn from the full item vocabulary, which
    ``extra_items`` can widen beyond the items of the positive triples.
    Returns the table and a (epoch, mean_loss) log, where mean_loss is
    measured after the epoch over the whole dataset against a fixed
    evaluation corruption set so epochs are comparable."""
    if not triples:
        raise ValueError("need at least one triple")
    items = sorted({t[0] for t in triples} | {t[1] for t in triples} | set(extra_items or ()))
    relations = sorted({t[2] for t in triples})
    tails = sorted({t[3] for t in triples})
    if tail_init is not None:
        missing = [t for t in tails if t not in tail_init]
        if missing:
            raise ValueError(f"tail_init does not cover {len(missing)} tail ids, e.g. {missing[:3]}")

    rng = np.random.default_rng(cfg.seed)
    bound = 6 / np.sqrt(cfg.dim)
    item_vecs = rng.uniform(-bound, bound, size=(len(items), cfg.dim))
    rel_vecs = rng.uniform(-bound, bound, size=(len(relations), cfg.dim))
    if tail_init is not None:
        tail_vecs = np.stack([np.asarray(tail_init[t], dtype=float) for t in tails])
        if tail_vecs.shape[1] != cfg.dim:
            raise ValueError(f"tail_init dimension {tail_vecs.shape[1]} != {cfg.dim}")
        tail_lr = cfg.lr * 0.1 if cfg.tails_trainable else 0.0
    else:
        tail_vecs = rng.uniform(-bound, bound, size=(len(tails), cfg.dim))
        tail_lr = cfg.lr if cfg.tails_trainable else 0.0
    _project(item_vecs)

    item_idx = {x: i for i, x in enumerate(items)}
    rel_idx = {x: i for i, x in enumerate(relations)}
    tail_idx = {x: i for i, x in enumerate(tails)}
    coded = [(item_idx[a], item_idx[b], rel_idx[r], tail_idx[e]) for a, b, r, e in triples]

    # Fixed corruption set per triple keeps the logged loss comparable across
    # epochs: exact enumeration when the vocabulary is small, otherwise a
    # fixed sample.
    eval_rng = np.random.default_rng(cfg.seed ^ 0x5EED)
    if 2 * len(items) <= 64:
        eval_negatives = [(pos, sub) for pos in (1, 2) for sub in range(len(items))]
    else:
        eval_negatives = [
            (1 if eval_rng.random() < 0.5 else 2, int(eval_rng.integers(len(items)))) for _ in range(32)
        ]

    def epoch_loss() -> float:
        total = 0.0
        for i1, i2, ri, ei in coded:
            head = (item_vecs[i1] + item_vecs[i2]) / 2 + rel_vecs[ri]
            pos = float(np.linalg.norm(head - tail_vecs[ei]))
            for position, substitute in eval_negatives:
                n1, n2 = (substitute, i2) if position == 1 else (i1, substitute)
                neg_head = (item_vecs[n1] + item_vecs[n2]) / 2 + rel_vecs[ri]
                neg = float(np.linalg.norm(neg_head - tail_vecs[ei]))
                total += max(0.0, cfg.margin + pos - neg)
        return total / (len(coded) * len(eval_negatives))

    log: list[tuple[int, float]] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(coded))
        for k in order:
            i1, i2, ri, ei = coded[k]
            for _ in range(cfg.negatives):
                position = 1 if rng.random() < 0.5 else 2
                substitute = int(rng.integers(len(items)))
                n1, n2 = (substitute, i2) if position == 1 else (i1, substitute)
                loss, grads = triple_loss_grads(
                    item_vecs[i1], item_vecs[i2], rel_vecs[ri], tail_vecs[ei],
                    item_vecs[n1], item_vecs[n2], cfg.margin,
                )
                if loss == 0.0:
                    continue
                item_vecs[i1] -= cfg.lr * grads["p1"]
                item_vecs[i2] -= cfg.lr * grads["p2"]
                rel_vecs[ri] -= cfg.lr * grads["r"]
                tail_vecs[ei] -= tail_lr * grads["e"]
                item_vecs[n1] -= cfg.lr * grads["p1_neg"]
                item_vecs[n2] -= cfg.lr * grads["p2_neg"]
        _project(item_vecs)
        log.append((epoch, epoch_loss()))

    table = EmbeddingTable(dim=cfg.dim)
    table.items = {x: item_vecs[i].copy() for x, i in item_idx.items()}
    table.relations = {x: rel_vecs[i].copy() for x, i in rel_idx.items()}
    table.tails = {x: tail_vecs[i].copy() for x, i in tail_idx.items()}
    return table, log


def _project(vectors: np.ndarray) -> None:
    norms = np.linalg.norm(vectors, axis=1)
    over = norms > 1.0
    vectors[over] = vectors[over] / norms[over, None]


def triples_from_kg(kg: kgstore.KnowledgeGraph) -> list[Triple]:
    triples = []
    for e in sorted(kg.edges_of_kind(kgstore.ASSERT), key=lambda e: e.edge_id):
        if e.src_items is None:
            continue
        id1, id2 = e.src_items
        triples.append((id1, id2, e.relation or "", e.dst))
    return triples


def cobuy_triples(edges: list[tuple[str, str]]) -> list[Triple]:
    """Plain co-buy structure as single-item translational triples: both
    directions of each edge with a degenerate (a, a) head pair."""
    triples = []
    for a, b in edges:
        triples.append((a, a, COBUY_RELATION, "item:" + b))
        triples.append((b, b, COBUY_RELATION, "item:" + a))
    return triples


def export_item_vectors(table: EmbeddingTable, path: str) -> None:
    """item_id \\t space-separated floats, sorted by id, behind a dim header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# dim {table.dim}\n")
        for item_id in sorted(table.items):
            vec = table.items[item_id]
            fh.write(item_id + "\t" + " ".join(f"{v:.9g}" for v in vec) + "\n")


def load_vectors(path: str) -> dict[str, np.ndarray]:
    """Read the text vector format (also used for external tail vectors)."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition("\t")
            vectors[key] = np.array([float(x) for x in rest.split()], dtype=float)
    return vectors


def avg_pool_tail_features(item_id: str, kg: kgstore.KnowledgeGraph, tail_vectors: dict[str, np.ndarray]) -> np.ndarray:
    """Mean of the vectors of tails adjacent to the item through ASSERT
    edges; the zero vector when the item has no neighbors."""
    neighbor_tails = []
    for e in kg.edges_of_kind(kgstore.ASSERT):
        if e.src_items and item_id in e.src_items:
            neighbor_tails.append(e.dst)
    dim = len(next(iter(tail_vectors.values()))) if tail_vectors else 0
    if not neighbor_tails:
        return np.zeros(dim)
    missing = [t for t in neighbor_tails if t not in tail_vectors]
    if missing:
        raise KeyError(f"missing tail vectors for {missing[:3]}")
    return np.mean([tail_vectors[t] for t in neighbor_tails], axis=0)
