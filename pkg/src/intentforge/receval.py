"""Recommendation-side evaluation: matched-KG extraction, a feature-aware
rating predictor, and the RMSE ablation harness."""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field

import numpy as np

from . import kgstore

logger = logging.getLogger(__name__)

RATING_MIN = 1.0
RATING_MAX = 5.0


@dataclass(frozen=True)
class Interaction:
    user_id: str
    item_id: str
    rating: float
    timestamp: float


def read_interactions(path: str) -> list[Interaction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            user, item, rating, ts = line.split("\t")
            out.append(Interaction(user, item, float(rating), float(ts)))
    return out


def _user_seed(seed: int, user_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{user_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def split_interactions(
    data: list[Interaction], seed: int = 0
) -> tuple[list[Interaction], list[Interaction], list[Interaction]]:
    """Deterministic per-user 8:1:1 split. Users with fewer than three
    interactions contribute everything to train."""
    by_user: dict[str, list[Interaction]] = {}
    for it in data:
        by_user.setdefault(it.user_id, []).append(it)
    train: list[Interaction] = []
    dev: list[Interaction] = []
    test: list[Interaction] = []
    for user in sorted(by_user):
        rows = sorted(by_user[user], key=lambda it: (it.timestamp, it.item_id, it.rating))
        if len(rows) < 3:
            train.extend(rows)
            continue
        rng = random.Random(_user_seed(seed, user))
        rng.shuffle(rows)
        n = len(rows)
        n_test = max(1, n // 10)
        n_dev = max(1, n // 10)
        test.extend(rows[:n_test])
        dev.extend(rows[n_test : n_test + n_dev])
        train.extend(rows[n_test + n_dev :])
    return train, dev, test


@dataclass
class MatchedKG:
    kg: kgstore.KnowledgeGraph
    item_coverage: float


def match_kg(kg: kgstore.KnowledgeGraph, train: list[Interaction]) -> MatchedKG:
    """Restrict the graph to ASSERT head pairs co-purchased by at least one
    training user, carrying dependent CONCEPT_ASSERT and ISA_WEIGHT edges
    along. Coverage is the fraction of dataset items the matched KG touches."""
    users_of_item: dict[str, set[str]] = {}
    for it in train:
        users_of_item.setdefault(it.item_id, set()).add(it.user_id)

    def co_purchased(id1: str, id2: str) -> bool:
        u1 = users_of_item.get(id1)
        u2 = users_of_item.get(id2)
        return bool(u1 and u2 and (u1 & u2))

    sub = kgstore.KnowledgeGraph(plausibility_threshold=kg.plausibility_threshold)
    kept_intentions: set[str] = set()
    for e in kg.edges_of_kind(kgstore.ASSERT):
        if e.src_items is None or not co_purchased(*e.src_items):
            continue
        sub.edges[e.edge_id] = e
        kept_intentions.add(e.dst)
        for item_id in e.src_items:
            node = kgstore.item_node_id(item_id)
            sub.item_nodes[node] = kg.item_nodes[node]
        sub.intention_nodes[e.dst] = kg.intention_nodes[e.dst]
    kept_pairs = {e.src for e in sub.edges_of_kind(kgstore.ASSERT)}
    kept_abstracts: set[str] = set()
    for e in kg.edges_of_kind(kgstore.ISA_WEIGHT):
        if e.src in kept_intentions:
            sub.edges[e.edge_id] = e
            sub.abstract_nodes[e.dst] = kg.abstract_nodes[e.dst]
            kept_abstracts.add(e.dst)
    for e in kg.edges_of_kind(kgstore.CONCEPT_ASSERT):
        if e.src in kept_pairs and e.dst in kept_abstracts:
            sub.edges[e.edge_id] = e

    dataset_items = {it.item_id for it in train}
    covered = {n["item_id"] for n in sub.item_nodes.values()}
    coverage = len(covered & dataset_items) / len(dataset_items) if dataset_items else 0.0
    return MatchedKG(kg=sub, item_coverage=coverage)


@dataclass
class PredictorConfig:
    factors: int = 8
    lr: float = 0.02
    reg: float = 0.05
    epochs: int = 30
    seed: int = 0


@dataclass
class Predictor:
    cfg: PredictorConfig
    mu: float
    b_user: dict[str, float]
    b_item: dict[str, float]
    u_factors: dict[str, np.ndarray]
    v_factors: dict[str, np.ndarray]
    w: np.ndarray
    features: dict[str, np.ndarray] = field(default_factory=dict)
    feature_dim: int = 0

    def _feature(self, item_id: str) -> np.ndarray:
        if self.feature_dim == 0:
            return np.zeros(0)
        return self.features.get(item_id, np.zeros(self.feature_dim))

    def predict(self, user_id: str, item_id: str) -> float:
        est = self.mu + self.b_user.get(user_id, 0.0) + self.b_item.get(item_id, 0.0)
        if user_id in self.u_factors and item_id in self.v_factors:
            est += float(self.u_factors[user_id] @ self.v_factors[item_id])
        if self.feature_dim:
            est += float(self.w @ self._feature(item_id))
        return float(min(RATING_MAX, max(RATING_MIN, est)))


def train_predictor(
    train: list[Interaction],
    item_features: dict[str, np.ndarray] | None = None,
    cfg: PredictorConfig | None = None,
) -> Predictor:
    """Biased matrix factorization with a linear head over item features:
    rating ~ mu + b_u + b_i + <u, v_i> + <w, f_i>, fit by SGD with L2
    regularization. Deterministic for a given seed."""
    if not train:
        raise ValueError("empty training data")
    cfg = cfg or PredictorConfig()
    rng = np.random.default_rng(cfg.seed)
    users = sorted({it.user_id for it in train})
    items = sorted({it.item_id for it in train})
    feature_dim = 0
    features: dict[str, np.ndarray] = {}
    if item_features:
        feature_dim = len(next(iter(item_features.values())))
        features = {k: np.asarray(v, dtype=float) for k, v in item_features.items()}

    mu = float(np.mean([it.rating for it in train]))
    b_user = {u: 0.0 for u in users}
    b_item = {i: 0.0 for i in items}
    scale = 0.01
    u_factors = {u: rng.normal(0, scale, cfg.factors) for u in users}
    v_factors = {i: rng.normal(0, scale, cfg.factors) for i in items}
    w = np.zeros(feature_dim)

    model = Predictor(cfg, mu, b_user, b_item, u_factors, v_factors, w, features, feature_dim)
    rows = sorted(train, key=lambda it: (it.user_id, it.item_id, it.timestamp))
    order_rng = np.random.default_rng(cfg.seed + 1)
    for _ in range(cfg.epochs):
        for k in order_rng.permutation(len(rows)):
            it = rows[k]
            f = model._feature(it.item_id)
            pred = (
                model.mu
                + b_user[it.user_id]
                + b_item[it.item_id]
                + float(u_factors[it.user_id] @ v_factors[it.item_id])
                + (float(w @ f) if feature_dim else 0.0)
            )
            err = it.rating - pred
            b_user[it.user_id] += cfg.lr * (err - cfg.reg * b_user[it.user_id])
            b_item[it.item_id] += cfg.lr * (err - cfg.reg * b_item[it.item_id])
            uu = u_factors[it.user_id]
            vv = v_factors[it.item_id]
            u_factors[it.user_id] = uu + cfg.lr * (err * vv - cfg.reg * uu)
            v_factors[it.item_id] = vv + cfg.lr * (err * uu - cfg.reg * vv)
            if feature_dim:
                w += cfg.lr * (err * f - cfg.reg / len(rows) * w)
    model.w = w
    return model


def rmse(model: Predictor, test: list[Interaction]) -> float:
    """Root mean squared error with predictions clamped to the rating range."""
    if not test:
        raise ValueError("empty test data")
    se = 0.0
    for it in test:
        se += (model.predict(it.user_id, it.item_id) - it.rating) ** 2
    return float(np.sqrt(se / len(test)))


@dataclass
class AblationConfig:
    name: str
    features: dict[str, np.ndarray] | None  # None means no feature head
    coverage: float | None = None
    missing: bool = False


@dataclass
class AblationRow:
    name: str
    mean_rmse: float
    std_rmse: float
    coverage: float | None
    runs: int


def run_ablation(
    train: list[Interaction],
    test: list[Interaction],
    configs: list[AblationConfig],
    predictor_cfg: PredictorConfig | None = None,
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
) -> list[AblationRow]:
    """RMSE per configuration averaged over the seed protocol. Configurations
    whose feature artifacts are missing are skipped with a notice."""
    base = predictor_cfg or PredictorConfig()
    rows = []
    for config in configs:
        if config.missing:
            logger.warning("ablation config %s skipped: missing artifacts", config.name)
            continue
        scores = []
        for seed in seeds:
            cfg = PredictorConfig(
                factors=base.factors, lr=base.lr, reg=base.reg, epochs=base.epochs, seed=seed
            )
            model = train_predictor(train, item_features=config.features, cfg=cfg)
            scores.append(rmse(model, test))
        rows.append(
            AblationRow(
                name=config.name,
                mean_rmse=float(np.mean(scores)),
                std_rmse=float(np.std(scores)),
                coverage=config.coverage,
                runs=len(scores),
            )
        )
    return rows


def write_report(rows: list[AblationRow], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("config,mean_rmse,std,coverage\n")
        for row in rows:
            cov = "" if row.coverage is None else f"{row.coverage:.4f}"
            fh.write(f"{row.name},{row.mean_rmse:.4f},{row.std_rmse:.4f},{cov}\n")
