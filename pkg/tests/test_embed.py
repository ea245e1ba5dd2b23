import math

import numpy as np
import pytest

from intentforge.embed import (
    EmbeddingTable,
    TrainConfig,
    avg_pool_tail_features,
    cobuy_triples,
    export_item_vectors,
    load_vectors,
    train,
    triple_loss,
    triple_loss_grads,
    triples_from_kg,
)
from intentforge.generation import Relation
from intentforge.kgstore import assemble

from test_kgstore import scored_assertion


class TestTripleLoss:
    def test_zero_vectors_exactly_margin(self):
        z = np.zeros(4)
        assert triple_loss(z, z, z, z, z, z, 1.0) == 1.0
        assert triple_loss(z, z, z, z, z, z, 0.25) == 0.25

    def test_hand_computed_case(self):
        p1, p2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        r, e = np.zeros(2), np.array([0.5, 0.5])
        neg = np.array([2.0, 2.0])
        # pos distance 0; neg distance sqrt(4.5); hinge clamps to zero
        assert triple_loss(p1, p2, r, e, neg, neg, 1.0) == 0.0
        raw = 1.0 + 0.0 - math.sqrt(4.5)
        assert raw < 0

    def test_negative_equal_to_positive_gives_margin(self):
        rng = np.random.default_rng(0)
        p1, p2, r, e = (rng.normal(size=5) for _ in range(4))
        assert triple_loss(p1, p2, r, e, p1, p2, 1.0) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            triple_loss(np.zeros(3), np.zeros(4), np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), 1.0)

    def test_head_average_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p1, p2, r, e, n1, n2 = (rng.normal(size=6) for _ in range(6))
            base = triple_loss(p1, p2, r, e, n1, n2, 1.0)
            assert triple_loss(p2, p1, r, e, n1, n2, 1.0) == pytest.approx(base)
            assert triple_loss(p1, p2, r, e, n2, n1, 1.0) == pytest.approx(base)


def central_difference(func, vec, h=1e-6):
    grad = np.zeros_like(vec)
    for i in range(len(vec)):
        plus = vec.copy()
        minus = vec.copy()
        plus[i] += h
        minus[i] -= h
        grad[i] = (func(plus) - func(minus)) / (2 * h)
    return grad


class TestGradients:
    def test_matches_central_differences_at_non_kink_points(self):
        rng = np.random.default_rng(42)
        margin = 1.0
        checked = 0
        while checked < 100:
            vecs = {name: rng.normal(size=6) for name in ("p1", "p2", "r", "e", "p1_neg", "p2_neg")}
            loss, grads = triple_loss_grads(
                vecs["p1"], vecs["p2"], vecs["r"], vecs["e"], vecs["p1_neg"], vecs["p2_neg"], margin
            )
            pos = np.linalg.norm((vecs["p1"] + vecs["p2"]) / 2 + vecs["r"] - vecs["e"])
            neg = np.linalg.norm((vecs["p1_neg"] + vecs["p2_neg"]) / 2 + vecs["r"] - vecs["e"])
            if loss <= 1e-3 or pos <= 1e-3 or neg <= 1e-3:
                continue
            checked += 1
            for name in vecs:
                def f(v, name=name):
                    alt = dict(vecs)
                    alt[name] = v
                    return triple_loss(alt["p1"], alt["p2"], alt["r"], alt["e"], alt["p1_neg"], alt["p2_neg"], margin)

                numeric = central_difference(f, vecs[name])
                denom = max(float(np.linalg.norm(numeric)), 1e-8)
                rel = float(np.linalg.norm(grads[name] - numeric)) / denom
                assert rel < 1e-4, f"{name}: rel error {rel}"
        assert checked == 100


def toy_triples():
    return [
        ("a", "b", "UsedFor", "t1"),
        ("a", "c", "UsedFor", "t2"),
        ("b", "c", "HasA", "t3"),
        ("c", "d", "HasA", "t1"),
        ("d", "e", "UsedFor", "t4"),
        ("e", "f", "Cause", "t2"),
        ("a", "f", "Cause", "t3"),
        ("b", "e", "UsedFor", "t4"),
    ]


class TestTraining:
    def test_loss_decreases_on_toy_kg(self):
        cfg = TrainConfig(dim=8, margin=1.0, lr=0.05, epochs=10, seed=3)
        _, log = train(toy_triples(), cfg)
        losses = [loss for _, loss in log[:10]]
        violations = sum(1 for a, b in zip(losses, losses[1:]) if b > a)
        assert violations <= 1, losses

    def test_seed_repeat_bit_identical(self):
        cfg = TrainConfig(dim=8, epochs=5, seed=11)
        t1, _ = train(toy_triples(), cfg)
        t2, _ = train(toy_triples(), cfg)
        for key in t1.items:
            assert np.array_equal(t1.items[key], t2.items[key])
        for key in t1.tails:
            assert np.array_equal(t1.tails[key], t2.tails[key])

    def test_zero_lr_keeps_initialization(self):
        base = TrainConfig(dim=8, lr=0.0, epochs=0, seed=7)
        trained = TrainConfig(dim=8, lr=0.0, epochs=6, seed=7)
        t0, _ = train(toy_triples(), base)
        t1, _ = train(toy_triples(), trained)
        for key in t0.items:
            assert np.array_equal(t0.items[key], t1.items[key])

    def test_single_triple_separates_negatives(self):
        cfg = TrainConfig(dim=8, margin=1.0, lr=0.1, epochs=80, seed=5)
        vocab = [f"x{i}" for i in range(10)]
        table, _ = train([("a", "b", "r", "t")], cfg, extra_items=vocab)
        rng = np.random.default_rng(123)
        head = (table.items["a"] + table.items["b"]) / 2 + table.relations["r"]
        pos = np.linalg.norm(head - table.tails["t"])
        wins = 0
        for _ in range(100):
            fake = rng.uniform(-1, 1, size=8)
            neg_head = (fake + table.items["b"]) / 2 + table.relations["r"]
            if pos < np.linalg.norm(neg_head - table.tails["t"]):
                wins += 1
        assert wins >= 95

    def test_item_vectors_inside_unit_ball(self):
        cfg = TrainConfig(dim=8, epochs=4, seed=1)
        table, _ = train(toy_triples(), cfg)
        for vec in table.items.values():
            assert np.linalg.norm(vec) <= 1.0 + 1e-12

    def test_tail_init_must_cover(self):
        cfg = TrainConfig(dim=4, epochs=1, seed=0)
        with pytest.raises(ValueError):
            train([("a", "b", "r", "t1")], cfg, tail_init={"other": np.zeros(4)})

    def test_tail_init_frozen_mode(self):
        init = {f"t{i}": np.full(4, float(i)) for i in range(1, 5)}
        cfg = TrainConfig(dim=4, epochs=5, seed=2, tails_trainable=False)
        table, _ = train(toy_triples(), cfg, tail_init=init)
        for key, vec in init.items():
            assert np.array_equal(table.tails[key], vec)

    def test_empty_triples_rejected(self):
        with pytest.raises(ValueError):
            train([], TrainConfig())


class TestExport:
    def test_empty_table_header_only(self, tmp_path):
        path = tmp_path / "vecs.tsv"
        export_item_vectors(EmbeddingTable(dim=4), str(path))
        assert path.read_text() == "# dim 4\n"

    def test_round_trip_within_tolerance(self, tmp_path):
        cfg = TrainConfig(dim=8, epochs=3, seed=9)
        table, _ = train(toy_triples(), cfg)
        path = tmp_path / "vecs.tsv"
        export_item_vectors(table, str(path))
        loaded = load_vectors(str(path))
        assert sorted(loaded) == sorted(table.items)
        for key in loaded:
            assert np.allclose(loaded[key], table.items[key], atol=1e-6)
            assert np.isfinite(loaded[key]).all()

    def test_sorted_by_id(self, tmp_path):
        table = EmbeddingTable(dim=2, items={"b": np.zeros(2), "a": np.ones(2)})
        path = tmp_path / "vecs.tsv"
        export_item_vectors(table, str(path))
        lines = path.read_text().splitlines()
        assert [ln.split("\t")[0] for ln in lines[1:]] == ["a", "b"]


def pooled_fixture_kg():
    scored = [
        scored_assertion("a__b", Relation.UsedFor, "tail one x", 0.9, 0.5),
        scored_assertion("a__b", Relation.HasA, "tail two y", 0.9, 0.5),
        scored_assertion("b__c", Relation.HasA, "tail three z", 0.9, 0.5),
    ]
    pairs = {"a__b": ("a", "b"), "b__c": ("b", "c")}
    return assemble(scored, [], [], pairs, 0.5)


class TestAvgPool:
    def test_no_neighbors_zero_vector(self):
        kg = pooled_fixture_kg()
        vecs = {nid: np.ones(3) for nid in kg.intention_nodes}
        assert np.array_equal(avg_pool_tail_features("zz", kg, vecs), np.zeros(3))

    def test_two_neighbors_mean(self):
        from intentforge.kgstore import intention_node_id

        kg = pooled_fixture_kg()
        vecs = {
            intention_node_id("tail one x"): np.array([1.0, 0.0]),
            intention_node_id("tail two y"): np.array([0.0, 1.0]),
            intention_node_id("tail three z"): np.array([1.0, 1.0]),
        }
        pooled = avg_pool_tail_features("a", kg, vecs)
        assert np.allclose(pooled, [0.5, 0.5])

    def test_three_neighbor_hand_mean(self):
        from intentforge.kgstore import intention_node_id

        kg = pooled_fixture_kg()
        vecs = {
            intention_node_id("tail one x"): np.array([1.0, 0.0]),
            intention_node_id("tail two y"): np.array([0.0, 1.0]),
            intention_node_id("tail three z"): np.array([2.0, 2.0]),
        }
        pooled = avg_pool_tail_features("b", kg, vecs)  # b touches all three tails
        assert np.allclose(pooled, [1.0, 1.0])

    def test_missing_vector_fatal(self):
        kg = pooled_fixture_kg()
        with pytest.raises(KeyError):
            avg_pool_tail_features("a", kg, {})


class TestTripleBuilders:
    def test_triples_from_kg(self):
        kg = pooled_fixture_kg()
        triples = triples_from_kg(kg)
        assert len(triples) == 3
        assert all(len(t) == 4 for t in triples)

    def test_cobuy_triples_both_directions(self):
        triples = cobuy_triples([("a", "b")])
        assert ("a", "a", "COBUY", "item:b") in triples
        assert ("b", "b", "COBUY", "item:a") in triples
