import random

import pytest

from intentforge.conceptualize import (
    ConceptTable,
    conceptualize_tail,
    load_concept_table,
)


def daughter_table() -> ConceptTable:
    table = ConceptTable()
    table.add("daughter", "offspring", 3)
    table.add("daughter", "relative", 2)
    table.add("daughter", "family-member", 1)
    return table


class TestLoadTable:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "concepts.tsv"
        path.write_text("")
        assert len(load_concept_table(str(path))) == 0

    def test_duplicate_rows_summed(self, tmp_path):
        path = tmp_path / "concepts.tsv"
        path.write_text("dog\tanimal\t2\ndog\tanimal\t2\n")
        table = load_concept_table(str(path))
        assert table.concepts("dog") == [("animal", 4.0)]

    def test_bad_likelihood_skipped(self, tmp_path):
        path = tmp_path / "concepts.tsv"
        path.write_text("dog\tanimal\toops\ncat\tanimal\t1\ncow\tanimal\t-2\n")
        table = load_concept_table(str(path))
        assert "dog" not in table and "cow" not in table and "cat" in table

    def test_five_row_fixture_lookup(self, tmp_path):
        path = tmp_path / "concepts.tsv"
        path.write_text(
            "Daughter\toffspring\t3\n"
            "daughter\trelative\t2\n"
            "watch\tdevice\t5\n"
            "watch\taccessory\t2\n"
            "tent\tshelter\t1\n"
        )
        table = load_concept_table(str(path))
        assert table.concepts("DAUGHTER") == [("offspring", 3.0), ("relative", 2.0)]
        assert table.concepts("watch")[0] == ("device", 5.0)
        assert table.concepts("missing") == []


class TestConceptualizeTail:
    def test_no_span_in_table(self):
        assert conceptualize_tail("used for winter", daughter_table()) == []

    def test_worked_daughter_example(self):
        out = conceptualize_tail("used for his daughter", daughter_table())
        assert [a.concept for a in out] == ["offspring", "relative", "family-member"]
        assert out[0].weight == pytest.approx(0.5, abs=1e-4)
        assert out[1].weight == pytest.approx(0.3333, abs=1e-4)
        assert out[2].weight == pytest.approx(0.1667, abs=1e-4)
        assert [a.abstract_tail for a in out] == [
            "used for his offspring",
            "used for his relative",
            "used for his family-member",
        ]

    def test_top_1(self):
        out = conceptualize_tail("used for his daughter", daughter_table(), top_k=1)
        assert [a.concept for a in out] == ["offspring"]

    def test_min_weight_cut(self):
        out = conceptualize_tail("used for his daughter", daughter_table(), min_weight=0.2)
        assert [a.concept for a in out] == ["offspring", "relative"]

    def test_weights_normalized_over_full_list_despite_top_k(self):
        out = conceptualize_tail("used for his daughter", daughter_table(), top_k=2)
        # weights stay /6 normalized even though only two variants are kept
        assert sum(a.weight for a in out) == pytest.approx(5 / 6)

    def test_longest_span_preferred(self):
        table = ConceptTable()
        table.add("water bottle", "container", 4)
        table.add("bottle", "vessel", 9)
        out = conceptualize_tail("carrying a water bottle", table)
        assert [a.concept for a in out] == ["container"]

    def test_rightmost_span_among_equals(self):
        table = ConceptTable()
        table.add("tent", "shelter", 1)
        table.add("stove", "appliance", 1)
        out = conceptualize_tail("a tent and a stove", table)
        assert [a.concept for a in out] == ["appliance"]

    def test_substitution_preserves_other_tokens(self):
        rng = random.Random(0)
        table = daughter_table()
        for _ in range(20):
            prefix = [rng.choice(["they", "could", "be", "used", "for"]) for _ in range(rng.randint(0, 4))]
            suffix = [rng.choice(["today", "happily"]) for _ in range(rng.randint(0, 2))]
            tail = " ".join(prefix + ["daughter"] + suffix)
            for ab in conceptualize_tail(tail, table):
                tokens = ab.abstract_tail.split()
                assert tokens[: len(prefix)] == prefix
                assert tokens[len(tokens) - len(suffix):] == suffix

    def test_weights_sum_below_one_and_sorted(self):
        rng = random.Random(8)
        for _ in range(30):
            table = ConceptTable()
            n = rng.randint(1, 8)
            for i in range(n):
                table.add("thing", f"concept{i}", rng.uniform(0.1, 5))
            out = conceptualize_tail("a thing", table, top_k=rng.randint(1, 6), min_weight=0.01)
            weights = [a.weight for a in out]
            assert sum(weights) <= 1 + 1e-9
            assert weights == sorted(weights, reverse=True)

    def test_node_id_deterministic(self):
        one = conceptualize_tail("used for his daughter", daughter_table())
        two = conceptualize_tail("used for his daughter", daughter_table())
        assert [a.node_id for a in one] == [a.node_id for a in two]

    def test_top_k_validation(self):
        with pytest.raises(ValueError):
            conceptualize_tail("x", daughter_table(), top_k=0)
