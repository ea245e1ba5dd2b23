import random

import pytest

from intentforge.deptree import parse_conllu
from intentforge.mining import (
    LabeledTree,
    TreePattern,
    as_labeled,
    assign_pattern,
    coverage,
    default_min_support,
    find_embedding,
    mine_patterns,
    perfect_match_count,
    perfect_match_counts,
    select_final_patterns,
)

from support.tree_oracle import brute_force_frequent, pattern_oracle_form, random_labeled_tree

CONLLU_TWO_TOKENS = """\
1\tnice\tnice\tADJ\t_\t_\t2\tamod\t_\t_
2\tgloves\tglove\tNOUN\t_\t_\t0\troot\t_\t_
"""

CONLLU_TWO_ROOTS = """\
1\tone\tone\tNOUN\t_\t_\t0\troot\t_\t_
2\ttwo\ttwo\tNOUN\t_\t_\t0\troot\t_\t_
"""

CONLLU_CYCLE = """\
1\ta\ta\tNOUN\t_\t_\t2\tdep\t_\t_
2\tb\tb\tNOUN\t_\t_\t3\tdep\t_\t_
3\tc\tc\tNOUN\t_\t_\t2\tdep\t_\t_
"""

CONLLU_MULTIWORD = """\
1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_
1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_
2\tnot\tnot\tPART\t_\t_\t3\tadvmod\t_\t_
3\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_
"""


def variant_conllu(extra: str) -> str:
    """'they could both be used for his daughter' plus one trailing token."""
    rows = [
        "1\tthey\tthey\tPRON\t_\t_\t5\tnsubj:pass\t_\t_",
        "2\tcould\tcould\tAUX\t_\t_\t5\taux\t_\t_",
        "3\tboth\tboth\tDET\t_\t_\t5\tadvmod\t_\t_",
        "4\tbe\tbe\tAUX\t_\t_\t5\taux:pass\t_\t_",
        "5\tused\tuse\tVERB\t_\t_\t0\troot\t_\t_",
        "6\tfor\tfor\tADP\t_\t_\t8\tcase\t_\t_",
        "7\this\this\tPRON\t_\t_\t8\tnmod:poss\t_\t_",
        "8\tdaughter\tdaughter\tNOUN\t_\t_\t5\tobl\t_\t_",
    ]
    rows.append(extra)
    return "\n".join(rows) + "\n"


VARIANTS = [
    variant_conllu("9\t!\t!\tPUNCT\t_\t_\t5\tpunct\t_\t_"),
    variant_conllu("9\talso\talso\tADV\t_\t_\t5\tadvmod\t_\t_"),
    variant_conllu("9\ttoday\ttoday\tNOUN\t_\t_\t5\tobl\t_\t_"),
]


class TestParseConllu:
    def test_empty(self):
        assert parse_conllu("") == []

    def test_two_token_tree(self):
        trees = parse_conllu(CONLLU_TWO_TOKENS)
        assert len(trees) == 1
        tree = trees[0]
        assert len(tree.nodes) == 2 and len(tree.edges) == 1
        assert tree.root_index == 2
        assert tree.edges[0].dep_label == "amod"

    def test_two_roots_skipped(self, caplog):
        with caplog.at_level("WARNING"):
            assert parse_conllu(CONLLU_TWO_ROOTS) == []
        assert sum("skipping malformed" in r.message for r in caplog.records) == 1

    def test_cycle_skipped(self):
        assert parse_conllu(CONLLU_CYCLE) == []

    def test_multiword_line_ignored(self):
        trees = parse_conllu(CONLLU_MULTIWORD)
        assert len(trees) == 1
        assert [n.surface for n in trees[0].nodes] == ["do", "not", "go"]

    def test_blank_line_separated_blocks(self):
        text = CONLLU_TWO_TOKENS + "\n" + CONLLU_TWO_TOKENS
        assert len(parse_conllu(text)) == 2

    def test_sent_id_captured(self):
        text = "# sent_id = as123\n" + CONLLU_TWO_TOKENS
        assert parse_conllu(text)[0].sent_id == "as123"


def chain(labels, edge="x") -> LabeledTree:
    n = len(labels)
    return LabeledTree(
        labels=list(labels),
        parent=[-1] + list(range(n - 1)),
        edge_labels=[None] + [edge] * (n - 1),
        surfaces=[f"w{i}" for i in range(n)],
        order_keys=list(range(n)),
    )


class TestMinePatterns:
    def test_empty(self):
        assert mine_patterns([], 1) == []

    def test_single_repeated_chain(self):
        trees = [chain("AB") for _ in range(3)]
        patterns = mine_patterns(trees, 2)
        forms = {pattern_oracle_form(p) for p in patterns}
        assert forms == {"(A)", "(B)", "(A[x](B))"}
        assert all(p.support == 3 for p in patterns)

    def test_support_is_strict(self):
        trees = [chain("AB"), chain("AB"), chain("AC")]
        patterns = mine_patterns(trees, 2)
        forms = {pattern_oracle_form(p) for p in patterns}
        # (A[x](B)) and (B) and (C) appear in two or fewer trees
        assert forms == {"(A)"}

    def test_matches_brute_force_on_random_sets(self):
        rng = random.Random(99)
        for _ in range(12):
            trees = [random_labeled_tree(rng) for _ in range(rng.randint(1, 8))]
            min_support = rng.randint(1, 3)
            mined = mine_patterns(trees, min_support)
            got = {pattern_oracle_form(p) for p in mined}
            expected = brute_force_frequent(trees, min_support)
            assert got == expected

    def test_supports_match_subset_counting(self):
        rng = random.Random(5)
        trees = [random_labeled_tree(rng, max_nodes=5) for _ in range(6)]
        for pattern in mine_patterns(trees, 1):
            embeds = sum(1 for t in trees if find_embedding(pattern, t) is not None)
            assert embeds == pattern.support

    def test_ids_sorted_by_size_then_canonical(self):
        trees = [chain("ABC") for _ in range(3)]
        patterns = mine_patterns(trees, 2)
        sizes = [p.size for p in patterns]
        assert sizes == sorted(sizes, reverse=True)
        assert [p.pattern_id for p in patterns] == [f"p-{i:04d}" for i in range(len(patterns))]

    def test_default_min_support_scaling(self):
        assert default_min_support(90_000) == 500
        assert default_min_support(900) == 5
        assert default_min_support(10) == 2


def make_pattern(pattern_id, labels, edges) -> TreePattern:
    return TreePattern(
        pattern_id=pattern_id,
        labels=tuple(labels),
        edges=tuple(edges),
        canonical=f"{labels}|{edges}",
        support=0,
    )


class TestPerfectMatchAndAssign:
    # pattern A: chain V -x-> N; pattern B: chain V -x-> N -x-> D (3 nodes)
    A = make_pattern("t-0001", ["V", "N"], [(0, 1, "x")])
    B = make_pattern("t-0000", ["V", "N", "D"], [(0, 1, "x"), (1, 2, "x")])

    def test_longest_wins(self):
        tree = chain("VND")  # matches both A and B
        counts = perfect_match_counts([self.A, self.B], [tree])
        assert counts == {"t-0000": 1, "t-0001": 0}

    def test_smaller_pattern_counts_where_larger_fails(self):
        trees = [chain("VND"), chain("VN"), chain("ND")]
        counts = perfect_match_counts([self.A, self.B], trees)
        assert counts == {"t-0000": 1, "t-0001": 1}
        assert sum(counts.values()) <= len(trees)

    def test_pattern_matching_nothing(self):
        assert perfect_match_count(self.B, [chain("QQ")], [self.A, self.B]) == 0

    def test_identical_tree_counts(self):
        tree = chain("VN")
        assert perfect_match_count(self.A, [tree], [self.A]) == 1

    def test_equal_size_tie_lowest_id(self):
        p_hi = make_pattern("t-0009", ["V", "N"], [(0, 1, "x")])
        tree = chain("VN")
        assignment = assign_pattern(tree, [p_hi, self.A])
        assert assignment.pattern_id == "t-0001"

    def test_assignment_input_order_invariant(self):
        tree = chain("VND")
        patterns = [self.A, self.B]
        one = assign_pattern(tree, patterns)
        two = assign_pattern(tree, list(reversed(patterns)))
        assert one == two

    def test_no_match_passes_tail_through(self):
        tree = chain("QQ")
        assignment = assign_pattern(tree, [self.A], assertion_id="as1")
        assert assignment.pattern_id is None
        assert assignment.simplified_tail == "w0 w1"

    def test_empty_pattern_list_all_none(self):
        # relations that mine zero patterns keep every tail unaggregated
        assignments = [assign_pattern(chain("VN"), []) for _ in range(4)]
        assert all(a.pattern_id is None for a in assignments)
        assert coverage(assignments) == 0.0


class TestCoverage:
    def test_all_assigned(self):
        tree = chain("VN")
        assignments = [assign_pattern(tree, [TestPerfectMatchAndAssign.A]) for _ in range(5)]
        assert coverage(assignments) == 1.0

    def test_four_of_five(self):
        a = TestPerfectMatchAndAssign.A
        assignments = [assign_pattern(chain("VN"), [a]) for _ in range(4)]
        assignments.append(assign_pattern(chain("QQ"), [a]))
        assert coverage(assignments) == pytest.approx(0.8)


class TestAggregationEndToEnd:
    def test_variants_share_simplified_tail(self):
        trees = [parse_conllu(v)[0] for v in VARIANTS]
        candidates = mine_patterns(trees, 2, relation="UsedFor")
        final = select_final_patterns(candidates, trees, 2)
        assert len(final) == 1
        skeleton = final[0]
        assert skeleton.size == 8
        assert skeleton.perfect_match_count == 3
        tails = {assign_pattern(t, final).simplified_tail for t in trees}
        assert tails == {"they could both be used for his daughter"}

    def test_closed_class_words_are_anchored(self):
        trees = [parse_conllu(v)[0] for v in VARIANTS]
        final = select_final_patterns(mine_patterns(trees, 2, relation="UsedFor"), trees, 2)
        labels = set(final[0].labels)
        assert "PRON|they" in labels and "ADP|for" in labels and "PRON|his" in labels
        assert "AUX" in labels  # open-class tags carry no lexical anchor

    def test_sum_of_perfect_matches_bounded(self):
        trees = [parse_conllu(v)[0] for v in VARIANTS]
        candidates = mine_patterns(trees, 1, relation="UsedFor")
        counts = perfect_match_counts(candidates, trees)
        assert sum(counts.values()) <= len(trees)

    def test_human_revision_lists(self):
        trees = [parse_conllu(v)[0] for v in VARIANTS]
        candidates = mine_patterns(trees, 2, relation="UsedFor")
        kept = select_final_patterns(candidates, trees, 2)
        skeleton_id = kept[0].pattern_id
        denied = select_final_patterns(candidates, trees, 2, deny={skeleton_id})
        assert all(p.pattern_id != skeleton_id for p in denied)
        allowed = select_final_patterns(candidates, trees, 2, allow={skeleton_id})
        assert [p.pattern_id for p in allowed] == [skeleton_id]


class TestLabeledTreeConversion:
    def test_dep_tree_round_trip(self):
        tree = parse_conllu(CONLLU_TWO_TOKENS)[0]
        host = as_labeled(tree)
        assert host.labels == ["ADJ", "NOUN"]
        assert host.surfaces == ["nice", "gloves"]
        assert host.parent == [1, -1]
