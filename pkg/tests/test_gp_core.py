import math

import numpy as np
import pytest

from actiseq import gp_core
from actiseq.errors import ConfigError, DataError
from actiseq.gp_core import (
    ARITY,
    GpTree,
    Node,
    add,
    aq,
    constant,
    evaluate_batch,
    evaluate_tree,
    generate_tree,
    init_population,
    mul,
    neg,
    point_crossover,
    point_mutation,
    sub,
    tree_from_json,
    tree_from_text,
    tree_to_json,
    tree_to_text,
    variable,
)

FIG_TREE = GpTree(mul(add(variable(0), variable(2)), variable(1)))


def check_structure(tree: GpTree):
    """Recompute size/depth by traversal and verify arities."""

    def walk(node):
        assert len(node.children) == ARITY[node.kind]
        size, depth = 1, 1
        for c in node.children:
            s, d = walk(c)
            size += s
            depth = max(depth, 1 + d)
        assert node.size == size
        assert node.depth == depth
        return size, depth

    size, depth = walk(tree.root)
    assert tree.node_count == size
    assert tree.depth == depth


def all_subtrees(node):
    out = [node]
    for c in node.children:
        out.extend(all_subtrees(c))
    return out


class TestEvaluate:
    def test_worked_example_tree(self):
        assert evaluate_tree(FIG_TREE, [1.0, 2.0, 3.0]) == 8.0

    def test_analytic_quotient_zero_denominator_arg(self):
        tree = GpTree(aq(variable(0), constant(0.0)))
        for x in (-3.0, 0.0, 7.5):
            assert evaluate_tree(tree, [x]) == x

    def test_analytic_quotient_value(self):
        tree = GpTree(aq(variable(0), variable(1)))
        assert evaluate_tree(tree, [3.0, 4.0]) == pytest.approx(3 / math.sqrt(17), rel=1e-12)

    def test_pure(self):
        x = [0.3, -1.2, 5.0]
        assert evaluate_tree(FIG_TREE, x) == evaluate_tree(FIG_TREE, x)

    def test_feature_index_out_of_range(self):
        with pytest.raises(DataError):
            evaluate_tree(FIG_TREE, [1.0, 2.0])

    def test_overflow_clamps_to_finite(self):
        # (x0 * x0) * x0 on a huge input overflows; the clamp keeps it finite
        tree = GpTree(mul(mul(variable(0), variable(0)), variable(0)))
        val = evaluate_tree(tree, [1e300])
        assert np.isfinite(val)
        assert val == gp_core.HUGE

    def test_finite_on_random_trees(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 1e4, (64, 3))
        for _ in range(200):
            tree = generate_tree(4, "grow", rng, 3)
            assert np.isfinite(evaluate_batch(tree, x)).all()

    def test_batch_matches_single(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(10, 3))
        tree = generate_tree(4, "full", rng, 3)
        batch = evaluate_batch(tree, x)
        for i in range(10):
            assert batch[i] == evaluate_tree(tree, x[i])


class TestGenerate:
    def test_depth_one_is_leaf(self):
        rng = np.random.default_rng(2)
        for mode in ("full", "grow"):
            tree = generate_tree(1, mode, rng, 3)
            assert tree.node_count == 1
            assert tree.depth == 1

    def test_full_mode_leaves_at_max_depth(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            tree = generate_tree(4, "full", rng, 3)
            check_structure(tree)

            def leaf_depths(node, d=1):
                if not node.children:
                    yield d
                for c in node.children:
                    yield from leaf_depths(c, d + 1)

            assert set(leaf_depths(tree.root)) == {4}

    def test_grow_mode_covers_all_depths(self):
        rng = np.random.default_rng(4)
        depths = {generate_tree(4, "grow", rng, 3).depth for _ in range(10_000)}
        assert depths == {1, 2, 3, 4}

    def test_bad_depth(self):
        with pytest.raises(ConfigError):
            generate_tree(0, "full", np.random.default_rng(0), 3)

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            generate_tree(2, "half", np.random.default_rng(0), 3)

    def test_constants_can_be_disabled(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            tree = generate_tree(3, "grow", rng, 2, constants=False)
            kinds = {n.kind for n in all_subtrees(tree.root)}
            assert gp_core.OP_CONST not in kinds


class TestInitPopulation:
    def test_counts_and_ramp(self):
        rng = np.random.default_rng(6)
        pop = init_population(100, 4, rng, 3)
        assert len(pop) == 100
        ramp = [2, 3, 4]
        # first half is generated in full mode on the ramped depths
        for i, tree in enumerate(pop[:50]):
            assert tree.depth == ramp[i % 3]
            depths = set()

            def leaves(node, d=1):
                if not node.children:
                    depths.add(d)
                for c in node.children:
                    leaves(c, d + 1)

            leaves(tree.root)
            assert depths == {tree.depth}
        for i, tree in enumerate(pop[50:]):
            assert tree.depth <= ramp[i % 3]

    def test_smallest_sizes(self):
        rng = np.random.default_rng(7)
        assert len(init_population(2, 4, rng, 3)) == 2
        assert len(init_population(3, 4, rng, 3)) == 3

    def test_size_below_two(self):
        with pytest.raises(ConfigError):
            init_population(1, 4, np.random.default_rng(0), 3)

    def test_seeded_determinism(self):
        a = init_population(40, 4, np.random.default_rng(11), 3)
        b = init_population(40, 4, np.random.default_rng(11), 3)
        assert a == b


class TestVariation:
    def test_crossover_root_replacement(self):
        # parent a is a single leaf, so its crossover point is always the root
        a = GpTree(variable(0))
        b = FIG_TREE
        rng = np.random.default_rng(8)
        for _ in range(20):
            child = point_crossover(a, b, rng)
            assert child.root in all_subtrees(b.root)

    def test_crossover_identity(self):
        t = GpTree(variable(1))
        child = point_crossover(t, t, np.random.default_rng(9))
        assert child == t

    def test_crossover_preserves_parents_and_structure(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            a = generate_tree(4, "grow", rng, 3)
            b = generate_tree(4, "grow", rng, 3)
            a_text, b_text = tree_to_text(a), tree_to_text(b)
            child = point_crossover(a, b, rng)
            check_structure(child)
            assert tree_to_text(a) == a_text
            assert tree_to_text(b) == b_text

    def test_crossover_depth_cap(self):
        rng = np.random.default_rng(12)
        a = generate_tree(4, "full", rng, 3)
        for _ in range(50):
            b = generate_tree(4, "full", rng, 3)
            child = point_crossover(a, b, rng, max_depth=4)
            assert child.depth <= 4

    def test_mutation_leaf_replacement(self):
        parent = GpTree(variable(0))
        rng = np.random.default_rng(13)
        child = point_mutation(parent, 1, rng, 3)
        assert child.node_count == 1

    def test_mutation_structure_and_parent_immutability(self):
        rng = np.random.default_rng(14)
        parent = generate_tree(4, "full", rng, 3)
        text = tree_to_text(parent)
        for _ in range(1000):
            child = point_mutation(parent, 4, rng, 3)
            check_structure(child)
        assert tree_to_text(parent) == text

    def test_mutation_bad_depth(self):
        with pytest.raises(ConfigError):
            point_mutation(FIG_TREE, 0, np.random.default_rng(0), 3)


class TestSerialization:
    def test_text_example(self):
        assert tree_to_text(FIG_TREE) == "(* (+ x0 x2) x1)"
        assert tree_from_text("(* (+ x0 x2) x1)") == FIG_TREE

    def test_text_round_trip_random(self):
        rng = np.random.default_rng(15)
        for _ in range(300):
            tree = generate_tree(4, "grow", rng, 4)
            assert tree_from_text(tree_to_text(tree)) == tree

    def test_json_round_trip_random(self):
        rng = np.random.default_rng(16)
        for _ in range(300):
            tree = generate_tree(4, "grow", rng, 4)
            assert tree_from_json(tree_to_json(tree)) == tree

    def test_constant_precision_survives_text(self):
        tree = GpTree(sub(constant(0.1 + 0.2), neg(constant(-1e-17))))
        back = tree_from_text(tree_to_text(tree))
        assert back == tree

    @pytest.mark.parametrize(
        "text",
        ["", "(", "(* x0)", "(? x0 x1)", "(* x0 x1) junk", "x", "(neg)"],
    )
    def test_malformed_text(self, text):
        with pytest.raises(DataError):
            tree_from_text(text)

    def test_malformed_json(self):
        with pytest.raises(DataError):
            tree_from_json({"kind": "frob"})
        with pytest.raises(DataError):
            tree_from_json({"kind": "add", "children": [{"kind": "var", "index": 0}]})


class TestNodeInvariants:
    def test_bad_arity(self):
        with pytest.raises(DataError):
            Node(gp_core.OP_ADD, (variable(0),))

    def test_bad_feature_index(self):
        with pytest.raises(DataError):
            Node(gp_core.OP_VAR, index=-1)
