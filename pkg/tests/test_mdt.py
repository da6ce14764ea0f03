import itertools
import random

import pytest

from pragmos.errors import LoopNotAModule
from pragmos.mdt import (
    LoopMode,
    ModuleKind,
    annotate_loop,
    canonical_form,
    decompose,
    find_node,
    is_module,
)
from pragmos.relations import (
    dfg_to_org,
    inject_concurrency,
    normalize_activities,
    paths_to_dfg,
    verify_org,
)

import cases
from test_relations import org_from_table


def car_org():
    corpus = normalize_activities(cases.CAR_PATHS)
    return dfg_to_org(paths_to_dfg(corpus.paths))


def bicycle_org_step2():
    corpus = normalize_activities(cases.BICYCLE_PATHS)
    org = dfg_to_org(paths_to_dfg(corpus.paths))
    pairs = {
        (cases.BI_D, cases.BI_E),
        (cases.BI_F, cases.BI_I),
        (cases.BI_G, cases.BI_I),
        (cases.BI_H, cases.BI_I),
    }
    return inject_concurrency(org, pairs)


class TestIsModule:
    def test_parallel_block_is_a_module(self):
        org = car_org()
        assert is_module(org, {cases.CAR_D, cases.CAR_E})

    def test_trivial_modules(self):
        org = car_org()
        assert is_module(org, set(org.nodes))
        for v in org.nodes:
            assert is_module(org, {v})

    def test_mixed_pair_is_not_a_module(self):
        org = car_org()
        # b precedes c while d conflicts with c
        assert not is_module(org, {cases.CAR_B, cases.CAR_D})


class TestDecompose:
    def test_car_tree(self):
        tree = decompose(car_org())
        assert cases.shape(tree) == (
            "linear",
            (
                ("trivial", cases.CAR_A),
                (
                    "complete_xor",
                    (
                        (
                            "linear",
                            (("trivial", cases.CAR_B), ("trivial", cases.CAR_C)),
                        ),
                        (
                            "linear",
                            (
                                (
                                    "complete_and",
                                    (
                                        ("trivial", cases.CAR_E),
                                        ("trivial", cases.CAR_D),
                                    ),
                                ),
                                ("trivial", cases.CAR_F),
                            ),
                        ),
                    ),
                ),
            ),
        )

    def test_single_node(self):
        tree = decompose(org_from_table("x"))
        assert tree.kind is ModuleKind.TRIVIAL
        assert tree.leaf_activity == "x"

    def test_bicycle_step2_tree(self):
        tree = decompose(bicycle_org_step2())
        # i is concurrent with the module {f, {g xor h}}
        block = find_node(tree, frozenset({cases.BI_F, cases.BI_G, cases.BI_H, cases.BI_I}))
        assert block is not None
        assert block.kind is ModuleKind.COMPLETE_AND
        inner = find_node(block, frozenset({cases.BI_F, cases.BI_G, cases.BI_H}))
        assert inner is not None
        assert inner.kind is ModuleKind.LINEAR
        assert cases.shape(inner) == (
            "linear",
            (
                ("trivial", cases.BI_F),
                (
                    "complete_xor",
                    (("trivial", cases.BI_H), ("trivial", cases.BI_G)),
                ),
            ),
        )

    def test_exam_tree_is_a_sequence(self):
        corpus = normalize_activities(cases.EXAM_PATHS)
        tree = decompose(dfg_to_org(paths_to_dfg(corpus.paths)))
        assert tree.kind is ModuleKind.LINEAR
        assert [c.leaf_activity for c in tree.children] == [
            cases.EX_A,
            cases.EX_B,
            cases.EX_C,
            cases.EX_D,
            cases.EX_E,
            cases.EX_F,
        ]

    def test_primitive_detected(self):
        org = org_from_table("xyz", precedes=[("x", "y"), ("y", "z"), ("x", "z")])
        injected = inject_concurrency(org, {("x", "z")})
        tree = decompose(injected)
        assert tree.kind is ModuleKind.PRIMITIVE
        assert len(tree.children) == 3

    def test_deterministic(self):
        org = bicycle_org_step2()
        assert cases.shape(decompose(org)) == cases.shape(decompose(org))


def brute_force_strong_modules(org):
    nodes = sorted(org.nodes)
    modules = [
        frozenset(c)
        for r in range(1, len(nodes) + 1)
        for c in itertools.combinations(nodes, r)
        if is_module(org, frozenset(c))
    ]

    def overlaps(a, b):
        return a & b and a - b and b - a

    return {m for m in modules if not any(overlaps(m, other) for other in modules)}


def random_org(rng: random.Random, max_nodes=8):
    """A well-formed random ORG, produced from random execution paths."""
    n = rng.randint(2, max_nodes)
    labels = [f"a{i}" for i in range(n)]
    while True:
        paths = []
        for _ in range(rng.randint(1, 4)):
            size = rng.randint(1, n)
            paths.append(rng.sample(labels, size))
        try:
            corpus = normalize_activities(paths)
            org = dfg_to_org(paths_to_dfg(corpus.paths))
        except Exception:
            continue
        pairs = set()
        candidates = [
            (a, b)
            for (a, b), e in org.pairs()
            if e.kind.value == "precedes"
        ]
        for pair in candidates:
            if rng.random() < 0.15:
                pairs.add(pair)
        try:
            org = inject_concurrency(org, pairs)
        except Exception:
            pass
        if verify_org(org) == []:
            return org


class TestDecomposeOracle:
    def test_nodes_are_exactly_the_strong_modules(self):
        rng = random.Random(7)
        for _ in range(60):
            org = random_org(rng)
            tree = decompose(org)
            tree_sets = {node.descendants for node in tree.walk()}
            assert tree_sets == brute_force_strong_modules(org), sorted(
                (tuple(sorted(p)), e.kind.value) for p, e in org.pairs()
            )

    def test_every_internal_node_is_a_module(self):
        rng = random.Random(11)
        for _ in range(60):
            org = random_org(rng)
            for node in decompose(org).walk():
                assert is_module(org, node.descendants)


class TestAnnotateLoop:
    def test_bicycle_loop_annotation(self):
        tree = decompose(bicycle_org_step2())
        block = frozenset({cases.BI_F, cases.BI_G, cases.BI_H})
        out = annotate_loop(tree, block, LoopMode.REPEAT)
        node = find_node(out, block)
        assert node.loop is LoopMode.REPEAT
        others = [n for n in out.walk() if n.descendants != block]
        assert all(n.loop is LoopMode.NONE for n in others)

    def test_root_annotation(self):
        tree = decompose(car_org())
        out = annotate_loop(tree, tree.descendants, LoopMode.WHILE)
        assert out.loop is LoopMode.WHILE

    def test_partial_block_rejected_with_nearest(self):
        tree = decompose(bicycle_org_step2())
        with pytest.raises(LoopNotAModule) as exc:
            annotate_loop(tree, frozenset({cases.BI_F, cases.BI_G}), LoopMode.REPEAT)
        assert exc.value.nearest == frozenset({cases.BI_F, cases.BI_G, cases.BI_H})

    def test_consecutive_linear_run_is_materialized(self):
        corpus = normalize_activities(cases.EXAM_PATHS)
        tree = decompose(dfg_to_org(paths_to_dfg(corpus.paths)))
        block = frozenset({cases.EX_D, cases.EX_E})
        out = annotate_loop(tree, block, LoopMode.REPEAT)
        node = find_node(out, block)
        assert node is not None
        assert node.kind is ModuleKind.LINEAR
        assert node.loop is LoopMode.REPEAT
        assert [c.leaf_activity for c in node.children] == [cases.EX_D, cases.EX_E]
        # the surrounding sequence keeps its order
        assert [c.descendants for c in out.children] == [
            frozenset({cases.EX_A}),
            frozenset({cases.EX_B}),
            frozenset({cases.EX_C}),
            block,
            frozenset({cases.EX_F}),
        ]

    def test_non_consecutive_linear_run_rejected(self):
        corpus = normalize_activities(cases.EXAM_PATHS)
        tree = decompose(dfg_to_org(paths_to_dfg(corpus.paths)))
        with pytest.raises(LoopNotAModule):
            annotate_loop(tree, frozenset({cases.EX_B, cases.EX_D}), LoopMode.REPEAT)


class TestCanonicalForm:
    def test_sorts_unordered_children(self):
        tree = decompose(car_org())
        assert canonical_form(tree) == tree  # decompose is already canonical

    def test_idempotent_on_random_trees(self):
        rng = random.Random(3)
        for _ in range(40):
            tree = decompose(random_org(rng))
            once = canonical_form(tree)
            assert canonical_form(once) == once

    def test_relabeled_orgs_yield_aligned_trees(self):
        org = car_org()
        mapping = {v: f"z-{v}" for v in org.nodes}
        relabeled_paths = [
            [mapping[s] for s in p.steps]
            for p in normalize_activities(cases.CAR_PATHS).paths
        ]
        corpus2 = normalize_activities(relabeled_paths)
        org2 = dfg_to_org(paths_to_dfg(corpus2.paths))

        def rename(shape_tuple):
            tag, rest = shape_tuple
            if isinstance(rest, str):
                return (tag, f"z-{rest}")
            return (tag, tuple(rename(r) for r in rest))

        assert rename(cases.shape(canonical_form(decompose(org)))) == cases.shape(
            canonical_form(decompose(org2))
        )
