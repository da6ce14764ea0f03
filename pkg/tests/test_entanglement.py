import pytest

from pragmos.entanglement import AlignmentReport, align_path, can_be_empty, resolve
from pragmos.errors import SkipNotAModule
from pragmos.mdt import LoopMode, ModuleKind, annotate_loop, decompose, find_node
from pragmos.relations import (
    Activity,
    ExecutionPath,
    dfg_to_org,
    normalize_activities,
    paths_to_dfg,
)
from pragmos.synthesis import structure_hash, synthesize
from pragmos.verification import conforms, enumerate_traces

import cases


def exam_tree():
    corpus = normalize_activities(cases.EXAM_PATHS)
    tree = decompose(dfg_to_org(paths_to_dfg(corpus.paths)))
    block = frozenset({cases.EX_D, cases.EX_E})
    return corpus, annotate_loop(tree, block, LoopMode.REPEAT)


def sequence_tree(labels):
    corpus = normalize_activities([labels])
    return corpus, decompose(dfg_to_org(paths_to_dfg(corpus.paths)))


class TestAlignPath:
    def test_exam_path_one_misses_the_loop(self):
        corpus, tree = exam_tree()
        report = align_path(corpus.paths[0], tree)
        assert not report.fit
        assert report.missed_loop_modules == (frozenset({cases.EX_D, cases.EX_E}),)
        assert not report.skipped_blocks
        assert not report.residue

    def test_exam_path_two_fits(self):
        corpus, tree = exam_tree()
        report = align_path(corpus.paths[1], tree)
        assert report.fit

    def test_skipped_block_in_sequence(self):
        corpus, tree = sequence_tree(["A", "B", "C", "D"])
        report = align_path(ExecutionPath(("a", "d")), tree)
        assert not report.fit
        assert report.skipped_blocks == (frozenset({"b", "c"}),)

    def test_unknown_activities_reported(self):
        corpus, tree = sequence_tree(["A", "B"])
        report = align_path(ExecutionPath(("a", "mystery", "b")), tree)
        assert not report.fit
        assert report.unknown_activities == ("mystery",)

    def test_out_of_order_becomes_residue(self):
        corpus, tree = sequence_tree(["A", "B", "C"])
        report = align_path(ExecutionPath(("b", "a", "c")), tree)
        assert not report.fit
        assert "a" in report.residue

    def test_and_block_consumes_any_interleaving(self):
        corpus = normalize_activities(cases.CAR_PATHS)
        tree = decompose(dfg_to_org(paths_to_dfg(corpus.paths)))
        for path in corpus.paths:
            assert align_path(path, tree).fit

    def test_xor_foreign_branch_items_are_residue(self):
        corpus = normalize_activities(cases.CAR_PATHS)
        tree = decompose(dfg_to_org(paths_to_dfg(corpus.paths)))
        mixed = ExecutionPath(
            (cases.CAR_A, cases.CAR_B, cases.CAR_C, cases.CAR_F)
        )
        report = align_path(mixed, tree)
        assert not report.fit
        assert cases.CAR_F in report.residue

    def test_bicycle_paths_fit_the_annotated_tree(self):
        corpus = normalize_activities(cases.BICYCLE_PATHS)
        from pragmos.relations import inject_concurrency

        ids = {a.label: a.id for a in corpus.activities.values()}
        org = inject_concurrency(
            dfg_to_org(paths_to_dfg(corpus.paths)),
            {(ids[a], ids[b]) for a, b in cases.BICYCLE_CONCURRENCY},
        )
        tree = decompose(org)
        tree = annotate_loop(
            tree,
            frozenset({cases.BI_F, cases.BI_G, cases.BI_H}),
            LoopMode.REPEAT,
        )
        for path in corpus.paths:
            assert align_path(path, tree).fit, path

    def test_loop_reentry_consumes_multiple_passes(self):
        corpus, tree = exam_tree()
        path = ExecutionPath(
            (cases.EX_A, cases.EX_B, cases.EX_C, cases.EX_D, cases.EX_E, cases.EX_D, cases.EX_E, cases.EX_F)
        )
        assert align_path(path, tree).fit


class TestResolve:
    def test_exam_repeat_becomes_while(self):
        corpus, tree = exam_tree()
        reports = [align_path(p, tree) for p in corpus.paths]
        fixed, resolutions = resolve(tree, reports)
        node = find_node(fixed, frozenset({cases.EX_D, cases.EX_E}))
        assert node.loop is LoopMode.WHILE
        assert [r.kind for r in resolutions] == ["while_conversion"]
        model = synthesize(fixed, corpus.activities)
        assert structure_hash(model) == structure_hash(cases.exam_while_model())
        assert conforms(corpus.paths, model, 1).ok

    def test_identity_when_everything_fits(self):
        corpus = normalize_activities(cases.CAR_PATHS)
        tree = decompose(dfg_to_org(paths_to_dfg(corpus.paths)))
        reports = [align_path(p, tree) for p in corpus.paths]
        fixed, resolutions = resolve(tree, reports)
        assert fixed == tree
        assert resolutions == []

    def test_skip_insertion_in_sequence(self):
        corpus, tree = sequence_tree(["A", "B", "C", "D"])
        path = ExecutionPath(("a", "d"))
        reports = [align_path(path, tree)]
        fixed, resolutions = resolve(tree, reports)
        assert [r.kind for r in resolutions] == ["skip_insertion"]
        tau = resolutions[0].tau_id
        activities = dict(corpus.activities)
        activities[tau] = Activity(tau, "skip", silent=True)
        model = synthesize(fixed, activities)
        assert enumerate_traces(model, 0) == {("a", "b", "c", "d"), ("a", "d")}
        assert structure_hash(model) == structure_hash(cases.skip_reference_model())

    def test_resolve_is_idempotent(self):
        corpus, tree = exam_tree()
        reports = [align_path(p, tree) for p in corpus.paths]
        once, res1 = resolve(tree, reports)
        twice, res2 = resolve(once, reports)
        assert once == twice
        assert res2 == []

    def test_skip_resolution_idempotent(self):
        corpus, tree = sequence_tree(["A", "B", "C", "D"])
        reports = [align_path(ExecutionPath(("a", "d")), tree)]
        once, res1 = resolve(tree, reports)
        twice, res2 = resolve(once, reports)
        assert once == twice
        assert res2 == []

    def test_realignment_fits_after_resolution(self):
        corpus, tree = exam_tree()
        reports = [align_path(p, tree) for p in corpus.paths]
        fixed, _ = resolve(tree, reports)
        assert all(align_path(p, fixed).fit for p in corpus.paths)

        corpus2, tree2 = sequence_tree(["A", "B", "C", "D"])
        short = ExecutionPath(("a", "d"))
        fixed2, _ = resolve(tree2, [align_path(short, tree2)])
        assert align_path(short, fixed2).fit
        assert align_path(corpus2.paths[0], fixed2).fit

    def test_skip_preserves_existing_modules(self):
        from pragmos.mdt import is_module
        from pragmos.relations import inject_concurrency

        corpus = normalize_activities(cases.BICYCLE_PATHS)
        ids = {a.label: a.id for a in corpus.activities.values()}
        org = inject_concurrency(
            dfg_to_org(paths_to_dfg(corpus.paths)),
            {(ids[a], ids[b]) for a, b in cases.BICYCLE_CONCURRENCY},
        )
        tree = decompose(org)
        # force a skip of the parallel informing block
        path = ExecutionPath(
            (cases.BI_A, cases.BI_C, cases.BI_F, cases.BI_G, cases.BI_I, cases.BI_J, cases.BI_K)
        )
        report = align_path(path, tree)
        assert frozenset({cases.BI_D, cases.BI_E}) in report.skipped_blocks
        fixed, resolutions = resolve(tree, [report])
        # every pre-existing module survives as a node, up to the silent ids
        taus = {r.tau_id for r in resolutions}
        visible_sets = {n.descendants - taus for n in fixed.walk()}
        for node in tree.walk():
            assert node.descendants in visible_sets

    def test_while_conversion_only_touches_loop_mode(self):
        corpus, tree = exam_tree()
        reports = [align_path(p, tree) for p in corpus.paths]
        fixed, _ = resolve(tree, reports)
        before = find_node(tree, frozenset({cases.EX_D, cases.EX_E}))
        after = find_node(fixed, frozenset({cases.EX_D, cases.EX_E}))
        assert before.descendants == after.descendants
        assert before.kind == after.kind

    def test_partial_gap_raises_skip_not_a_module(self):
        corpus = normalize_activities(cases.CAR_PATHS)
        tree = decompose(dfg_to_org(paths_to_dfg(corpus.paths)))
        report = AlignmentReport(
            path=ExecutionPath((cases.CAR_A,)),
            fit=False,
            missed_loop_modules=(),
            skipped_blocks=(frozenset({cases.CAR_B, cases.CAR_D}),),
            unknown_activities=(),
            residue=(),
        )
        with pytest.raises(SkipNotAModule) as exc:
            resolve(tree, [report])
        assert exc.value.nearest


class TestCanBeEmpty:
    def test_while_loop_can_be_empty(self):
        corpus, tree = exam_tree()
        fixed, _ = resolve(tree, [align_path(p, tree) for p in corpus.paths])
        node = find_node(fixed, frozenset({cases.EX_D, cases.EX_E}))
        assert can_be_empty(node)

    def test_plain_sequence_cannot(self):
        corpus, tree = sequence_tree(["A", "B"])
        assert not can_be_empty(tree)
