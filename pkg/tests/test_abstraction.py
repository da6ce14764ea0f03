import pytest

from pragmos.abstraction import (
    AbstractionEntry,
    AbstractionTable,
    apply_abstraction,
    expand_abstract_activity,
    find_repetition_segments,
    table_from_entries,
)
from pragmos.errors import NoRepetition, OverlappingVariants
from pragmos.relations import dfg_to_org, normalize_activities, paths_to_dfg
from pragmos.verification import enumerate_traces

import cases

HW = ("Check Hardware", "Repair Hardware", "Test System Functionality")
SW = ("Check Software", "Configure Software", "Test System Functionality")


def computer_table():
    labels = {label for p in cases.COMPUTER_PATHS for label in p}
    return table_from_entries(cases.COMPUTER_ABSTRACTION, labels)


class TestFindRepetitionSegments:
    def test_computer_repair_segments(self):
        groups = find_repetition_segments(cases.COMPUTER_PATHS)
        assert len(groups) == 1
        group = groups[0]
        assert group.repeated == "Test System Functionality"
        assert group.orientation == "trailing"
        assert set(group.variants()) == {HW, SW}

    def test_no_repetition(self):
        with pytest.raises(NoRepetition):
            find_repetition_segments(cases.CAR_PATHS)

    def test_leading_orientation(self):
        groups = find_repetition_segments([["x", "y", "x"]])
        assert groups[0].orientation == "leading"
        assert [seg for _, seg in groups[0].segments] == [("x", "y"), ("x",)]


class TestApplyAbstraction:
    def test_computer_paths_abstracted(self):
        table = computer_table()
        out = apply_abstraction(cases.COMPUTER_PATHS, table)
        assert out[0] == cases.COMPUTER_PATHS[0]
        assert out[1] == [
            "Receive Defective Computer",
            "Assess Computer Defect",
            "Provide Cost Calculation",
            "Repair Hardware Defect",
            "Fix Software Configuration",
        ]
        assert out[2] == [
            "Receive Defective Computer",
            "Assess Computer Defect",
            "Provide Cost Calculation",
            "Fix Software Configuration",
            "Repair Hardware Defect",
        ]

    def test_abstracted_corpus_has_no_repetition(self):
        table = computer_table()
        out = apply_abstraction(cases.COMPUTER_PATHS, table)
        corpus = normalize_activities(out)
        assert not corpus.repetitions
        # and the relations pipeline succeeds now
        org = dfg_to_org(paths_to_dfg(corpus.paths))
        assert org.kind("repair-hardware-defect", "fix-software-configuration").value == "concurrent"

    def test_empty_table_is_identity(self):
        table = AbstractionTable(entries=())
        assert apply_abstraction(cases.CAR_PATHS, table) == cases.CAR_PATHS

    def test_overlapping_variants_rejected(self):
        table = AbstractionTable(
            entries=(
                AbstractionEntry("one", "One", ((("a", "b")),)),
                AbstractionEntry("two", "Two", ((("b", "c")),)),
            )
        )
        with pytest.raises(OverlappingVariants):
            apply_abstraction([["a", "b", "c"]], table)

    def test_leftmost_longest(self):
        table = AbstractionTable(
            entries=(
                AbstractionEntry("long", "Long", (("a", "b", "c"),)),
                AbstractionEntry("short", "Short", (("a", "b"),)),
            )
        )
        # the longer variant wins even though the shorter is listed later
        assert apply_abstraction([["a", "b", "c", "d"]], table) == [["Long", "d"]]

    def test_preserves_path_count_and_outside_order(self):
        table = computer_table()
        out = apply_abstraction(cases.COMPUTER_PATHS, table)
        assert len(out) == len(cases.COMPUTER_PATHS)
        abstracted_labels = {"Repair Hardware Defect", "Fix Software Configuration"}
        folded = {label for v in (HW, SW) for label in v}
        for before, after in zip(cases.COMPUTER_PATHS, out):
            kept_before = [x for x in before if x not in folded]
            kept_after = [x for x in after if x not in abstracted_labels]
            assert kept_before == kept_after


class TestExpandAbstractActivity:
    def test_single_variant_becomes_sequence(self):
        table = computer_table()
        model = expand_abstract_activity("repair-hardware-defect", table)
        assert enumerate_traces(model, 0) == {
            ("check-hardware", "repair-hardware", "test-system-functionality")
        }

    def test_single_activity_variant(self):
        table = table_from_entries(
            [{"label": "Solo", "variants": [["Only"]]}], {"Only"}
        )
        model = expand_abstract_activity("solo", table)
        assert enumerate_traces(model, 0) == {("only",)}

    def test_two_orders_become_parallel(self):
        table = table_from_entries(
            [{"label": "Pair", "variants": [["X", "Y"], ["Y", "X"]]}], set()
        )
        model = expand_abstract_activity("pair", table)
        assert enumerate_traces(model, 0) == {("x", "y"), ("y", "x")}

    def test_unknown_entry(self):
        with pytest.raises(KeyError):
            expand_abstract_activity("ghost", AbstractionTable(entries=()))


class TestInliningRoundTrip:
    def test_computer_repair_paths_recovered_by_inlining(self):
        """Substituting each abstract task's sub-model traces back into the
        top-level traces reproduces every original path."""
        table = computer_table()
        abstracted = apply_abstraction(cases.COMPUTER_PATHS, table)
        corpus = normalize_activities(abstracted)
        org = dfg_to_org(paths_to_dfg(corpus.paths))
        from pragmos.mdt import decompose
        from pragmos.synthesis import synthesize

        top = synthesize(decompose(org), corpus.activities)
        top_traces = enumerate_traces(top, 1)

        sub_traces = {}
        id_for_label = {a.label: a.id for a in corpus.activities.values()}
        label_for_id = {a.id: a.label for a in corpus.activities.values()}
        for entry in table.entries:
            sub = expand_abstract_activity(entry.id, table)
            sub_traces[id_for_label[entry.label]] = enumerate_traces(sub, 1)

        def inline(trace):
            results = [[]]
            for step in trace:
                if step in sub_traces:
                    results = [
                        prefix + list(sub)
                        for prefix in results
                        for sub in sub_traces[step]
                    ]
                else:
                    results = [prefix + [step] for prefix in results]
            return {tuple(r) for r in results}

        inlined = set()
        for trace in top_traces:
            inlined |= inline(trace)

        original = {
            p.steps for p in normalize_activities(cases.COMPUTER_PATHS).paths
        }
        assert original <= inlined


class TestTableFromEntries:
    def test_fresh_ids_avoid_collisions(self):
        table = table_from_entries(
            [{"label": "Check Hardware", "variants": [["A"]]}],
            {"Check Hardware"},
        )
        assert table.entries[0].id == "check-hardware-2"

    def test_roundtrip_of_computer_case(self):
        table = computer_table()
        assert [e.id for e in table.entries] == [
            "repair-hardware-defect",
            "fix-software-configuration",
        ]
